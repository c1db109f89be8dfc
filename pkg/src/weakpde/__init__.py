"""Weak-form recovery of PDE coefficients from noisy gridded data.

The pipeline: integrate a reference system (solvers), optionally corrupt it
(gridfield), integrate library terms against smooth compactly supported
weights over random space-time boxes (weights, weak), then prune a sparse
coefficient vector from the resulting linear system (regression).
"""

from .gridfield import (AnalyticExpr, Constant, CoordPolynomial,
                        FieldFormatError, GridField, NoiseSpec, Sinusoid,
                        add_noise, eval_analytic, export_csv, load_field,
                        make_expression, make_grid, save_field, subsample)
from .weights import (WeightReport, WeightSpec, envelope_derivative,
                      envelope_poly, eval_weight, sine_time_derivative,
                      validate_weight_spec, verify_weight)
from .weak import (IntegrationDomain, LinearSystem, TermPart, TermSpec,
                   WeakAssembler, assemble_column, build_system,
                   builtin_library, builtin_reference,
                   builtin_strong_library, default_weight, quadrature,
                   sample_domains, snap_domain, snapped_domain,
                   strong_column_oracle)
from .regression import (EnsembleReport, MemberOutcome, RegressionResult,
                         compare_structure, ensemble_discover, least_squares,
                         member_seed, relative_errors, sparsify)
from .solvers import (KolmogorovParams, KSParams, LatentRecord,
                      NonChaoticWarning, RDParams, laminar_speed, solve,
                      solve_kolmogorov, solve_ks, solve_lambda_omega)
from .validation import (CheckResult, oracle_comparison, oracle_convergence,
                         run_validation)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
