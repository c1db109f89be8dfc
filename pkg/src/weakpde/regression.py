"""Sparse solution of the weak-form systems and ensemble aggregation.

The solver is deliberately plain: minimum-norm least squares plus iterated
hard thresholding on the per-term residual contribution |c_n|*||q_n||
measured against a fixed fraction of ||q0||.  The pruning threshold is set
once from the initial right-hand side and never rescaled, so the active set
shrinks monotonically and the iteration reaches a fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .weak import WeakAssembler, builtin_library, builtin_reference, \
    default_weight, sample_domains

DEFAULT_GAMMA = 0.05
DEFAULT_K = 100
DEFAULT_M = 30

# singular values below this fraction of the largest are treated as zero
RANK_RCOND = 1e-10


@dataclass(frozen=True)
class RegressionResult:
    """Final fit: full-length coefficient vector with exact zeros on pruned
    terms, the active mask, the residual norm, and the fit-iteration count."""

    coefficients: np.ndarray
    active: np.ndarray
    residual_norm: float
    iterations: int


def _check_system(Q, q0):
    Q = np.asarray(Q, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    if Q.ndim != 2:
        raise ValueError("Q must be 2-d")
    if q0.shape != (Q.shape[0],):
        raise ValueError("q0 length must match the row count of Q")
    if Q.shape[0] < Q.shape[1]:
        raise ValueError(f"underdetermined system: {Q.shape[0]} rows for "
                         f"{Q.shape[1]} terms (need K >= N)")
    if not (np.isfinite(Q).all() and np.isfinite(q0).all()):
        raise ValueError("non-finite entries in the linear system")
    return Q, q0


def least_squares(Q, q0):
    """Minimum-residual solution; minimum-norm among minimizers when Q is
    rank-deficient.  Never forms the normal equations."""
    Q, q0 = _check_system(Q, q0)
    sol, _, _, _ = np.linalg.lstsq(Q, q0, rcond=RANK_RCOND)
    return sol


def sparsify(Q, q0, gamma=DEFAULT_GAMMA):
    """Iterated thresholded least squares.

    Each round refits on the active columns, then deactivates every term whose
    contribution |c_n|*||q_n|| falls below gamma*||q0||.  Stops when no term
    is deactivated; pruning everything is a valid (empty) model.
    """
    Q, q0 = _check_system(Q, q0)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    N = Q.shape[1]
    threshold = gamma * np.linalg.norm(q0)
    col_norms = np.linalg.norm(Q, axis=0)
    active = np.ones(N, dtype=bool)
    coefficients = np.zeros(N)
    iterations = 0
    while active.any():
        sub = least_squares(Q[:, active], q0)
        iterations += 1
        coefficients = np.zeros(N)
        coefficients[active] = sub
        weak_terms = active & (np.abs(coefficients) * col_norms < threshold)
        if not weak_terms.any():
            break
        active = active & ~weak_terms
        coefficients[weak_terms] = 0.0
    if not active.any():
        coefficients = np.zeros(N)
        iterations = max(iterations, 1)
    residual = float(np.linalg.norm(q0 - Q @ coefficients))
    return RegressionResult(coefficients, active, residual, iterations)


def relative_errors(estimated, reference):
    """Per-term errors against a reference coefficient vector.

    Returns (delta, zero_mags): delta holds |est - ref| / |ref| where the
    reference is nonzero and NaN elsewhere; zero_mags holds |est| where the
    reference is zero (spurious-term magnitude) and NaN elsewhere.
    """
    est = np.asarray(estimated, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.shape != ref.shape:
        raise ValueError("estimated and reference must have the same length")
    nz = ref != 0
    delta = np.full(est.shape, np.nan)
    delta[nz] = np.abs((est[nz] - ref[nz]) / ref[nz])
    zero_mags = np.full(est.shape, np.nan)
    zero_mags[~nz] = np.abs(est[~nz])
    return delta, zero_mags


@dataclass(frozen=True)
class MemberOutcome:
    """One ensemble member: its fit plus the structure comparison."""

    result: RegressionResult
    matched: bool | None
    spurious: tuple
    missing: tuple


@dataclass(frozen=True)
class EnsembleReport:
    """Aggregate over M members sharing one field and term library.

    Coefficient and error statistics run over the structurally successful
    members (all members when no reference is given); entries are NaN when no
    member qualifies or the reference coefficient is zero.
    """

    labels: tuple
    members: tuple
    reference: np.ndarray | None
    success_rate: float | None
    coeff_mean: np.ndarray
    coeff_min: np.ndarray
    coeff_max: np.ndarray
    delta_mean: np.ndarray
    delta_min: np.ndarray
    delta_max: np.ndarray
    snapped_halfwidths: tuple
    column_norms: np.ndarray  # per-term, averaged over members

    @property
    def member_count(self):
        return len(self.members)

    def max_delta(self):
        """Largest mean relative error over reference-active terms."""
        finite = self.delta_mean[np.isfinite(self.delta_mean)]
        return float(finite.max()) if finite.size else float("nan")


def member_seed(master_seed, m):
    """Deterministic per-member seed stream."""
    return np.random.SeedSequence([int(master_seed), int(m)])


def _aggregate(labels, members, reference, snapped, column_norms):
    coeffs = np.array([o.result.coefficients for o in members])
    if reference is not None:
        matches = np.array([bool(o.matched) for o in members])
        success_rate = float(matches.mean())
        pool = coeffs[matches] if matches.any() else np.empty((0, len(labels)))
    else:
        success_rate = None
        pool = coeffs
    N = len(labels)
    nanvec = np.full(N, np.nan)
    if pool.shape[0]:
        cmean, cmin, cmax = pool.mean(axis=0), pool.min(axis=0), pool.max(axis=0)
    else:
        cmean = cmin = cmax = nanvec
    if reference is not None and pool.shape[0]:
        deltas = np.array([relative_errors(c, reference)[0] for c in pool])
        with np.errstate(invalid="ignore"):
            dmean = deltas.mean(axis=0)
            dmin = deltas.min(axis=0)
            dmax = deltas.max(axis=0)
    else:
        dmean = dmin = dmax = nanvec
    return EnsembleReport(tuple(labels), tuple(members), reference,
                         success_rate, cmean, cmin, cmax, dmean, dmin, dmax,
                         snapped, column_norms)


def compare_structure(result, reference_active, labels):
    """(matched, spurious labels, missing labels) vs a reference active set."""
    ref = np.asarray(reference_active, dtype=bool)
    spurious = tuple(lab for lab, a, r in zip(labels, result.active, ref)
                     if a and not r)
    missing = tuple(lab for lab, a, r in zip(labels, result.active, ref)
                    if r and not a)
    return (not spurious and not missing), spurious, missing


DEFAULT_HALFWIDTHS = {
    "ks": (12.25, 10.0),
    "kolmogorov": (5.6, 7.2, 17.25),
    "lambda_omega_u": (1.0, 1.0, 1.25),
    "lambda_omega_v": (1.0, 1.0, 1.25),
}


def ensemble_discover(field, system, K=DEFAULT_K, M=DEFAULT_M,
                      gamma=DEFAULT_GAMMA, seed=0, halfwidths=None,
                      weight=None, reference="builtin", method="auto"):
    """M independent discovery runs on one field, each with K fresh domains.

    Member m draws its domain centers from a child stream of (seed, m), so
    reports are reproducible and members could run in any order.  reference
    may be 'builtin' (coefficients of the named system), an explicit vector,
    or None to skip structure scoring.
    """
    target, terms, _ = builtin_library(system)
    if weight is None:
        weight = default_weight(system)
    if halfwidths is None:
        halfwidths = DEFAULT_HALFWIDTHS[system]
    if isinstance(reference, str):
        if reference != "builtin":
            raise ValueError("reference must be 'builtin', a vector, or None")
        reference, _ = builtin_reference(system)
    elif reference is not None:
        reference = np.asarray(reference, dtype=float)
    asm = WeakAssembler(field, target, terms, weight, halfwidths, method=method)
    labels = tuple(t.label for t in terms)
    members = []
    norm_sum = np.zeros(len(labels))
    for m in range(M):
        try:
            rng = np.random.Generator(np.random.PCG64(member_seed(seed, m)))
            domains = sample_domains(field.extent, halfwidths, K, rng,
                                     origin=field.origin)
            system_m = asm.system_for(domains)
            result = sparsify(system_m.Q, system_m.q0, gamma)
        except Exception as exc:
            raise RuntimeError(f"ensemble member {m} failed: {exc}") from exc
        norm_sum += system_m.column_norms
        if reference is not None:
            matched, spurious, missing = compare_structure(
                result, reference != 0, labels)
        else:
            matched, spurious, missing = None, (), ()
        members.append(MemberOutcome(result, matched, spurious, missing))
    return _aggregate(labels, members, reference, asm.snapped_halfwidths,
                      norm_sum / max(M, 1))
