"""Weak-form assembly: domains, quadrature, kernels, and the two assembly
strategies, cross-checked against closed-form strong integrals."""

import numpy as np
import pytest

from weakpde.gridfield import Constant, GridField, Sinusoid
from weakpde.regression import least_squares
from weakpde.weak import (IntegrationDomain, WeakAssembler, assemble_column,
                          build_system, builtin_library, builtin_reference,
                          builtin_strong_library, default_weight, quadrature,
                          sample_domains, snap_domain, snapped_domain,
                          strong_column_oracle)
from weakpde.weights import WeightSpec


def _field_from_exprs(ndim_space, shape, spacing, origin, exprs):
    axes = [origin[a] + spacing[a] * np.arange(shape[a])
            for a in range(len(shape))]
    values = np.stack([np.asarray(e.sample(axes)) for e in exprs])
    return GridField(ndim_space, shape, spacing, origin, len(exprs), values)


# ---------------------------------------------------------------------------
# integration domains


def test_domain_validation():
    dom = IntegrationDomain((1, 2), (0.5, 0.5))
    assert dom.center == (1.0, 2.0)
    with pytest.raises(ValueError, match="same arity"):
        IntegrationDomain((1.0,), (0.5, 0.5))
    with pytest.raises(ValueError, match="halfwidths must be positive"):
        IntegrationDomain((1.0, 2.0), (0.5, 0.0))


def test_sample_domains_deterministic_and_contained():
    rng = np.random.default_rng(99)
    for _ in range(60):
        naxes = int(rng.integers(1, 4))
        extent = tuple(rng.uniform(2.0, 20.0, naxes))
        halfwidths = tuple(e * rng.uniform(0.05, 0.45) for e in extent)
        origin = tuple(rng.uniform(-5.0, 5.0, naxes))
        seed = int(rng.integers(1 << 31))
        a = sample_domains(extent, halfwidths, 17, seed, origin=origin)
        b = sample_domains(extent, halfwidths, 17, seed, origin=origin)
        assert [d.center for d in a] == [d.center for d in b]
        for dom in a:
            for c, h, o, e in zip(dom.center, halfwidths, origin, extent):
                assert o + h - 1e-9 <= c <= o + e - h + 1e-9


def test_sample_domains_degenerate_axis_pins_center():
    domains = sample_domains((4.0, 6.0), (2.0, 1.0), 5, 0, origin=(1.0, 0.0))
    assert all(d.center[0] == 3.0 for d in domains)


def test_sample_domains_errors():
    with pytest.raises(ValueError, match="one halfwidth per axis"):
        sample_domains((4.0, 4.0), (1.0,), 3, 0)
    with pytest.raises(ValueError, match="domain too large"):
        sample_domains((4.0,), (2.5,), 3, 0)


# ---------------------------------------------------------------------------
# quadrature


def test_quadrature_exact_on_linear_integrands():
    x = np.linspace(0.0, 2.0, 9)
    t = np.linspace(0.0, 1.0, 5)
    X, T = np.meshgrid(x, t, indexing="ij")
    assert quadrature(np.full_like(X, 3.0), (0.25, 0.25)) \
        == pytest.approx(6.0, abs=1e-13)
    assert quadrature(2.0 * X + T, (0.25, 0.25)) \
        == pytest.approx(2 * 2.0 + 0.5 * 2.0, abs=1e-13)


def test_quadrature_is_second_order():
    exact = (1 - np.cos(1.0)) * np.sin(1.0)

    def err(n):
        x = np.linspace(0.0, 1.0, n)
        t = np.linspace(0.0, 1.0, n)
        arr = np.sin(x)[:, None] * np.cos(t)[None, :]
        d = 1.0 / (n - 1)
        return abs(quadrature(arr, (d, d)) - exact)

    assert 3.7 <= err(33) / err(65) <= 4.3


def test_quadrature_errors():
    with pytest.raises(ValueError, match="one spacing per integrand axis"):
        quadrature(np.ones((3, 3)), (0.1,))
    with pytest.raises(ValueError, match="too few nodes"):
        quadrature(np.ones((1, 3)), (0.1, 0.1))


# ---------------------------------------------------------------------------
# snapping


def test_snap_domain_rounds_to_nodes():
    field = _field_from_exprs(1, (11, 9), (0.5, 0.25), (1.0, 0.0),
                              [Constant(1.0)])
    ci, ms = snap_domain(field, IntegrationDomain((2.26, 1.1), (0.9, 0.55)))
    assert ci == (3, 4) and ms == (2, 2)
    snapped = snapped_domain(field, IntegrationDomain((2.26, 1.1), (0.9, 0.55)))
    assert snapped.center == (2.5, 1.0)
    assert snapped.halfwidth == (1.0, 0.5)


def test_snap_domain_clips_to_the_grid():
    field = _field_from_exprs(1, (11, 9), (0.5, 0.25), (0.0, 0.0),
                              [Constant(1.0)])
    ci, _ = snap_domain(field, IntegrationDomain((0.1, 1.0), (1.0, 0.5)))
    assert ci[0] == 2  # pushed inward so the box stays on the grid
    ci, _ = snap_domain(field, IntegrationDomain((4.9, 1.0), (1.0, 0.5)))
    assert ci[0] == 8


def test_snap_domain_errors():
    field = _field_from_exprs(1, (11, 9), (0.5, 0.25), (0.0, 0.0),
                              [Constant(1.0)])
    with pytest.raises(ValueError, match="too few nodes"):
        snap_domain(field, IntegrationDomain((2.0, 1.0), (0.2, 0.5)))
    with pytest.raises(ValueError, match="domain too large on axis 0"):
        snap_domain(field, IntegrationDomain((2.5, 1.0), (3.0, 0.5)))


# ---------------------------------------------------------------------------
# single columns against the strong-form oracle


KS_WEIGHT = WeightSpec.scalar(4, 1, 3)


def _ks_terms():
    target, terms, _ = builtin_library("ks")
    starget, sterms = builtin_strong_library("ks")
    return target, dict(zip((t.label for t in terms), terms)), \
        starget, dict(zip((t.label for t in sterms), sterms))


def test_second_derivative_column_matches_strong_form():
    # single long-wave mode on the production grid density
    expr = Sinusoid(1.0, (1.0 / 16.0, 0.0), 0.0)
    field = _field_from_exprs(1, (301, 56), (0.0982, 0.4), (0.0, 0.0), [expr])
    dom = IntegrationDomain((14.0, 10.4), (12.25, 10.0))
    _, terms, _, sterms = _ks_terms()
    weak = assemble_column(field, terms["u_xx"], dom, KS_WEIGHT)
    strong = strong_column_oracle(field, [expr], sterms["u_xx"], dom,
                                  KS_WEIGHT)
    assert strong != 0.0
    assert abs(weak - strong) / abs(strong) <= 1e-4


def test_fourth_derivative_column_matches_strong_form():
    # oscillatory traveling wave, wide boxes: the hardest built-in column
    expr = Sinusoid(1.0, (0.102, 0.11), 0.73)
    field = _field_from_exprs(1, (1040, 110), (0.0982, 0.4), (0.0, 0.0),
                              [expr])
    dom = IntegrationDomain((51.0, 22.0), (49.0, 20.0))
    _, terms, _, sterms = _ks_terms()
    weak = assemble_column(field, terms["u_xxxx"], dom, KS_WEIGHT)
    strong = strong_column_oracle(field, [expr], sterms["u_xxxx"], dom,
                                  KS_WEIGHT)
    assert abs(weak - strong) / abs(strong) <= 1e-4


def test_time_independent_field_has_zero_target_column():
    # the odd time kernel cancels in exact pairs on the symmetric window
    expr = Sinusoid(1.0, (0.25, 0.0), 0.3)
    field = _field_from_exprs(1, (73, 41), (0.25, 0.2), (0.0, 0.0), [expr])
    target, _, _, _ = _ks_terms()
    dom = IntegrationDomain((9.0, 4.0), (6.0, 3.0))
    assert abs(assemble_column(field, target, dom, KS_WEIGHT)) <= 1e-12


def test_constant_field_has_zero_transport_column():
    field = _field_from_exprs(1, (73, 41), (0.25, 0.2), (0.0, 0.0),
                              [Constant(0.7)])
    _, terms, _, _ = _ks_terms()
    dom = IntegrationDomain((9.0, 4.0), (6.0, 3.0))
    assert abs(assemble_column(field, terms["u*u_x"], dom, KS_WEIGHT)) <= 1e-12


def test_plane_shear_has_zero_advection_column():
    # ux = sin(k y), uy = 0 transports nothing: (u.grad)u = 0, and the only
    # surviving weak part pairs an x-independent monomial with an odd kernel
    ky = 2 * np.pi / 18.0
    exprs = [Sinusoid(1.0, (0.0, ky, 0.0), 0.0), Constant(0.0)]
    field = _field_from_exprs(2, (71, 91, 51), (0.2, 0.2, 0.23),
                              (0.0, 0.0, 0.0), exprs)
    target, terms, _ = builtin_library("kolmogorov")
    advection = dict((t.label, t) for t in terms)["advection"]
    dom = IntegrationDomain((7.0, 9.0, 5.75), (2.0, 2.0, 4.6))
    assert abs(assemble_column(field, advection, dom,
                               WeightSpec.curl(3))) <= 1e-10


def test_columns_scale_with_monomial_degree():
    rng_field = Sinusoid(0.8, (0.4, 0.9), 0.2)
    base = _field_from_exprs(1, (120, 41), (0.25, 0.2), (0.0, 0.0),
                             [rng_field])
    doubled = base.with_values(2.0 * base.values)
    target, terms, _ = builtin_library("ks")
    domains = sample_domains(base.extent, (2.5, 2.0), 7, 3)
    sys1 = build_system(base, target, terms, domains, KS_WEIGHT,
                        method="direct")
    sys2 = build_system(doubled, target, terms, domains, KS_WEIGHT,
                        method="direct")
    degrees = {"u*u_x": 2, "u_xx": 1, "u_xxxx": 1}
    assert np.array_equal(sys2.q0, 2.0 * sys1.q0)
    for j, label in enumerate(sys1.labels):
        assert np.array_equal(sys2.Q[:, j], 2.0 ** degrees[label]
                              * sys1.Q[:, j])


# ---------------------------------------------------------------------------
# assembler strategies


def _small_system(method):
    expr = Sinusoid(0.8, (0.4, 0.9), 0.2)
    field = _field_from_exprs(1, (120, 41), (0.25, 0.2), (0.0, 0.0), [expr])
    target, terms, _ = builtin_library("ks")
    domains = sample_domains(field.extent, (2.5, 2.0), 11, 5)
    return field, target, terms, domains, \
        build_system(field, target, terms, domains, KS_WEIGHT, method=method)


def test_direct_matches_reference_columns_bitwise():
    field, target, terms, domains, system = _small_system("direct")
    for k, dom in enumerate(domains):
        assert system.q0[k] == assemble_column(field, target, dom, KS_WEIGHT)
        for n, term in enumerate(terms):
            assert system.Q[k, n] == assemble_column(field, term, dom,
                                                     KS_WEIGHT)


def test_table_matches_direct():
    *_, direct = _small_system("direct")
    *_, table = _small_system("table")
    scale = np.abs(direct.Q).max()
    assert np.allclose(table.Q, direct.Q, rtol=1e-9, atol=1e-12 * scale)
    assert np.allclose(table.q0, direct.q0, rtol=1e-9,
                       atol=1e-12 * np.abs(direct.q0).max())
    assert direct.snapped_halfwidths == table.snapped_halfwidths


def test_rebuild_is_bitwise_deterministic():
    *_, sys1 = _small_system("table")
    *_, sys2 = _small_system("table")
    assert np.array_equal(sys1.Q, sys2.Q)
    assert np.array_equal(sys1.q0, sys2.q0)


def test_system_diagnostics():
    _, _, terms, domains, system = _small_system("direct")
    assert system.K == 11 and system.N == 3
    assert system.labels == ("u*u_x", "u_xx", "u_xxxx")
    assert np.allclose(system.column_norms,
                       np.linalg.norm(system.Q, axis=0), rtol=1e-15)
    assert system.snapped_halfwidths == (10 * 0.25, 10 * 0.2)
    assert len(system.domains) == len(domains)
    assert all(d.halfwidth == system.snapped_halfwidths
               for d in system.domains)


def test_assembler_rejects_mismatched_domains():
    field, target, terms, _, _ = _small_system("direct")
    asm = WeakAssembler(field, target, terms, KS_WEIGHT, (2.5, 2.0))
    with pytest.raises(ValueError, match="halfwidths differ"):
        asm.column_direct(terms[0], IntegrationDomain((10.0, 4.0), (5.0, 2.0)))
    with pytest.raises(ValueError, match="need 2 halfwidths"):
        WeakAssembler(field, target, terms, KS_WEIGHT, (2.5,))
    with pytest.raises(ValueError, match="unknown assembly method"):
        WeakAssembler(field, target, terms, KS_WEIGHT, (2.5, 2.0),
                      method="magic")


def test_build_system_domain_errors():
    field, target, terms, _, _ = _small_system("direct")
    with pytest.raises(ValueError, match="at least one domain"):
        build_system(field, target, terms, [], KS_WEIGHT)
    mixed = [IntegrationDomain((10.0, 4.0), (2.5, 2.0)),
             IntegrationDomain((10.0, 4.0), (2.0, 2.0))]
    with pytest.raises(ValueError, match="share halfwidths"):
        build_system(field, target, terms, mixed, KS_WEIGHT)


def test_insufficient_weight_is_rejected():
    field, target, terms, domains, _ = _small_system("direct")
    with pytest.raises(ValueError, match="cannot absorb a derivative"):
        build_system(field, target, terms, domains, WeightSpec.scalar(2, 1, 1))


def test_underdetermined_system_assembles_but_does_not_solve():
    field, target, terms, _, _ = _small_system("direct")
    domains = sample_domains(field.extent, (2.5, 2.0), 2, 8)
    system = build_system(field, target, terms, domains, KS_WEIGHT)
    assert system.K == 2 and system.N == 3  # inspectable partial system
    with pytest.raises(ValueError, match="underdetermined"):
        least_squares(system.Q, system.q0)


# ---------------------------------------------------------------------------
# built-in libraries


def test_builtin_labels_and_references():
    target, terms, req = builtin_library("ks")
    assert target.label == "u_t" and target.side == "target"
    assert tuple(t.label for t in terms) == ("u*u_x", "u_xx", "u_xxxx")
    assert req.kind == "scalar-envelope" and req.min_p == 4
    coeffs, active = builtin_reference("ks")
    assert coeffs.tolist() == [-1.0, -1.0, -1.0] and active.all()

    target, terms, req = builtin_library("kolmogorov")
    assert tuple(t.label for t in terms) == ("advection", "lap_vort", "vort")
    assert req.kind == "curl-streamfunction"
    coeffs, active = builtin_reference("kolmogorov")
    assert coeffs.tolist() == [-0.826, 0.0487, -0.157] and active.all()
    coeffs, _ = builtin_reference("kolmogorov", c2=0.1)
    assert coeffs[1] == 0.1

    for system, expect in (
            ("lambda_omega_u", [0.1, 1, 0, 0, 0, 0, -1, 1, -1, 1]),
            ("lambda_omega_v", [0.1, 0, 1, 0, 0, 0, -1, -1, -1, -1])):
        target, terms, _ = builtin_library(system)
        assert tuple(t.label for t in terms) == (
            f"lap_{system[-1]}", "u", "v", "u^2", "u*v", "v^2",
            "u^3", "u^2*v", "u*v^2", "v^3")
        coeffs, active = builtin_reference(system)
        assert coeffs.tolist() == expect
        assert np.array_equal(active, coeffs != 0)

    with pytest.raises(ValueError, match="unknown system"):
        builtin_library("heat")
    with pytest.raises(ValueError, match="unknown system"):
        builtin_reference("heat")


def test_strong_and_weak_libraries_share_labels():
    for system in ("ks", "kolmogorov", "lambda_omega_u", "lambda_omega_v"):
        target, terms, _ = builtin_library(system)
        starget, sterms = builtin_strong_library(system)
        assert starget.label == target.label
        assert [t.label for t in sterms] == [t.label for t in terms]


def test_default_weight_per_system():
    assert default_weight("ks") == WeightSpec.scalar(4, 1, 3)
    assert default_weight("lambda_omega_u") == WeightSpec.scalar(2, 2, 1)
    assert default_weight("kolmogorov") == WeightSpec.curl(3)
    assert default_weight("ks", p=6, q=5) == WeightSpec.scalar(6, 1, 5)
    assert default_weight("kolmogorov", p=5) == WeightSpec.curl(5)
