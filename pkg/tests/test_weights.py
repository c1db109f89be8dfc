"""Analytic weight factors: exact derivatives, scaling, structural checks."""

import numpy as np
import pytest

from weakpde.weights import (CURL_STREAMFUNCTION, TEMPORAL_POLYNOMIAL,
                             WeightSpec, envelope_derivative, envelope_poly,
                             eval_weight, sine_time_derivative,
                             validate_weight_spec, verify_weight)


# ---------------------------------------------------------------------------
# univariate factors


def test_envelope_poly_small_cases():
    assert envelope_poly(1).coef == (-1.0, 0.0, 1.0)
    # (s^2-1)^2 = 1 - 2 s^2 + s^4
    assert envelope_poly(2).coef == (1.0, 0.0, -2.0, 0.0, 1.0)
    s = np.linspace(-1, 1, 9)
    assert np.allclose(envelope_poly(3)(s), (s ** 2 - 1) ** 3,
                       rtol=0, atol=1e-14)


def test_envelope_derivative_values():
    # 4th derivative of (s^2-1)^4 at 0 is 4! * 6 = 144
    assert envelope_derivative(4, 4)(0.0) == 144.0
    assert envelope_derivative(4, 0)(0.0) == 1.0
    d1 = envelope_derivative(2, 1)
    s = 0.37
    assert d1(s) == pytest.approx(4 * s ** 3 - 4 * s, abs=1e-15)


def test_envelope_derivative_vanishes_past_degree():
    # degree of (s^2-1)^p is 2p, so order 2p+1 differentiates to zero
    d = envelope_derivative(3, 7)
    assert not np.any(d(np.linspace(-1, 1, 11)))


def test_sine_time_derivative_cycle():
    t = np.linspace(-1, 1, 7)
    assert np.allclose(sine_time_derivative(0, t), np.sin(np.pi * t),
                       rtol=0, atol=1e-15)
    assert np.allclose(sine_time_derivative(1, t),
                       np.pi * np.cos(np.pi * t), rtol=0, atol=1e-13)
    assert np.allclose(sine_time_derivative(4, t),
                       np.pi ** 4 * np.sin(np.pi * t), rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# pointwise evaluation


def test_scalar_weight_point_values():
    spec = WeightSpec.scalar(4, 1, 3)
    # at the box center: (-1)^4 * (-1)^3
    assert eval_weight(spec, (0, 0), (0.0, 0.0), (2.0, 1.0)) == -1.0
    # 4th x-derivative at the center picks up the halfwidth scaling 2^-4
    assert eval_weight(spec, (4, 0), (0.0, 0.0), (2.0, 1.0)) == -9.0


def test_halfwidth_scaling_is_exact_chain_rule():
    spec = WeightSpec.scalar(3, 1, 2)
    pts = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    narrow = eval_weight(spec, (2, 0), pts, (1.0, 1.0))
    wide = eval_weight(spec, (2, 0), pts, (2.0, 1.0))
    # halving only rescales by H^-order; powers of two keep it bitwise
    assert np.array_equal(wide, narrow * 0.25)


def test_curl_components_come_from_the_streamfunction():
    spec = WeightSpec.curl(3)
    pts = np.random.default_rng(1).uniform(-1, 1, size=(40, 3))
    hw = (1.5, 2.0, 3.0)
    w = eval_weight(spec, (0, 0, 0), pts, hw, component="w")
    assert w.shape == (2, 40)
    assert np.array_equal(w[0], eval_weight(spec, (0, 1, 0), pts, hw,
                                            component="psi"))
    assert np.array_equal(w[1], -eval_weight(spec, (1, 0, 0), pts, hw,
                                             component="psi"))


def test_curl_divergence_vanishes():
    spec = WeightSpec.curl(3)
    pts = np.random.default_rng(2).uniform(-0.98, 0.98, size=(200, 3))
    hw = (1.0, 1.3, 2.0)
    exact = (eval_weight(spec, (1, 0, 0), pts, hw, component="w")[0]
             + eval_weight(spec, (0, 1, 0), pts, hw, component="w")[1])
    assert not exact.any()
    # independent finite-difference check that w really is a rotated gradient
    h = 1e-5
    div_fd = np.zeros(len(pts))
    for axis, comp in ((0, 0), (1, 1)):
        for sign in (1.0, -1.0):
            shifted = pts.copy()
            shifted[:, axis] += sign * h
            wv = eval_weight(spec, (0, 0, 0), shifted, hw, component="w")
            div_fd += sign * wv[comp] / (2 * h * hw[axis])
    assert np.abs(div_fd).max() <= 1e-6


def test_eval_weight_argument_errors():
    spec = WeightSpec.scalar(2, 1, 1)
    with pytest.raises(ValueError, match="deriv needs 2 orders"):
        eval_weight(spec, (0, 0, 0), (0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError, match="points need 2 coordinates"):
        eval_weight(spec, (0, 0), (0.0, 0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError, match="outside the normalized box"):
        eval_weight(spec, (0, 0), (1.5, 0.0), (1.0, 1.0))


# ---------------------------------------------------------------------------
# spec validation


def test_factories_and_validation_errors():
    assert WeightSpec.scalar(4, 2, 3).p == (4, 4)
    assert WeightSpec.curl(5).p == (5, 5)
    with pytest.raises(ValueError, match="unknown weight kind"):
        validate_weight_spec(WeightSpec("hat", (2,), 1, "polynomial"))
    with pytest.raises(ValueError, match="exponents must be >= 1"):
        WeightSpec.scalar(0, 1, 1)
    with pytest.raises(ValueError, match="requires exactly 2 space axes"):
        validate_weight_spec(WeightSpec(CURL_STREAMFUNCTION, (3,), 0, "sine"))
    with pytest.raises(ValueError, match="curl weight requires p >= 3"):
        WeightSpec.curl(2)
    with pytest.raises(ValueError, match="requires the sine temporal factor"):
        validate_weight_spec(
            WeightSpec(CURL_STREAMFUNCTION, (3, 3), 2, TEMPORAL_POLYNOMIAL))
    with pytest.raises(ValueError, match="temporal exponent q >= 1"):
        WeightSpec.scalar(2, 1, 0)
    with pytest.raises(ValueError, match="cannot absorb a derivative"):
        validate_weight_spec(WeightSpec.scalar(2, 1, 1),
                             required_space_orders=(3,))
    with pytest.raises(ValueError, match="envelope exponent p >= 4"):
        validate_weight_spec(WeightSpec.scalar(2, 1, 1), min_p=4)
    with pytest.raises(ValueError, match="temporal exponent q >= 2"):
        validate_weight_spec(WeightSpec.scalar(4, 1, 1), min_q=2)


# ---------------------------------------------------------------------------
# structural verification battery


def test_verify_weight_passes_production_specs():
    for spec, orders in ((WeightSpec.scalar(4, 1, 3), (4,)),
                         (WeightSpec.scalar(2, 2, 1), (2, 2)),
                         (WeightSpec.curl(3), (3, 3))):
        report = verify_weight(spec, orders)
        assert report.passed, report.failing()
        assert max(c.max_abs for c in report.checks) <= 1e-12


def test_verify_weight_flags_insufficient_envelope():
    report = verify_weight(WeightSpec.scalar(2, 1, 1), (4,))
    assert not report.passed
    (check,) = report.failing()
    assert check.name == "boundary-vanishing"
    assert "insufficient envelope exponent on axis 0" in check.detail
    assert check.max_abs == np.inf


def test_verify_weight_flags_nonzero_time_mean():
    # bypass the factories to build a curl weight with an even time factor
    broken = WeightSpec(CURL_STREAMFUNCTION, (3, 3), 2, TEMPORAL_POLYNOMIAL)
    report = verify_weight(broken, (3, 3))
    names = {c.name for c in report.failing()}
    assert "zero-time-mean" in names
    assert "divergence-free" not in names
