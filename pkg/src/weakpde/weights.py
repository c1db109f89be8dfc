"""Compactly supported test functions with exact analytic derivatives.

Two families are provided, both separable over normalized box coordinates in
[-1, 1] per axis:

* scalar envelope: prod_i (s_i^2 - 1)^p_i times a temporal factor, either
  (tbar^2 - 1)^q or sin(pi * tbar);
* curl of a streamfunction: psi = sin(pi * tbar) * prod_i (s_i^2 - 1)^p, with
  the vector w = (d psi / dy, -d psi / dx).  This construction makes w
  divergence-free with zero time mean, which removes any gradient field and
  any steady source from the weak-form system identically.

All differentiation is symbolic on the polynomial or sine factors; nothing on
the test-function side is ever approximated by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

SCALAR_ENVELOPE = "scalar-envelope"
CURL_STREAMFUNCTION = "curl-streamfunction"
TEMPORAL_POLYNOMIAL = "polynomial"
TEMPORAL_SINE = "sine"


@dataclass(frozen=True)
class Poly1D:
    """Univariate polynomial in a normalized coordinate, ascending coefficients."""

    coef: tuple

    def deriv(self, order=1):
        c = np.asarray(self.coef, dtype=float)
        for _ in range(order):
            c = c[1:] * np.arange(1, c.size) if c.size > 1 else np.zeros(1)
        return Poly1D(tuple(c))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for a in self.coef[::-1]:
            out = out * s + a
        return out

    @property
    def degree(self):
        return len(self.coef) - 1


def envelope_poly(p):
    """(s^2 - 1)^p expanded; coefficients are exact integers."""
    if p < 1:
        raise ValueError("envelope exponent must be >= 1")
    c = np.zeros(2 * p + 1)
    for i in range(p + 1):
        c[2 * i] = comb(p, i) * (-1) ** (p - i)
    return Poly1D(tuple(c))


def envelope_derivative(p, order):
    """Exact order-th derivative of (s^2 - 1)^p; zero polynomial past degree."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > 2 * p:
        return Poly1D((0.0,))
    return envelope_poly(p).deriv(order)


def sine_time_derivative(order, tbar):
    """d^order/dtbar^order of sin(pi * tbar)."""
    return np.pi ** order * np.sin(np.pi * np.asarray(tbar, dtype=float) + order * np.pi / 2)


@dataclass(frozen=True)
class WeightSpec:
    """Test-function family, envelope exponents, and temporal factor.

    kind is SCALAR_ENVELOPE or CURL_STREAMFUNCTION; p holds one exponent per
    space axis; q is the temporal exponent for the polynomial factor (unused
    by the curl kind, whose temporal factor is always the sine).
    """

    kind: str
    p: tuple
    q: int | None = None
    temporal_factor: str = TEMPORAL_POLYNOMIAL

    @property
    def ndim_space(self):
        return len(self.p)

    @staticmethod
    def scalar(p, ndim_space, q=1, temporal_factor=TEMPORAL_POLYNOMIAL):
        px = (int(p),) * ndim_space if np.isscalar(p) else tuple(int(v) for v in p)
        spec = WeightSpec(SCALAR_ENVELOPE, px, int(q), temporal_factor)
        validate_weight_spec(spec)
        return spec

    @staticmethod
    def curl(p=3):
        spec = WeightSpec(CURL_STREAMFUNCTION, (int(p), int(p)), None, TEMPORAL_SINE)
        validate_weight_spec(spec)
        return spec


def validate_weight_spec(spec, required_space_orders=None, min_p=None, min_q=None):
    """Check structural invariants; raise ValueError on violation.

    Factories call this at construction; system builders call it again with
    the derivative orders their term set will transfer onto the weight.
    """
    if spec.kind not in (SCALAR_ENVELOPE, CURL_STREAMFUNCTION):
        raise ValueError(f"unknown weight kind {spec.kind!r}")
    if any(p < 1 for p in spec.p):
        raise ValueError("envelope exponents must be >= 1")
    if spec.kind == CURL_STREAMFUNCTION:
        if len(spec.p) != 2:
            raise ValueError("curl weight requires exactly 2 space axes")
        if any(p < 3 for p in spec.p):
            raise ValueError("curl weight requires p >= 3")
        if spec.temporal_factor != TEMPORAL_SINE:
            raise ValueError("curl weight requires the sine temporal factor")
    else:
        if spec.temporal_factor == TEMPORAL_POLYNOMIAL and (spec.q is None or spec.q < 1):
            raise ValueError("scalar weight requires temporal exponent q >= 1")
    if required_space_orders is not None:
        for i, order in enumerate(required_space_orders):
            if spec.p[i % len(spec.p)] < order:
                raise ValueError(
                    f"envelope exponent p={spec.p[i % len(spec.p)]} cannot absorb a "
                    f"derivative of order {order}: boundary terms would survive")
    if min_p is not None and any(p < min_p for p in spec.p):
        raise ValueError(f"system requires envelope exponent p >= {min_p}")
    if min_q is not None and spec.temporal_factor == TEMPORAL_POLYNOMIAL and spec.q < min_q:
        raise ValueError(f"system requires temporal exponent q >= {min_q}")


def _axis_factor(spec, axis, order, s):
    """Derivative of the axis factor at normalized coordinates, unscaled by H."""
    if axis < spec.ndim_space:
        return envelope_derivative(spec.p[axis], order)(s)
    if spec.temporal_factor == TEMPORAL_SINE:
        return sine_time_derivative(order, s)
    return envelope_derivative(spec.q, order)(s)


def eval_weight(spec, deriv, point, halfwidths, component="auto"):
    """Evaluate an analytic derivative of the weight at normalized points.

    deriv is a multi-index of derivative orders per axis (space axes then
    time); point holds normalized coordinates in [-1, 1] with the same axis
    order, either a single tuple or an array of shape (npts, naxes).
    halfwidths convert to physical derivatives: each order-m derivative along
    an axis of halfwidth H carries a factor H^-m.

    For the scalar kind the result is the scalar weight derivative.  For the
    curl kind, component "psi" returns the requested streamfunction
    derivative, while "auto"/"w" returns the 2-vector derivative of
    w = (d psi/dy, -d psi/dx), stacked along the first axis.
    """
    naxes = spec.ndim_space + 1
    deriv = tuple(int(m) for m in deriv)
    if len(deriv) != naxes:
        raise ValueError(f"deriv needs {naxes} orders")
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    if pts.shape[-1] != naxes:
        raise ValueError(f"points need {naxes} coordinates")
    if np.any(np.abs(pts) > 1.0 + 1e-12):
        raise ValueError("point outside the normalized box [-1, 1]")
    halfwidths = tuple(float(h) for h in halfwidths)

    if spec.kind == CURL_STREAMFUNCTION and component in ("auto", "w"):
        ex = tuple(m + (1 if a == 0 else 0) for a, m in enumerate(deriv))
        ey = tuple(m + (1 if a == 1 else 0) for a, m in enumerate(deriv))
        wx = eval_weight(spec, ey, point, halfwidths, component="psi")
        wy = -eval_weight(spec, ex, point, halfwidths, component="psi")
        return np.stack([wx, wy])

    raw = np.ones(pts.shape[0])
    for axis in range(naxes):
        raw = raw * _axis_factor(spec, axis, deriv[axis], pts[:, axis])
    scale = 1.0
    for h, m in zip(halfwidths, deriv):
        scale *= h ** (-m)
    out = raw * scale
    return out if np.asarray(point).ndim > 1 else float(out[0])


@dataclass(frozen=True)
class WeightCheck:
    name: str
    max_abs: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class WeightReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failing(self):
        return [c for c in self.checks if not c.passed]


def verify_weight(spec, required_space_orders, n_points=1000, seed=0, tol=1e-12):
    """Numerically confirm the structural conditions on a weight.

    Checks, on a random sample of points:
    (a) the weight and its spatial derivatives up to (required order - 1)
        vanish on the box boundary;
    (b) curl kind only: the planar divergence of w vanishes at interior
        points;
    (c) curl kind only: the trapezoidal time integral of both components of w
        over tbar in [-1, 1] vanishes.

    Returns a report listing each check; failures are reported, not raised.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    naxes = spec.ndim_space + 1
    halfwidths = tuple(1.0 for _ in range(naxes))
    checks = []

    worst = 0.0
    ok = True
    detail = ""
    for axis in range(spec.ndim_space):
        req = required_space_orders[axis] if axis < len(required_space_orders) \
            else required_space_orders[-1]
        if spec.p[axis] < req:
            ok = False
            detail = (f"insufficient envelope exponent on axis {axis}: "
                      f"p={spec.p[axis]} < required order {req}")
            worst = np.inf
            continue
        for order in range(req):
            pts = rng.uniform(-1.0, 1.0, size=(n_points, naxes))
            pts[:, axis] = rng.choice([-1.0, 1.0], size=n_points)
            deriv = tuple(order if a == axis else 0 for a in range(naxes))
            comp = "psi" if spec.kind == CURL_STREAMFUNCTION else "auto"
            vals = eval_weight(spec, deriv, pts, halfwidths, component=comp)
            worst = max(worst, float(np.max(np.abs(vals))))
    ok = ok and worst <= tol
    checks.append(WeightCheck("boundary-vanishing", worst, ok, detail))

    if spec.kind == CURL_STREAMFUNCTION:
        pts = rng.uniform(-0.999, 0.999, size=(n_points, naxes))
        dwx_dx = eval_weight(spec, (1, 0, 0), pts, halfwidths, component="w")[0]
        dwy_dy = eval_weight(spec, (0, 1, 0), pts, halfwidths, component="w")[1]
        div = np.abs(dwx_dx + dwy_dy)
        checks.append(WeightCheck("divergence-free", float(div.max()),
                                  bool(div.max() <= tol)))

        tbar = np.linspace(-1.0, 1.0, 4001)
        worst_mean = 0.0
        for _ in range(8):
            xy = rng.uniform(-0.999, 0.999, size=2)
            pts = np.column_stack([np.full_like(tbar, xy[0]),
                                   np.full_like(tbar, xy[1]), tbar])
            w = eval_weight(spec, (0, 0, 0), pts, halfwidths)
            worst_mean = max(worst_mean,
                             float(np.max(np.abs(np.trapezoid(w, tbar, axis=1)))))
        checks.append(WeightCheck("zero-time-mean", worst_mean,
                                  bool(worst_mean <= tol)))

    return WeightReport(tuple(checks))
