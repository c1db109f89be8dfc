"""Weak-form linear systems: random integration boxes, trapezoidal quadrature
of integrated-by-parts library terms, and assembly of q0 = Q c.

Each library term is stored already integrated by parts: a signed sum of
(field-monomial x weight-derivative) products.  Evaluating a column therefore
touches only raw field values and exact weight derivatives; the data itself is
never differentiated.

Two assembly strategies produce identical systems up to rounding:

* direct: per-domain windowed separable contractions (best when domains cover
  a small fraction of the data);
* table: one FFT cross-correlation of each (monomial, kernel) pair over the
  whole grid, after which every domain is a single lookup (best when many
  domains overlap heavily, e.g. ensembles with large boxes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .gridfield import GridField
from .weights import (CURL_STREAMFUNCTION, SCALAR_ENVELOPE, TEMPORAL_SINE,
                      WeightSpec, envelope_derivative, sine_time_derivative,
                      validate_weight_spec)

SYSTEMS = ("ks", "kolmogorov", "lambda_omega_u", "lambda_omega_v")


@dataclass(frozen=True)
class IntegrationDomain:
    """Axis-aligned space-time box: per-axis center and halfwidth, physical units."""

    center: tuple
    halfwidth: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "halfwidth", tuple(float(h) for h in self.halfwidth))
        if len(self.center) != len(self.halfwidth):
            raise ValueError("center and halfwidth must have the same arity")
        if any(h <= 0 for h in self.halfwidth):
            raise ValueError("halfwidths must be positive")


@dataclass(frozen=True)
class TermPart:
    """One signed product inside a term.

    monomial gives the power of each field component; wderiv is the derivative
    multi-index applied to the weight (or to the streamfunction when
    weight_component is 'psi').
    """

    prefactor: float
    monomial: tuple
    wderiv: tuple
    weight_component: str = "scalar"


@dataclass(frozen=True)
class TermSpec:
    """A library or target term in integrated-by-parts form."""

    label: str
    parts: tuple
    side: str = "library"

    def max_space_orders(self, ndim_space):
        orders = [0] * ndim_space
        for part in self.parts:
            for axis in range(ndim_space):
                orders[axis] = max(orders[axis], part.wderiv[axis])
        return tuple(orders)


@dataclass(frozen=True)
class WeightRequirement:
    kind: str
    min_p: int
    min_q: int | None


@dataclass(frozen=True)
class LinearSystem:
    """K x N least-squares system with diagnostics.

    Solving requires K >= N; that is enforced at the regression stage so that
    partial systems remain inspectable.
    """

    Q: np.ndarray
    q0: np.ndarray
    labels: tuple
    column_norms: np.ndarray
    snapped_halfwidths: tuple
    domains: tuple

    @property
    def K(self):
        return self.Q.shape[0]

    @property
    def N(self):
        return self.Q.shape[1]


def _part(prefactor, monomial, wderiv, comp="scalar"):
    return TermPart(float(prefactor), tuple(monomial), tuple(wderiv), comp)


def builtin_library(system):
    """Fixed term sets for the built-in systems.

    Returns (target term, library terms, weight requirement).  Gradient and
    steady-source contributions have no term here at all for the kolmogorov
    system: the divergence-free, zero-time-mean weight integrates them to
    zero identically, so they never need representing.
    """
    if system == "ks":
        target = TermSpec("u_t", (_part(-1, (1,), (0, 1)),), side="target")
        terms = (
            TermSpec("u*u_x", (_part(-0.5, (2,), (1, 0)),)),
            TermSpec("u_xx", (_part(1, (1,), (2, 0)),)),
            TermSpec("u_xxxx", (_part(1, (1,), (4, 0)),)),
        )
        return target, terms, WeightRequirement(SCALAR_ENVELOPE, 4, 1)
    if system == "kolmogorov":
        target = TermSpec("vort_t", (
            _part(-1, (1, 0), (0, 1, 1), "psi"),
            _part(+1, (0, 1), (1, 0, 1), "psi"),
        ), side="target")
        terms = (
            TermSpec("advection", (
                _part(-1, (1, 1), (0, 2, 0), "psi"),
                _part(+1, (1, 1), (2, 0, 0), "psi"),
                _part(-1, (2, 0), (1, 1, 0), "psi"),
                _part(+1, (0, 2), (1, 1, 0), "psi"),
            )),
            TermSpec("lap_vort", (
                _part(+1, (1, 0), (2, 1, 0), "psi"),
                _part(+1, (1, 0), (0, 3, 0), "psi"),
                _part(-1, (0, 1), (3, 0, 0), "psi"),
                _part(-1, (0, 1), (1, 2, 0), "psi"),
            )),
            TermSpec("vort", (
                _part(+1, (1, 0), (0, 1, 0), "psi"),
                _part(-1, (0, 1), (1, 0, 0), "psi"),
            )),
        )
        return target, terms, WeightRequirement(CURL_STREAMFUNCTION, 3, None)
    if system in ("lambda_omega_u", "lambda_omega_v"):
        tcomp = 0 if system.endswith("u") else 1
        tname = "u" if tcomp == 0 else "v"
        target = TermSpec(f"{tname}_t",
                          (_part(-1, (1, 0) if tcomp == 0 else (0, 1), (0, 0, 1)),),
                          side="target")
        lap = TermSpec(f"lap_{tname}", (
            _part(1, (1, 0) if tcomp == 0 else (0, 1), (2, 0, 0)),
            _part(1, (1, 0) if tcomp == 0 else (0, 1), (0, 2, 0)),
        ))
        monos = []
        for total in range(1, 4):
            for a in range(total, -1, -1):
                b = total - a
                label = "*".join((["u"] if a == 1 else [f"u^{a}"] if a else []) +
                                 (["v"] if b == 1 else [f"v^{b}"] if b else []))
                monos.append(TermSpec(label, (_part(1, (a, b), (0, 0, 0)),)))
        return target, (lap, *monos), WeightRequirement(SCALAR_ENVELOPE, 2, 1)
    raise ValueError(f"unknown system {system!r}")


def builtin_reference(system, **params):
    """True coefficients of the generating model, ordered like builtin_library.

    Keyword overrides mirror the solver parameters (ks has none; kolmogorov
    takes c1, c2, c3; lambda_omega takes D and beta).
    """
    if system == "ks":
        coeffs = np.array([-1.0, -1.0, -1.0])
    elif system == "kolmogorov":
        coeffs = np.array([params.get("c1", -0.826), params.get("c2", 0.0487),
                           params.get("c3", -0.157)])
    elif system in ("lambda_omega_u", "lambda_omega_v"):
        D = params.get("D", 0.1)
        beta = params.get("beta", 1.0)
        # order: lap, u, v, u^2, u*v, v^2, u^3, u^2*v, u*v^2, v^3
        if system.endswith("u"):
            coeffs = np.array([D, 1, 0, 0, 0, 0, -1, beta, -1, beta])
        else:
            coeffs = np.array([D, 0, 1, 0, 0, 0, -beta, -1, -beta, -1])
    else:
        raise ValueError(f"unknown system {system!r}")
    return coeffs, coeffs != 0


def default_weight(system, p=None, q=None):
    """Weight of the kind the system requires, with overridable exponents."""
    _, _, req = builtin_library(system)
    if req.kind == CURL_STREAMFUNCTION:
        return WeightSpec.curl(p if p is not None else req.min_p)
    ndim = 1 if system == "ks" else 2
    defaults = {"ks": (4, 3), "lambda_omega_u": (2, 1), "lambda_omega_v": (2, 1)}
    dp, dq = defaults[system]
    return WeightSpec.scalar(p if p is not None else dp, ndim,
                             q if q is not None else dq)


def sample_domains(extent, halfwidths, K, seed, origin=None):
    """K box centers drawn uniformly from the admissible interval per axis.

    Admissible means the whole box lies inside [origin, origin + extent];
    boxes never wrap around periodic boundaries.  Deterministic per seed.
    """
    extent = tuple(float(e) for e in extent)
    halfwidths = tuple(float(h) for h in halfwidths)
    if origin is None:
        origin = tuple(0.0 for _ in extent)
    origin = tuple(float(o) for o in origin)
    if len(halfwidths) != len(extent):
        raise ValueError("need one halfwidth per axis")
    for h, e in zip(halfwidths, extent):
        if 2 * h > e * (1 + 1e-12):
            raise ValueError(f"domain too large: 2H = {2 * h} exceeds extent {e}")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.Generator(np.random.PCG64(seed))
    lows = [o + h for o, h in zip(origin, halfwidths)]
    highs = [o + e - h for o, e, h in zip(origin, extent, halfwidths)]
    centers = np.column_stack([
        rng.uniform(lo, hi, size=K) if hi > lo else np.full(K, lo)
        for lo, hi in zip(lows, highs)])
    return [IntegrationDomain(tuple(c), halfwidths) for c in centers]


def quadrature(integrand, spacing):
    """Composite trapezoidal rule over an axis-aligned node box.

    Boundary nodes receive the standard half weights per axis, so corners and
    edges get quarter/eighth factors through the product.
    """
    arr = np.asarray(integrand, dtype=float)
    spacing = tuple(float(d) for d in spacing)
    if arr.ndim != len(spacing):
        raise ValueError("need one spacing per integrand axis")
    if any(n < 2 for n in arr.shape):
        raise ValueError("too few nodes: need at least 2 per axis")
    for axis in range(arr.ndim - 1, -1, -1):
        w = np.full(arr.shape[axis], spacing[axis])
        w[0] *= 0.5
        w[-1] *= 0.5
        arr = np.tensordot(arr, w, axes=([axis], [0]))
    return float(arr)


def _trap_vector(n, spacing):
    w = np.full(n, spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def snap_domain(field, domain):
    """Snap box edges to grid nodes: nearest-node center, halfwidth to a
    whole number of grid steps.  Returns (center indices, steps per axis)."""
    centers, ms = [], []
    for axis in range(field.ndim_space + 1):
        d = field.spacing[axis]
        n = field.shape[axis]
        m = int(round(domain.halfwidth[axis] / d))
        if m < 1:
            raise ValueError(f"too few nodes: halfwidth {domain.halfwidth[axis]} "
                             f"spans less than one grid step on axis {axis}")
        if 2 * m > n - 1:
            raise ValueError(f"domain too large on axis {axis}: "
                             f"{2 * m} steps exceed {n - 1}")
        ci = int(round((domain.center[axis] - field.origin[axis]) / d))
        ci = min(max(ci, m), n - 1 - m)
        centers.append(ci)
        ms.append(m)
    return tuple(centers), tuple(ms)


def snapped_domain(field, domain):
    """The snapped box as physical coordinates (what was actually integrated)."""
    ci, ms = snap_domain(field, domain)
    center = tuple(field.origin[a] + ci[a] * field.spacing[a] for a in range(len(ci)))
    half = tuple(ms[a] * field.spacing[a] for a in range(len(ms)))
    return IntegrationDomain(center, half)


def _axis_kernel(weight, axis, order, m, spacing):
    """Sampled weight-factor derivative times trapezoid weights times H^-order.

    The normalized coordinates are j/m - 1 for j = 0..2m, so the physical
    halfwidth is exactly m * spacing.
    """
    s = np.arange(-m, m + 1) / m
    if axis < weight.ndim_space:
        vals = envelope_derivative(weight.p[axis], order)(s)
    elif weight.temporal_factor == TEMPORAL_SINE:
        vals = sine_time_derivative(order, s)
    else:
        vals = envelope_derivative(weight.q, order)(s)
    H = m * spacing
    return vals * H ** (-order) * _trap_vector(2 * m + 1, spacing)


def _required_orders(target, terms):
    per_axis = {}
    for term in (target, *terms):
        for part in term.parts:
            for axis, order in enumerate(part.wderiv):
                per_axis.setdefault(axis, set()).add(order)
    return {a: sorted(v) for a, v in per_axis.items()}


class WeakAssembler:
    """Shared-kernel assembler for one (field, weight, halfwidths, term set).

    Builds all per-axis kernels once; exposes per-domain evaluation (direct)
    and whole-grid correlation tables (table).  Ensembles reuse one assembler
    across members so the expensive work happens once per field.
    """

    def __init__(self, field, target, terms, weight, halfwidths, method="auto"):
        naxes = field.ndim_space + 1
        halfwidths = tuple(float(h) for h in halfwidths)
        if len(halfwidths) != naxes:
            raise ValueError(f"need {naxes} halfwidths")
        validate_weight_spec(weight)
        for term in (target, *terms):
            orders = term.max_space_orders(field.ndim_space)
            validate_weight_spec(weight, required_space_orders=orders)
        self.field = field
        self.target = target
        self.terms = tuple(terms)
        self.weight = weight
        probe = IntegrationDomain(tuple(field.origin[a] + halfwidths[a]
                                        for a in range(naxes)), halfwidths)
        _, self.m = snap_domain(field, probe)
        self.snapped_halfwidths = tuple(self.m[a] * field.spacing[a]
                                        for a in range(naxes))
        self.kernels = {
            (axis, order): _axis_kernel(weight, axis, order, self.m[axis],
                                        field.spacing[axis])
            for axis, orders in _required_orders(target, terms).items()
            for order in orders
        }
        window_nodes = int(np.prod([2 * m + 1 for m in self.m]))
        grid_nodes = int(np.prod(field.shape))
        if method == "auto":
            # one table pass costs about one full-grid sweep per part; direct
            # work grows with K * window, so prefer tables once 100 domains
            # would touch more nodes than the grid holds
            method = "table" if 100 * window_nodes > grid_nodes else "direct"
        if method not in ("direct", "table"):
            raise ValueError(f"unknown assembly method {method!r}")
        self.method = method
        self._tables = None
        self._monomials_full = {}

    # -- shared helpers ----------------------------------------------------

    def _monomial_full(self, exponents):
        key = tuple(exponents)
        if key not in self._monomials_full:
            out = None
            for comp, e in enumerate(key):
                if e == 0:
                    continue
                factor = self.field.values[comp]
                piece = factor ** e if e > 1 else factor
                out = piece if out is None else out * piece
            if out is None:
                out = np.ones(self.field.shape)
            self._monomials_full[key] = out
        return self._monomials_full[key]

    @staticmethod
    def _monomial_window(windows, exponents, cache):
        key = tuple(exponents)
        if key not in cache:
            out = None
            for comp, e in enumerate(key):
                if e == 0:
                    continue
                piece = windows[comp] ** e if e > 1 else windows[comp]
                out = piece if out is None else out * piece
            cache[key] = out if out is not None else np.ones(windows[0].shape)
        return cache[key]

    def _contract(self, arr, wderiv):
        """Separable contraction of a window with per-axis kernels."""
        ndim = arr.ndim
        for axis in range(ndim - 1, -1, -1):
            arr = np.tensordot(arr, self.kernels[(axis, wderiv[axis])],
                               axes=([axis], [0]))
        return float(arr)

    # -- direct path -------------------------------------------------------

    def column_direct(self, term, domain):
        ci, ms = snap_domain(self.field, domain)
        if ms != self.m:
            raise ValueError("domain halfwidths differ from the assembler's")
        sl = tuple(slice(c - m, c + m + 1) for c, m in zip(ci, ms))
        windows = [np.ascontiguousarray(self.field.values[(comp,) + sl])
                   for comp in range(self.field.ncomp)]
        cache = {}
        total = 0.0
        for part in term.parts:
            mono = self._monomial_window(windows, part.monomial, cache)
            total += part.prefactor * self._contract(mono, part.wderiv)
        return total

    # -- table path --------------------------------------------------------

    def _build_tables(self):
        tables = []
        for term in (self.target, *self.terms):
            acc = None
            for part in term.parts:
                arr = self._monomial_full(part.monomial)
                for axis in range(arr.ndim):
                    kern = self.kernels[(axis, part.wderiv[axis])][::-1]
                    shape = [1] * arr.ndim
                    shape[axis] = kern.size
                    arr = fftconvolve(arr, kern.reshape(shape), mode="valid",
                                      axes=axis)
                piece = part.prefactor * arr
                acc = piece if acc is None else acc + piece
            tables.append(acc)
            # bound peak memory on large grids; degree-1 entries are views
            self._monomials_full.clear()
        return tables

    def tables(self):
        if self._tables is None:
            self._tables = self._build_tables()
        return self._tables

    # -- system assembly ---------------------------------------------------

    def system_for(self, domains):
        domains = list(domains)
        K = len(domains)
        N = len(self.terms)
        Q = np.empty((K, N))
        q0 = np.empty(K)
        snapped = []
        if self.method == "table":
            tabs = self.tables()
            for k, dom in enumerate(domains):
                ci, ms = snap_domain(self.field, dom)
                if ms != self.m:
                    raise ValueError("domain halfwidths differ from the assembler's")
                idx = tuple(c - m for c, m in zip(ci, ms))
                q0[k] = tabs[0][idx]
                for n in range(N):
                    Q[k, n] = tabs[1 + n][idx]
                snapped.append(self._snapped(ci))
        else:
            for k, dom in enumerate(domains):
                ci, _ = snap_domain(self.field, dom)
                q0[k] = self.column_direct(self.target, dom)
                for n, term in enumerate(self.terms):
                    Q[k, n] = self.column_direct(term, dom)
                snapped.append(self._snapped(ci))
        bad = ~np.isfinite(Q).all(axis=1) | ~np.isfinite(q0)
        if bad.any():
            raise ValueError(f"non-finite column entries at domains {np.nonzero(bad)[0].tolist()}")
        labels = tuple(t.label for t in self.terms)
        return LinearSystem(Q, q0, labels, np.linalg.norm(Q, axis=0),
                            self.snapped_halfwidths, tuple(snapped))

    def _snapped(self, ci):
        center = tuple(self.field.origin[a] + ci[a] * self.field.spacing[a]
                       for a in range(len(ci)))
        return IntegrationDomain(center, self.snapped_halfwidths)


def assemble_column(field, term, domain, weight):
    """One weak integral: sum over parts of prefactor x trapezoid(monomial x
    weight derivative) over the snapped box.  Reference implementation; the
    assembler reproduces it exactly."""
    ci, ms = snap_domain(field, domain)
    sl = tuple(slice(c - m, c + m + 1) for c, m in zip(ci, ms))
    windows = [np.ascontiguousarray(field.values[(comp,) + sl])
               for comp in range(field.ncomp)]
    total = 0.0
    for part in term.parts:
        mono = None
        for comp, e in enumerate(part.monomial):
            if e == 0:
                continue
            piece = windows[comp] ** e if e > 1 else windows[comp]
            mono = piece if mono is None else mono * piece
        if mono is None:
            mono = np.ones(windows[0].shape)
        arr = mono
        for axis in range(arr.ndim - 1, -1, -1):
            kern = _axis_kernel(weight, axis, part.wderiv[axis], ms[axis],
                                field.spacing[axis])
            arr = np.tensordot(arr, kern, axes=([axis], [0]))
        total += part.prefactor * float(arr)
    return total


def build_system(field, target, terms, domains, weight, method="auto"):
    """Assemble Q and q0 over a list of equal-halfwidth domains."""
    domains = list(domains)
    if not domains:
        raise ValueError("need at least one domain")
    hw = domains[0].halfwidth
    for dom in domains[1:]:
        if dom.halfwidth != hw:
            raise ValueError("all domains must share halfwidths")
    asm = WeakAssembler(field, target, terms, weight, hw, method=method)
    return asm.system_for(domains)


# ---------------------------------------------------------------------------
# strong-form oracle: closed-form counterparts for validating the weak side


@dataclass(frozen=True)
class StrongPart:
    """prefactor times a product of exact derivatives of the components,
    paired against one component of the weight."""

    prefactor: float
    factors: tuple  # ((component, deriv multi-index), ...)
    weight_component: str = "scalar"  # "scalar" | "x" | "y"


@dataclass(frozen=True)
class StrongTerm:
    label: str
    parts: tuple


def builtin_strong_library(system):
    """The same terms as builtin_library, in original differential form."""
    def P(pre, factors, wc="scalar"):
        return StrongPart(float(pre), tuple((c, tuple(d)) for c, d in factors), wc)

    if system == "ks":
        target = StrongTerm("u_t", (P(1, [(0, (0, 1))]),))
        terms = (
            StrongTerm("u*u_x", (P(1, [(0, (0, 0)), (0, (1, 0))]),)),
            StrongTerm("u_xx", (P(1, [(0, (2, 0))]),)),
            StrongTerm("u_xxxx", (P(1, [(0, (4, 0))]),)),
        )
        return target, terms
    if system == "kolmogorov":
        # momentum-equation terms dotted with the vector weight; the
        # advection identity additionally needs a divergence-free field
        target = StrongTerm("vort_t", (P(1, [(0, (0, 0, 1))], "x"),
                                       P(1, [(1, (0, 0, 1))], "y")))
        terms = (
            StrongTerm("advection", (
                P(1, [(0, (0, 0, 0)), (0, (1, 0, 0))], "x"),
                P(1, [(1, (0, 0, 0)), (0, (0, 1, 0))], "x"),
                P(1, [(0, (0, 0, 0)), (1, (1, 0, 0))], "y"),
                P(1, [(1, (0, 0, 0)), (1, (0, 1, 0))], "y"),
            )),
            StrongTerm("lap_vort", (
                P(1, [(0, (2, 0, 0))], "x"), P(1, [(0, (0, 2, 0))], "x"),
                P(1, [(1, (2, 0, 0))], "y"), P(1, [(1, (0, 2, 0))], "y"),
            )),
            StrongTerm("vort", (P(1, [(0, (0, 0, 0))], "x"),
                                P(1, [(1, (0, 0, 0))], "y"))),
        )
        return target, terms
    if system in ("lambda_omega_u", "lambda_omega_v"):
        tc = 0 if system.endswith("u") else 1
        tname = "u" if tc == 0 else "v"
        target = StrongTerm(f"{tname}_t", (P(1, [(tc, (0, 0, 1))]),))
        lap = StrongTerm(f"lap_{tname}", (P(1, [(tc, (2, 0, 0))]),
                                          P(1, [(tc, (0, 2, 0))])))
        monos = []
        for total in range(1, 4):
            for a in range(total, -1, -1):
                b = total - a
                label = "*".join((["u"] if a == 1 else [f"u^{a}"] if a else []) +
                                 (["v"] if b == 1 else [f"v^{b}"] if b else []))
                monos.append(StrongTerm(label, (
                    P(1, [(0, (0, 0, 0))] * a + [(1, (0, 0, 0))] * b),)))
        return target, (lap, *monos)
    raise ValueError(f"unknown system {system!r}")


def strong_column_oracle(geometry, exprs, strong_term, domain, weight):
    """Quadrature of weight times the closed-form strong term over the box.

    geometry fixes the grid; exprs is one analytic expression per component.
    Used in tests to validate assemble_column against exact derivatives.
    """
    ci, ms = snap_domain(geometry, domain)
    axes_phys = [geometry.origin[a] + geometry.spacing[a] *
                 np.arange(ci[a] - ms[a], ci[a] + ms[a] + 1)
                 for a in range(geometry.ndim_space + 1)]
    axes_norm = [np.arange(-m, m + 1) / m for m in ms]
    halfwidths = [ms[a] * geometry.spacing[a] for a in range(len(ms))]
    mesh_norm = np.meshgrid(*axes_norm, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh_norm])
    shape = tuple(2 * m + 1 for m in ms)

    if weight.kind == CURL_STREAMFUNCTION:
        from .weights import eval_weight
        wvec = eval_weight(weight, (0,) * len(ms), pts, halfwidths, component="w")
        wvals = {"x": wvec[0].reshape(shape), "y": wvec[1].reshape(shape)}
    else:
        from .weights import eval_weight
        wvals = {"scalar": eval_weight(weight, (0,) * len(ms), pts,
                                       halfwidths).reshape(shape)}

    total = 0.0
    for part in strong_term.parts:
        integrand = np.full(shape, part.prefactor)
        for comp, deriv in part.factors:
            integrand = integrand * exprs[comp].deriv_multi(deriv).sample(axes_phys)
        integrand = integrand * wvals[part.weight_component]
        total += quadrature(integrand, geometry.spacing)
    return total
