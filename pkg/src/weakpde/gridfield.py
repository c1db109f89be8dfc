"""Gridded space-time fields: construction, corruption, resampling, and disk IO.

A field lives on a uniform, node-centered, rectilinear grid whose axes are the
space dimensions followed by time.  Values are stored component-major: the
array shape is (ncomp, *shape).  All operations here are pure; arrays inside a
GridField are frozen after construction and never mutated in place.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MAGIC = b"WFPD"
_VERSION = 1
# chunk size for streamed Gaussian generation; bounds peak memory on large fields
_NOISE_CHUNK = 1 << 23


class FieldFormatError(ValueError):
    """Raised for malformed, truncated, or unsupported field files."""


@dataclass(frozen=True)
class GridField:
    """Sampled field values on a uniform space-time grid.

    ndim_space : 1 or 2 spatial dimensions (time is always the last axis)
    shape      : samples per axis, space axes first, then time
    spacing    : grid step per axis, same order, physical units
    origin     : coordinate of the first sample per axis
    ncomp      : number of field components (1 = scalar, 2 = planar vector)
    values     : array of shape (ncomp, *shape), float64
    """

    ndim_space: int
    shape: tuple
    spacing: tuple
    origin: tuple
    ncomp: int
    values: np.ndarray

    def __post_init__(self):
        if self.ndim_space not in (1, 2):
            raise ValueError(f"invalid dimension: ndim_space must be 1 or 2, got {self.ndim_space}")
        naxes = self.ndim_space + 1
        shape = tuple(int(n) for n in self.shape)
        spacing = tuple(float(d) for d in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(shape) != naxes or len(spacing) != naxes or len(origin) != naxes:
            raise ValueError(f"expected {naxes} axes (space then time)")
        for n, d in zip(shape, spacing):
            if n < 2:
                raise ValueError(f"degenerate axis: need at least 2 samples, got {n}")
            if not d > 0:
                raise ValueError(f"degenerate axis: spacing must be positive, got {d}")
        if self.ncomp < 1:
            raise ValueError("ncomp must be >= 1")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.ncomp,) + shape:
            raise ValueError(f"values shape {vals.shape} != {(self.ncomp,) + shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals = vals.copy() if vals.base is not None or vals.flags.writeable else vals
        vals.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "values", vals)

    @property
    def extent(self):
        """Physical span per axis, (n-1) * spacing."""
        return tuple((n - 1) * d for n, d in zip(self.shape, self.spacing))

    def axis_coords(self, axis):
        """Sample coordinates along one axis."""
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def component(self, i):
        return self.values[i]

    def with_values(self, values):
        """Same geometry, new values."""
        return GridField(self.ndim_space, self.shape, self.spacing, self.origin,
                         int(values.shape[0]), values)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive i.i.d. Gaussian corruption: sigma in field units, fixed seed."""

    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def make_grid(ndim_space, shape, spacing, origin, ncomp):
    """Zero-filled field with the requested geometry."""
    shape = tuple(int(n) for n in shape)
    values = np.zeros((int(ncomp),) + shape)
    return GridField(ndim_space, shape, tuple(spacing), tuple(origin), int(ncomp), values)


def gaussian_stream(rng, size):
    """Deterministic standard-normal deviates from a PCG64 generator.

    Uses 53-bit uniforms mapped through the inverse normal CDF, so a fixed
    seed yields the same sequence on every platform with no rejection loops.
    """
    out = np.empty(size)
    for lo in range(0, size, _NOISE_CHUNK):
        n = min(_NOISE_CHUNK, size - lo)
        u = (rng.integers(0, 1 << 53, size=n, dtype=np.int64) + 0.5) * 2.0 ** -53
        out[lo:lo + n] = ndtri(u)
    return out


def add_noise(field, noise):
    """Field plus N(0, sigma^2) i.i.d. at every component and grid point."""
    if noise.sigma == 0.0:
        return field
    rng = np.random.Generator(np.random.PCG64(noise.seed))
    eta = gaussian_stream(rng, field.values.size).reshape(field.values.shape)
    return field.with_values(field.values + noise.sigma * eta)


def subsample(field, stride):
    """Keep every stride-th sample per axis; spacing scales accordingly."""
    stride = tuple(int(s) for s in stride)
    if len(stride) != field.ndim_space + 1:
        raise ValueError("need one stride per axis")
    if any(s < 1 for s in stride):
        raise ValueError("strides must be >= 1")
    new_shape = tuple((n - 1) // s + 1 for n, s in zip(field.shape, stride))
    if any(n < 2 for n in new_shape):
        raise ValueError("empty result: stride leaves fewer than 2 samples on an axis")
    sl = (slice(None),) + tuple(slice(None, None, s) for s in stride)
    new_spacing = tuple(d * s for d, s in zip(field.spacing, stride))
    return GridField(field.ndim_space, new_shape, new_spacing, field.origin,
                     field.ncomp, field.values[sl])


def save_field(field, path):
    """Write the canonical little-endian binary format.

    Layout: magic 'WFPD', u16 version, u8 ndim_space, u8 ncomp, then per axis
    (space axes then time) u64 count + f64 spacing + f64 origin, then the
    float64 payload, component-major, row-major.
    """
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHBB", _MAGIC, _VERSION, field.ndim_space, field.ncomp))
        for n, d, o in zip(field.shape, field.spacing, field.origin):
            fh.write(struct.pack("<Qdd", n, d, o))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path):
    """Read the canonical binary format; inverse of save_field, bit-exact."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8 or head[:4] != _MAGIC:
            raise FieldFormatError("malformed header: bad magic bytes")
        version, ndim_space, ncomp = struct.unpack("<HBB", head[4:8])
        if version != _VERSION:
            raise FieldFormatError(f"unsupported version {version}")
        if ndim_space not in (1, 2):
            raise FieldFormatError(f"malformed header: ndim_space {ndim_space}")
        naxes = ndim_space + 1
        axes_raw = fh.read(24 * naxes)
        if len(axes_raw) < 24 * naxes:
            raise FieldFormatError("truncated payload: incomplete axis table")
        shape, spacing, origin = [], [], []
        for i in range(naxes):
            n, d, o = struct.unpack_from("<Qdd", axes_raw, 24 * i)
            shape.append(n)
            spacing.append(d)
            origin.append(o)
        count = ncomp * int(np.prod(shape))
        payload = fh.read(8 * count + 1)
        if len(payload) < 8 * count:
            raise FieldFormatError("truncated payload: fewer values than the header promises")
        if len(payload) > 8 * count:
            raise FieldFormatError("malformed header: trailing bytes after payload")
        values = np.frombuffer(payload[:8 * count], dtype="<f8").reshape((ncomp,) + tuple(shape))
    try:
        return GridField(ndim_space, tuple(shape), tuple(spacing), tuple(origin),
                         ncomp, values.copy())
    except ValueError as err:
        raise FieldFormatError(f"invalid field geometry in file: {err}") from err


def export_csv(field, path):
    """Interoperability export: one row per grid point, coordinates then components.

    Not the canonical format; meant for moderate-size fields.
    """
    coord_names = ["x", "y"][: field.ndim_space] + ["t"]
    header = ",".join(coord_names + [f"c{i}" for i in range(field.ncomp)])
    space_axes = [field.axis_coords(i) for i in range(field.ndim_space)]
    tcoords = field.axis_coords(field.ndim_space)
    mesh = np.meshgrid(*space_axes, indexing="ij")
    npts_space = int(np.prod(field.shape[:-1]))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for j, t in enumerate(tcoords):
            cols = [m.reshape(npts_space) for m in mesh]
            cols.append(np.full(npts_space, t))
            for c in range(field.ncomp):
                cols.append(field.values[c, ..., j].reshape(npts_space))
            np.savetxt(fh, np.column_stack(cols), delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# analytic expressions: closed forms with exact derivatives of any order


class AnalyticExpr:
    """A smooth closed-form function of the grid coordinates.

    Subclasses are closed under differentiation, so any mixed partial is again
    exact.  Used to supply reference fields for quadrature and weak-form
    cross-checks.
    """

    def derivative(self, axis, order=1):
        raise NotImplementedError

    def deriv_multi(self, orders):
        expr = self
        for axis, m in enumerate(orders):
            if m:
                expr = expr.derivative(axis, m)
        return expr

    def __call__(self, *coords):
        raise NotImplementedError

    def sample(self, axes):
        """Evaluate on the tensor grid spanned by 1-D coordinate arrays."""
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        return np.broadcast_to(self(*mesh), tuple(len(a) for a in axes))


@dataclass(frozen=True)
class Sinusoid(AnalyticExpr):
    """amplitude * sin(k . x + phase), with k covering space axes and time."""

    amplitude: float
    wavevector: tuple
    phase: float = 0.0

    def derivative(self, axis, order=1):
        k = self.wavevector[axis]
        return Sinusoid(self.amplitude * k ** order, self.wavevector,
                        self.phase + order * np.pi / 2)

    def __call__(self, *coords):
        arg = self.phase
        for k, c in zip(self.wavevector, coords):
            arg = arg + k * np.asarray(c)
        return self.amplitude * np.sin(arg)


@dataclass(frozen=True)
class CoordPolynomial(AnalyticExpr):
    """Multivariate polynomial in the physical coordinates.

    terms maps exponent tuples (one entry per axis, time last) to coefficients.
    """

    terms: tuple  # tuple of (exponents, coefficient)

    @staticmethod
    def from_dict(d):
        return CoordPolynomial(tuple(sorted((tuple(e), float(c)) for e, c in d.items())))

    def derivative(self, axis, order=1):
        terms = {}
        for exps, coef in self.terms:
            e = exps[axis]
            if e < order:
                continue
            fac = 1.0
            for j in range(order):
                fac *= e - j
            new = list(exps)
            new[axis] = e - order
            key = tuple(new)
            terms[key] = terms.get(key, 0.0) + coef * fac
        if not terms:
            terms = {tuple(0 for _ in self.terms[0][0]): 0.0} if self.terms else {(): 0.0}
        return CoordPolynomial.from_dict(terms)

    def __call__(self, *coords):
        arrs = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*[a.shape for a in arrs]) if arrs else ()
        out = np.zeros(shape)
        for exps, coef in self.terms:
            term = np.full(shape, coef)
            for e, a in zip(exps, arrs):
                if e:
                    term = term * a ** e
            out += term
        return out


@dataclass(frozen=True)
class Constant(AnalyticExpr):
    value: float

    def derivative(self, axis, order=1):
        return Constant(0.0)

    def __call__(self, *coords):
        shape = np.broadcast_shapes(*[np.asarray(c).shape for c in coords]) if coords else ()
        return np.full(shape, self.value)


def make_expression(expression_id, params, naxes):
    """Build a catalog expression: 'constant', 'sinusoid', or 'polynomial'."""
    if expression_id == "constant":
        return Constant(float(params.get("value", 1.0)))
    if expression_id == "sinusoid":
        wv = tuple(float(k) for k in params["wavevector"])
        if len(wv) != naxes:
            raise ValueError(f"wavevector needs {naxes} entries")
        return Sinusoid(float(params.get("amplitude", 1.0)), wv,
                        float(params.get("phase", 0.0)))
    if expression_id == "polynomial":
        terms = {tuple(e): float(c) for e, c in params["terms"].items()} \
            if isinstance(params["terms"], dict) else \
            {tuple(e): float(c) for e, c in params["terms"]}
        for e in terms:
            if len(e) != naxes:
                raise ValueError(f"exponent tuple needs {naxes} entries")
        return CoordPolynomial.from_dict(terms)
    raise ValueError(f"unknown expression: {expression_id!r}")


def eval_analytic(geometry, expression_id, params):
    """Sample a catalog expression exactly on the geometry of a field.

    params may be a single parameter dict (broadcast over components) or a
    list with one dict per component.
    """
    naxes = geometry.ndim_space + 1
    axes = [geometry.axis_coords(i) for i in range(naxes)]
    if isinstance(params, (list, tuple)):
        plist = list(params)
        if len(plist) != geometry.ncomp:
            raise ValueError("need one parameter set per component")
    else:
        plist = [params] * geometry.ncomp
    comps = [make_expression(expression_id, p, naxes).sample(axes) for p in plist]
    values = np.stack([np.broadcast_to(c, geometry.shape) for c in comps])
    return geometry.with_values(values)
