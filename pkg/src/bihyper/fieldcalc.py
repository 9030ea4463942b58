"""Finite-difference calculus on tensor-product grids over a chart.

Periodic axes use a uniform grid and pole axes a half-cell-offset grid, so no
node sits on a coordinate singularity. All first derivatives use the
sixth-order centred stencil. Ghost values past a pole come from the chart's
:class:`~bihyper.charts.Gluing`, and tensor components pick up the sign of the
gluing Jacobian. Divergences are taken in flux form ``(1/J) d_i (J V^i)``. That
flux is smooth across the poles even where the coordinate components ``V^i``
are not.

Quadrature is the trapezoid rule on periodic axes. On pole axes the
``J``-weighted integrand is even or odd under the gluing. Even integrands use
the midpoint rule, which is spectrally accurate there. Odd integrands carry a
``sin`` factor that Fejer's first rule absorbs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .charts import band_limited_waves
from .extrinsic import compute_geometry, intrinsic_scalar

MIN_RESOLUTION = 8
_CHUNK = 8192
# antisymmetric centred-difference weights c_k for (f[i+k] - f[i-k])
_STENCILS = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
}
# Each inverse-metric factor costs an order at coordinate poles, and checks
# that nest two derivatives (Christoffel derivatives, the Laplacian of
# |grad u|^2) lose two. Six orders keep those at fourth order or better.
STENCIL_ORDER = 6
CURVATURE_STENCIL_ORDER = STENCIL_ORDER
_BASIC_KEYS = ("p", "dp", "g", "ginv", "J", "N", "A", "H", "A_sq", "S", "X", "theta", "rho", "xT", "P1")


class ResolutionError(ValueError):
    pass


class NotClosedError(ValueError):
    pass


def fejer_weights(m: int) -> np.ndarray:
    """Fejer's first rule on the nodes ``cos((j + 1/2) pi / m)`` for ``int_{-1}^{1}``."""
    t = (np.arange(m) + 0.5) * np.pi / m
    k = np.arange(1, m // 2 + 1)
    s = np.cos(2.0 * np.outer(t, k)) / (4.0 * k * k - 1.0)
    return (2.0 / m) * (1.0 - 2.0 * s.sum(axis=1))


class Grid:
    """Nodes of a chart with the immersion geometry cached at every node."""

    def __init__(self, chart, counts):
        n = chart.param_dim
        if np.isscalar(counts):
            counts = (int(counts),) * n
        counts = tuple(int(m) for m in counts)
        if len(counts) != n:
            raise ValueError(f"need {n} per-axis counts")
        if min(counts) < MIN_RESOLUTION:
            raise ResolutionError(f"resolution must be >= {MIN_RESOLUTION} per axis")
        for k, gl in enumerate(chart.gluing):
            if gl is not None:
                for a in gl.shifted_axes:
                    if counts[a] % 2:
                        raise ResolutionError(f"axis {a} needs an even count for pole gluing")
        self.chart = chart
        self.counts = counts
        self.spacing = tuple((hi - lo) / m for lo, hi, m in zip(chart.lower, chart.upper, counts))
        self.axes = []
        for lo, m, h, per in zip(chart.lower, counts, self.spacing, chart.periodic):
            offset = 0.0 if per else 0.5
            self.axes.append(lo + (np.arange(m) + offset) * h)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.nodes = np.stack([a.ravel() for a in mesh], axis=-1)
        self._geo = {}
        self._compute(_BASIC_KEYS)

    @property
    def n(self) -> int:
        return self.chart.param_dim

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def h(self) -> float:
        """Largest grid spacing, the refinement parameter."""
        return max(self.spacing)

    def _compute(self, keys, **flags):
        parts = {k: [] for k in keys}
        for start in range(0, len(self.nodes), _CHUNK):
            geo = compute_geometry(self.chart, self.nodes[start:start + _CHUNK], **flags)
            for k in keys:
                parts[k].append(geo[k])
        for k in keys:
            arr = np.concatenate(parts[k], axis=0)
            self._geo[k] = arr.reshape(self.counts + arr.shape[1:])

    def __getitem__(self, key):
        if key not in self._geo:
            if key in ("gamma1", "gamma2"):
                self._compute(("gamma1", "gamma2"), christoffel=True)
            elif key in ("Ric", "S_intrinsic"):
                self._compute(("Ric", "S_intrinsic"), intrinsic=True)
            else:
                raise KeyError(key)
        return self._geo[key]

    def scalar(self, key) -> "GridField":
        return GridField(self, self[key], 0)

    def vector(self, key) -> "GridField":
        return GridField(self, self[key], 1)

    # -- parity-aware differencing -------------------------------------------

    def _component_signs(self, axis, rank, density=False):
        """Sign of each tensor component under the gluing across ``axis``."""
        s = self.chart.gluing[axis].signs(axis, self.n)
        if rank == 0:
            out = np.ones(())
        else:
            out = s
            for _ in range(rank - 1):
                out = np.multiply.outer(out, s)
        if density:
            out = out * np.prod(s)
        return out

    def _ghosts(self, F, axis, sign, width):
        gl = self.chart.gluing[axis]
        m = self.counts[axis]

        def glue(slab, rule):
            for a in rule.flip:
                slab = np.flip(slab, axis=a)
            for a in rule.shift:
                slab = np.roll(slab, self.counts[a] // 2, axis=a)
            return sign * slab

        lo = glue(np.flip(np.take(F, np.arange(width), axis=axis), axis=axis), gl)
        hi = glue(np.take(F, np.arange(m - 1, m - 1 - width, -1), axis=axis), gl.at_upper())
        return np.concatenate([lo, F, hi], axis=axis)

    def diff(self, F, axis, sign=1.0, order=STENCIL_ORDER):
        """Centred derivative of the scalar-shaped array ``F`` along ``axis``.

        ``sign`` is the component's parity under the pole gluing of that axis.
        """
        h = self.spacing[axis]
        coeffs = _STENCILS[order]
        w = len(coeffs)
        if self.chart.periodic[axis]:
            out = sum(c * (np.roll(F, -k, axis) - np.roll(F, k, axis)) for k, c in enumerate(coeffs, 1))
            return out / h
        if self.chart.gluing[axis] is not None:
            P = self._ghosts(F, axis, sign, w)
            m = self.counts[axis]

            def sl(a):
                return np.take(P, np.arange(w + a, w + a + m), axis=axis)

            return sum(c * (sl(k) - sl(-k)) for k, c in enumerate(coeffs, 1)) / h
        return _one_sided_diff(F, axis, h)

    def diff_tensor(self, T, axis, rank, density=False, order=STENCIL_ORDER):
        """Differentiate every component of a rank-``rank`` array along ``axis``."""
        gl = self.chart.gluing[axis]
        signs = self._component_signs(axis, rank, density) if gl is not None else None
        if rank == 0:
            return self.diff(T, axis, 1.0 if signs is None else float(signs), order)
        out = np.empty_like(T)
        for idx in product(range(self.n), repeat=rank):
            s = 1.0 if signs is None else float(signs[idx])
            out[(Ellipsis,) + idx] = self.diff(T[(Ellipsis,) + idx], axis, s, order)
        return out

    # -- quadrature -------------------------------------------------------------

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights per node, including the area element."""
        if not self.chart.is_closed():
            raise NotClosedError(f"{self.chart.name}: an axis is neither periodic nor a pole")
        w = np.ones(self.counts)
        for k, (lo, hi, m, h) in enumerate(zip(self.chart.lower, self.chart.upper, self.counts,
                                               self.spacing)):
            if self.chart.periodic[k]:
                wk = np.full(m, h)
            elif np.prod(self.chart.gluing[k].signs(k, self.n)) > 0:
                wk = np.full(m, h)
            else:
                t = (np.arange(m) + 0.5) * np.pi / m
                wk = fejer_weights(m) / np.sin(t) * (hi - lo) / np.pi
            shape = [1] * self.n
            shape[k] = m
            w = w * wk.reshape(shape)
        return w * self["J"]

    @cached_property
    def area(self) -> float:
        return float(np.sum(self.weights.ravel()))

    @cached_property
    def length_scale(self) -> float:
        return chart_length_scale(self.chart)


def chart_length_scale(chart) -> float:
    """Resolution-independent size of the immersed surface."""
    p = chart.body_points(chart.evaluate(chart.sample_grid(9))[0])
    return float(np.max(np.linalg.norm(p, axis=1)))


def _one_sided_diff(F, axis, h):
    F = np.moveaxis(F, axis, 0)
    m = F.shape[0]
    out = np.empty_like(F)
    out[2:m - 2] = (F[:m - 4] - 8 * F[1:m - 3] + 8 * F[3:m - 1] - F[4:]) / (12 * h)
    out[0] = (-25 * F[0] + 48 * F[1] - 36 * F[2] + 16 * F[3] - 3 * F[4]) / (12 * h)
    out[1] = (-3 * F[0] - 10 * F[1] + 18 * F[2] - 6 * F[3] + F[4]) / (12 * h)
    out[m - 1] = (25 * F[m - 1] - 48 * F[m - 2] + 36 * F[m - 3] - 16 * F[m - 4] + 3 * F[m - 5]) / (12 * h)
    out[m - 2] = (3 * F[m - 1] + 10 * F[m - 2] - 18 * F[m - 3] + 6 * F[m - 4] - F[m - 5]) / (12 * h)
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class GridField:
    """Sampled scalar (rank 0), tangent vector (rank 1) or 2-tensor (rank 2) on a grid.

    Vector components are contravariant in the chart basis; rank-2 fields
    produced by :func:`hessian` are covariant.
    """

    grid: Grid
    values: np.ndarray
    rank: int = 0

    def __post_init__(self):
        expected = self.grid.shape + (self.grid.n,) * self.rank
        if self.values.shape != expected:
            raise ValueError(f"field shape {self.values.shape} does not match {expected}")

    def _wrap(self, values, rank=None):
        return GridField(self.grid, values, self.rank if rank is None else rank)

    def _other(self, other):
        if isinstance(other, GridField):
            v = other.values
            if other.rank == 0 and self.rank > 0:
                v = v.reshape(v.shape + (1,) * self.rank)
            return v
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, GridField) and other.rank > 0 and self.rank == 0:
            return other * self
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def linf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.rank == 0 else float(np.max(norm(self).values))


def scalar_field(grid: Grid, values) -> GridField:
    return GridField(grid, np.asarray(values, dtype=float).reshape(grid.shape), 0)


def sample_function(grid: Grid, f, attached: bool = False) -> GridField:
    """Evaluate ``f(p)`` at the ambient node positions.

    With ``attached`` the positions are taken before the chart's ambient
    transform, so the function moves rigidly with the surface.
    """
    p = grid["p"].reshape(-1, grid["p"].shape[-1])
    if attached:
        p = grid.chart.body_points(p)
    return scalar_field(grid, f(p))


# -- pointwise tensor algebra -------------------------------------------------

def inner(V: GridField, W: GridField) -> GridField:
    g = V.grid["g"]
    return GridField(V.grid, np.einsum("...ij,...i,...j->...", g, V.values, W.values), 0)


def norm(V: GridField) -> GridField:
    return GridField(V.grid, np.sqrt(np.maximum(inner(V, V).values, 0.0)), 0)


def apply_mixed(T, V: GridField) -> GridField:
    """``(T V)^i = T^i_j V^j`` for a mixed tensor array such as ``A`` or ``P1``."""
    return GridField(V.grid, np.einsum("...ij,...j->...i", T, V.values), 1)


def hessian_norm_sq(Hs: GridField) -> GridField:
    ginv = Hs.grid["ginv"]
    return GridField(Hs.grid, np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv, Hs.values, Hs.values), 0)


def metric_trace(Hs: GridField) -> GridField:
    return GridField(Hs.grid, np.einsum("...ij,...ij->...", Hs.grid["ginv"], Hs.values), 0)


# -- differential operators ------------------------------------------------

def _require(f: GridField, rank: int):
    if f.rank != rank:
        raise ValueError(f"expected a rank-{rank} field, got rank {f.rank}")


def differential(f: GridField) -> np.ndarray:
    """Covariant components ``d_j f``."""
    _require(f, 0)
    grid = f.grid
    return np.stack([grid.diff(f.values, k, 1.0) for k in range(grid.n)], axis=-1)


def gradient(f: GridField) -> GridField:
    df = differential(f)
    return GridField(f.grid, np.einsum("...ij,...j->...i", f.grid["ginv"], df), 1)


def divergence(V: GridField) -> GridField:
    _require(V, 1)
    grid = V.grid
    J = grid["J"]
    total = np.zeros(grid.shape)
    for i in range(grid.n):
        flux = J * V.values[..., i]
        gl = grid.chart.gluing[i]
        sign = 1.0
        if gl is not None:
            s = gl.signs(i, grid.n)
            sign = float(np.prod(s) * s[i])
        total += grid.diff(flux, i, sign)
    return GridField(grid, total / J, 0)


def laplace_beltrami(f: GridField) -> GridField:
    return divergence(gradient(f))


def hessian(f: GridField) -> GridField:
    """Covariant Hessian ``d_i d_j f - Gamma^k_ij d_k f``."""
    grid = f.grid
    df = differential(f)
    dd = np.stack([grid.diff_tensor(df, i, 1) for i in range(grid.n)], axis=-2)
    hess = dd - np.einsum("...kij,...k->...ij", grid["gamma2"], df)
    return GridField(grid, hess, 2)


def cheng_yau(f: GridField) -> GridField:
    """``L1 f = div(P1 grad f)`` with ``P1 = n H I - A``."""
    return divergence(apply_mixed(f.grid["P1"], gradient(f)))


def integrate(f: GridField) -> float:
    _require(f, 0)
    return float(np.sum(np.ascontiguousarray(f.values * f.grid.weights).ravel()))


def mean(f: GridField) -> float:
    return integrate(f) / f.grid.area


def grid_scalar_curvature(grid: Grid) -> GridField:
    """Normalized scalar curvature with Christoffel derivatives taken on the grid.

    The grid differences are the only approximation, so the error against
    the exact value measures the discretization alone.
    """
    gamma1 = grid["gamma1"]
    dgamma1 = np.stack([grid.diff_tensor(gamma1, m, 3, order=CURVATURE_STENCIL_ORDER)
                        for m in range(grid.n)], axis=-4)
    n = grid.n
    flat = lambda a: a.reshape((-1,) + a.shape[n:])
    _, scal = intrinsic_scalar(flat(grid["g"]), flat(grid["ginv"]), flat(gamma1), flat(dgamma1))
    return GridField(grid, scal.reshape(grid.shape) / (n * (n - 1)), 0)


# -- seeded test fields ---------------------------------------------------------

def band_limited_function(dim, seed, modes, scale=1.0, stream=0):
    """Seeded sum of plane waves in ambient coordinates, ``|k| <= modes / scale``."""
    amp, k, phase = band_limited_waves(dim, seed, modes, stream=stream)
    k = k / scale

    def f(p):
        return np.cos(p @ k.T + phase) @ amp

    return f


def random_band_limited(grid: Grid, seed: int, modes: int = 2, zero_mean: bool = False,
                        stream: int = 0) -> GridField:
    """Restriction of a seeded ambient plane-wave sum to the surface.

    Smooth on the closed surface whatever the chart, and independent of the
    grid resolution for a fixed seed.
    """
    if modes < 0 or modes > min(grid.counts) / 4:
        raise ResolutionError(f"modes must lie in [0, {min(grid.counts) / 4}]")
    f = sample_function(grid, band_limited_function(grid["p"].shape[-1], seed, modes,
                                                   grid.length_scale, stream), attached=True)
    if zero_mean:
        f = f - mean(f)
    return f


def random_tangent_field(grid: Grid, seed: int, modes: int = 2) -> GridField:
    """Tangential projection of a seeded ambient plane-wave vector field."""
    E = grid["p"].shape[-1]
    body = grid.chart.body_points(grid["p"].reshape(-1, E))
    W = np.stack([band_limited_function(E, seed, modes, grid.length_scale, stream=10 + e)(body)
                  for e in range(E)], axis=-1).reshape(grid.shape + (E,))
    if grid.chart.transform is not None:
        W = W @ grid.chart.transform.T
    eta = grid.chart.model.eta
    V = np.einsum("...ij,...je,...e,e->...i", grid["ginv"], grid["dp"], W, eta)
    return GridField(grid, V, 1)
