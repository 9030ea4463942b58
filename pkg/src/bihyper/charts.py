"""Parametric immersions and the catalog of closed test hypersurfaces.

Every chart is a single coordinate patch ``u -> p(u)`` written in terms of
:mod:`bihyper.jets`, so position and derivatives up to third order come out
exactly. Closed hypersurfaces are covered by one chart whose axes are either
periodic or end in a coordinate pole. A pole axis carries a :class:`Gluing`
that says how the chart continues across it: for hyperspherical angles,
``phi_k -> -phi_k`` is the same point as reflecting every later polar angle
(``phi -> pi - phi``) and rotating the azimuth by half a turn.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import jets as J
from .spaceform import SpaceFormModel, ambient_inner

PI = math.pi


class ImmersionError(ValueError):
    """Chart fails the immersion condition or leaves the model."""


@dataclass(frozen=True)
class Gluing:
    """How a pole axis continues past its endpoints.

    ``flip`` lists axes mapped to ``lo + hi - u`` and ``shift`` lists periodic
    axes advanced by half a period. The pole axis itself is reflected about
    the endpoint. ``upper``, when given, is the rule at the upper endpoint;
    it must have the same flips so that both ends share one parity.
    """

    flip: tuple = ()
    shift: tuple = ()
    upper: Optional["Gluing"] = None

    def __post_init__(self):
        if self.upper is not None and tuple(self.upper.flip) != tuple(self.flip):
            raise ValueError("both ends of a pole axis must flip the same axes")

    def at_upper(self) -> "Gluing":
        return self if self.upper is None else self.upper

    @property
    def shifted_axes(self) -> tuple:
        return tuple(sorted(set(self.shift) | set(self.at_upper().shift)))

    def signs(self, axis: int, n: int) -> np.ndarray:
        """Diagonal of the Jacobian of the gluing map."""
        s = np.ones(n)
        s[axis] = -1.0
        for a in self.flip:
            s[a] = -1.0
        return s


@dataclass(frozen=True, eq=False)
class Chart:
    model: SpaceFormModel
    lower: tuple
    upper: tuple
    periodic: tuple
    gluing: tuple
    formula: Callable = field(repr=False)
    name: str = "chart"
    orientation: int = 1
    derivative_mode: str = "analytic"
    transform: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def param_dim(self) -> int:
        return len(self.lower)

    @property
    def n(self) -> int:
        return self.model.n

    def is_closed(self) -> bool:
        return all(p or g is not None for p, g in zip(self.periodic, self.gluing))

    def evaluate(self, u, dtype=float):
        """Return ``(p, dp, d2p, d3p)`` for a ``(B, n)`` array of parameter points.

        Shapes are ``(B, E)``, ``(B, n, E)``, ``(B, n, n, E)``, ``(B, n, n, n, E)``;
        index order puts parameter axes before the ambient axis. ``dtype``
        sets the working precision of the jets.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.param_dim:
            raise ValueError(f"expected {self.param_dim} parameters, got {u.shape[1]}")
        out = self.formula(J.Jet.variables(u, dtype))
        p, dp, d2p, d3p = J.stack(out)
        if self.transform is not None:
            L = self.transform.T
            p, dp, d2p, d3p = p @ L, dp @ L, d2p @ L, d3p @ L
        return p, dp, d2p, d3p

    def flipped(self) -> "Chart":
        return replace(self, orientation=-self.orientation)

    def transformed(self, L) -> "Chart":
        """Apply an ambient isometry ``L`` (orthogonal, or Lorentz for ``c < 0``).

        The base point moves with the surface so that every geometric quantity
        is preserved.
        """
        L = np.asarray(L, dtype=float)
        eta = np.diag(self.model.eta)
        if not np.allclose(L.T @ eta @ L, eta, atol=1e-12):
            raise ValueError("transform does not preserve the ambient metric")
        if self.model.c < 0 and L[-1, -1] < 0:
            raise ValueError("Lorentz transform must preserve the upper sheet")
        total = L if self.transform is None else L @ self.transform
        model = self.model.with_base_point(L @ self.model.base_point)
        orient = self.orientation * int(np.sign(np.linalg.det(L)))
        return replace(self, model=model, transform=total, orientation=orient)

    def with_base_point(self, x0) -> "Chart":
        return replace(self, model=self.model.with_base_point(x0))

    def body_points(self, p):
        """Undo the ambient transform: coordinates that move with the surface."""
        if self.transform is None:
            return p
        return np.linalg.solve(self.transform, np.asarray(p).T).T

    def sample_grid(self, m: int) -> np.ndarray:
        """Half-cell-offset sample points, ``m`` per axis, as a ``(m**n, n)`` array."""
        axes = [lo + (np.arange(m) + 0.5) * (hi - lo) / m for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in mesh], axis=-1)

    def check_immersion(self, m: int = 12, tol: float = 1e-8) -> float:
        """Smallest Jacobian singular value over a sample grid; raises below ``tol``."""
        u = self.sample_grid(m)
        p, dp, _, _ = self.evaluate(u)
        if not self.model.contains(p, tol=1e-9):
            raise ImmersionError(f"{self.name}: sample points leave the model")
        smin = float(np.min(np.linalg.svd(dp, compute_uv=False)[:, -1]))
        if not smin > tol:
            raise ImmersionError(f"{self.name}: Jacobian singular value {smin:.3e} below {tol}")
        return smin


def sphere_coords(u):
    """Unit ``S^m`` as ``m + 1`` jets in the coordinates of :func:`_sphere_axes`.

    ``S^3`` uses Hopf coordinates ``(eta, xi1, xi2)``, whose only degenerate
    axis collapses one circle at each end; other dimensions use
    hyperspherical angles.
    """
    if len(u) == 3:
        eta, xi1, xi2 = u
        ce, se = J.cos(eta), J.sin(eta)
        return [ce * J.cos(xi1), ce * J.sin(xi1), se * J.cos(xi2), se * J.sin(xi2)]
    return hyperspherical_coords(u)


def hyperspherical_coords(u):
    """Unit ``S^m`` in hyperspherical angles ``u[0..m-1]``: ``m + 1`` jets."""
    m = len(u)
    out = []
    prod = None
    for k in range(m):
        ck = J.cos(u[k])
        out.append(ck if prod is None else prod * ck)
        sk = J.sin(u[k])
        prod = sk if prod is None else prod * sk
    # last coordinate closes with the azimuthal sine
    out.append(prod)
    return out


def _sphere_axes(m: int, offset: int):
    if m == 3:
        # eta in (0, pi/2); xi2's circle collapses at 0 and xi1's at pi/2
        lower, upper = [0.0] * 3, [PI / 2, 2 * PI, 2 * PI]
        gl = Gluing(shift=(offset + 2,), upper=Gluing(shift=(offset + 1,)))
        return lower, upper, [False, True, True], [gl, None, None]
    lower = [0.0] * m
    upper = [PI] * (m - 1) + [2 * PI]
    periodic = [False] * (m - 1) + [True]
    gluing = []
    for k in range(m - 1):
        flip = tuple(offset + j for j in range(k + 1, m - 1))
        gluing.append(Gluing(flip=flip, shift=(offset + m - 1,)))
    gluing.append(None)
    return lower, upper, periodic, gluing


def _sphere_chart(model, formula, name, m=None):
    m = model.n if m is None else m
    lower, upper, periodic, gluing = _sphere_axes(m, 0)
    return Chart(model, tuple(lower), tuple(upper), tuple(periodic), tuple(gluing), formula, name)


def _orient(chart: Chart, u0, normal) -> Chart:
    """Fix the orientation so that the computed normal at ``u0`` agrees with ``normal``."""
    from .extrinsic import unit_normal

    p, dp, _, _ = chart.evaluate(np.atleast_2d(u0))
    N = unit_normal(chart.model, p, dp, 1)
    s = np.sign(ambient_inner(chart.model, N[0], np.asarray(normal, dtype=float)))
    if s == 0:
        raise ValueError("reference normal is tangent")
    return replace(chart, orientation=int(s))


def _interior_point(chart: Chart):
    return np.array([lo + 0.37 * (hi - lo) for lo, hi in zip(chart.lower, chart.upper)])


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    chart: Chart
    known_H: Optional[float] = None
    known_A_sq: Optional[float] = None
    is_biharmonic: bool = False
    is_minimal: bool = False
    principal_curvatures: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    @property
    def model(self) -> SpaceFormModel:
        return self.chart.model

    @property
    def is_cmc(self) -> bool:
        return self.known_H is not None

    def flipped(self) -> "CatalogEntry":
        kH = None if self.known_H is None else -self.known_H
        pc = None if self.principal_curvatures is None else tuple(-k for k in self.principal_curvatures)
        return replace(self, chart=self.chart.flipped(), known_H=kH, principal_curvatures=pc)

    def transformed(self, L) -> "CatalogEntry":
        return replace(self, chart=self.chart.transformed(L))

    def with_base_point(self, x0) -> "CatalogEntry":
        return replace(self, chart=self.chart.with_base_point(x0))


def _constant(u, value):
    return J.Jet.constant(value, u[0].v.shape[0], len(u), u[0].v.dtype)


def _require_sphere(c):
    if not c > 0:
        raise ValueError("this catalog entry lives in a sphere: c must be positive")


def equator(n: int = 2, c: float = 1.0) -> CatalogEntry:
    """Totally geodesic great hypersphere of ``S^{n+1}(1/sqrt c)``."""
    _require_sphere(c)
    model = SpaceFormModel(c, n)
    R = model.radius

    def formula(u):
        return [s * R for s in sphere_coords(u)] + [_constant(u, 0.0)]

    chart = _sphere_chart(model, formula, "equator")
    up = np.zeros(n + 2)
    up[-1] = 1.0
    chart = _orient(chart, _interior_point(chart), up)
    return CatalogEntry("equator", chart, known_H=0.0, known_A_sq=0.0, is_biharmonic=True,
                        is_minimal=True, principal_curvatures=(0.0,) * n, params={"n": n, "c": c})


def small_hypersphere(n: int = 2, r: Optional[float] = None, c: float = 1.0) -> CatalogEntry:
    """Geodesic hypersphere of Euclidean radius ``r`` centred at the base point.

    The normal points towards the base point, so the mean curvature is
    ``sqrt(1 - c r^2) / r > 0``. Biharmonic exactly when ``r = 1/sqrt(2c)``.
    """
    _require_sphere(c)
    model = SpaceFormModel(c, n)
    if r is None:
        r = 1.0 / math.sqrt(2.0 * c)
    if not 0 < r < model.radius:
        raise ValueError(f"radius must lie in (0, {model.radius})")
    height = math.sqrt(1.0 / c - r * r)

    def formula(u):
        return [s * r for s in sphere_coords(u)] + [_constant(u, height)]

    chart = _sphere_chart(model, formula, "small-sphere")
    u0 = _interior_point(chart)
    p0 = chart.evaluate(u0)[0][0]
    chart = _orient(chart, u0, model.base_point - p0)
    kappa = math.sqrt(1.0 - c * r * r) / r
    bih = abs(r - 1.0 / math.sqrt(2.0 * c)) < 1e-12
    return CatalogEntry("small-sphere", chart, known_H=kappa, known_A_sq=n * kappa**2,
                        is_biharmonic=bih, principal_curvatures=(kappa,) * n,
                        params={"n": n, "r": r, "c": c})


def product_sphere(n1: int = 1, n2: int = 2, r1: Optional[float] = None,
                   r2: Optional[float] = None, c: float = 1.0) -> CatalogEntry:
    """Generalized Clifford torus ``S^{n1}(r1) x S^{n2}(r2)`` in ``S^{n+1}(1/sqrt c)``.

    Oriented so the principal curvatures are ``sqrt(c) r2/r1`` (``n1`` times)
    and ``-sqrt(c) r1/r2`` (``n2`` times).
    """
    _require_sphere(c)
    if n1 < 1 or n2 < 1:
        raise ValueError("factor dimensions must be >= 1")
    if r1 is None and r2 is None:
        r1 = r2 = 1.0 / math.sqrt(2.0 * c)
    elif r2 is None:
        r2 = math.sqrt(1.0 / c - r1 * r1)
    elif r1 is None:
        r1 = math.sqrt(1.0 / c - r2 * r2)
    if abs(r1 * r1 + r2 * r2 - 1.0 / c) > 1e-12 or r1 <= 0 or r2 <= 0:
        raise ValueError("radii must satisfy r1^2 + r2^2 = 1/c")
    n = n1 + n2
    model = SpaceFormModel(c, n)

    def formula(u):
        a = [s * r1 for s in sphere_coords(u[:n1])]
        b = [s * r2 for s in sphere_coords(u[n1:])]
        return a + b

    lo1, hi1, per1, gl1 = _sphere_axes(n1, 0)
    lo2, hi2, per2, gl2 = _sphere_axes(n2, n1)
    chart = Chart(model, tuple(lo1 + lo2), tuple(hi1 + hi2), tuple(per1 + per2),
                  tuple(gl1 + gl2), formula, f"clifford:{n1}x{n2}")
    u0 = _interior_point(chart)
    p0 = chart.evaluate(u0)[0][0]
    s1, s2 = p0[: n1 + 1] / r1, p0[n1 + 1:] / r2
    normal = math.sqrt(c) * np.concatenate([-r2 * s1, r1 * s2])
    chart = _orient(chart, u0, normal)
    k1, k2 = math.sqrt(c) * r2 / r1, -math.sqrt(c) * r1 / r2
    H = (n1 * k1 + n2 * k2) / n
    minimal = abs(H) < 1e-14
    # constant H, so biharmonic iff H = 0 or |A|^2 = n c
    bih = minimal or abs(r1 - r2) < 1e-12
    return CatalogEntry(f"clifford:{n1}x{n2}", chart, known_H=0.0 if minimal else H,
                        known_A_sq=n1 * k1**2 + n2 * k2**2, is_biharmonic=bih, is_minimal=minimal,
                        principal_curvatures=(k1,) * n1 + (k2,) * n2,
                        params={"n1": n1, "n2": n2, "r1": r1, "r2": r2, "c": c})


def euclidean_sphere(n: int = 2, r: float = 1.0) -> CatalogEntry:
    """Round sphere of radius ``r`` about the origin of ``R^{n+1}``, outward normal."""
    if not r > 0:
        raise ValueError("radius must be positive")
    model = SpaceFormModel(0.0, n)

    def formula(u):
        return [s * r for s in sphere_coords(u)]

    chart = _sphere_chart(model, formula, "euclidean-sphere")
    u0 = _interior_point(chart)
    chart = _orient(chart, u0, chart.evaluate(u0)[0][0])
    return CatalogEntry("euclidean-sphere", chart, known_H=-1.0 / r, known_A_sq=n / r**2,
                        principal_curvatures=(-1.0 / r,) * n, params={"n": n, "r": r})


def ellipsoid(semiaxes=(2.0, 1.0, 1.0)) -> CatalogEntry:
    """Ellipsoid ``sum (x_i / a_i)^2 = 1`` in ``R^{n+1}``, outward normal."""
    a = tuple(float(x) for x in semiaxes)
    if len(a) < 3 or min(a) <= 0:
        raise ValueError("need at least three positive semiaxes")
    n = len(a) - 1
    model = SpaceFormModel(0.0, n)

    def formula(u):
        return [s * ai for s, ai in zip(sphere_coords(u), a)]

    chart = _sphere_chart(model, formula, "ellipsoid")
    u0 = _interior_point(chart)
    p0 = chart.evaluate(u0)[0][0]
    chart = _orient(chart, u0, p0 / np.square(a))
    entry = CatalogEntry("ellipsoid", chart, params={"semiaxes": a})
    if len(set(a)) == 1:
        r = a[0]
        entry = replace(entry, known_H=-1.0 / r, known_A_sq=n / r**2,
                        principal_curvatures=(-1.0 / r,) * n)
    return entry


def band_limited_waves(dim: int, seed: int, modes: float, count: int = 4, stream: int = 0):
    """Seeded plane waves ``(amplitudes, wavevectors, phases)`` with ``|k| <= modes``."""
    rng = np.random.default_rng([seed, stream])
    k = rng.normal(size=(count, dim))
    k /= np.linalg.norm(k, axis=1, keepdims=True)
    k *= modes * rng.uniform(0.5, 1.0, size=(count, 1))
    amp = rng.uniform(-1.0, 1.0, size=count)
    amp /= np.sum(np.abs(amp))
    phase = rng.uniform(0.0, 2 * PI, size=count)
    return amp, k, phase


def perturbed_equator(n: int = 2, c: float = 1.0, amplitude: float = 0.05, seed: int = 7,
                      modes: float = 2.0) -> CatalogEntry:
    """Normal graph over the equator: latitude ``amplitude * h`` for a seeded smooth ``h``.

    ``h`` is a sum of plane waves in the ambient coordinates of the equator
    with ``|h| <= 1``, so it is smooth across the chart poles.
    """
    _require_sphere(c)
    if not abs(amplitude) < PI / 2:
        raise ImmersionError("amplitude must keep the graph away from the poles")
    model = SpaceFormModel(c, n)
    R = model.radius
    amp, k, phase = band_limited_waves(n + 1, seed, modes)

    def formula(u):
        s = sphere_coords(u)
        h = None
        for a_j, k_j, ph in zip(amp, k, phase):
            arg = sum((s_i * float(k_ji) for s_i, k_ji in zip(s, k_j)), start=_constant(u, ph))
            term = J.cos(arg) * float(a_j)
            h = term if h is None else h + term
        lat = h * float(amplitude)
        cl = J.cos(lat) * R
        return [s_i * cl for s_i in s] + [J.sin(lat) * R]

    chart = _sphere_chart(model, formula, "perturbed-equator")
    up = np.zeros(n + 2)
    up[-1] = 1.0
    chart = _orient(chart, _interior_point(chart), up)
    chart.check_immersion()
    entry = CatalogEntry("perturbed-equator", chart,
                         params={"n": n, "c": c, "amp": amplitude, "seed": seed})
    if amplitude == 0:
        entry = replace(entry, known_H=0.0, known_A_sq=0.0, is_biharmonic=True, is_minimal=True,
                        principal_curvatures=(0.0,) * n)
    return entry


def hyperbolic_sphere(n: int = 2, r: float = 1.0, c: float = -1.0) -> CatalogEntry:
    """Geodesic sphere of radius ``r`` about the base point of ``H^{n+1}(c)``, outward normal."""
    if not c < 0:
        raise ValueError("hyperbolic space needs c < 0")
    if not r > 0:
        raise ValueError("radius must be positive")
    model = SpaceFormModel(c, n)
    a = model.radius
    t = r / a

    def formula(u):
        return [s * (a * math.sinh(t)) for s in sphere_coords(u)] + [_constant(u, a * math.cosh(t))]

    chart = _sphere_chart(model, formula, "hyperbolic-sphere")
    u0 = _interior_point(chart)
    p0 = chart.evaluate(u0)[0][0]
    normal = np.append(math.cosh(t) * p0[:-1] / (a * math.sinh(t)), math.sinh(t))
    chart = _orient(chart, u0, normal)
    kappa = -math.sqrt(-c) / math.tanh(t)
    return CatalogEntry("hyperbolic-sphere", chart, known_H=kappa, known_A_sq=n * kappa**2,
                        principal_curvatures=(kappa,) * n, params={"n": n, "r": r, "c": c})


# ---------------------------------------------------------------------------
# name lookup

_BUILDERS = {
    "clifford": product_sphere,
    "ellipsoid": ellipsoid,
    "equator": equator,
    "euclidean-sphere": euclidean_sphere,
    "hyperbolic-sphere": hyperbolic_sphere,
    "perturbed-equator": perturbed_equator,
    "small-sphere": small_hypersphere,
}

_DEFAULTS = {
    "clifford": "n1=1,n2=2",
    "ellipsoid": "2x1x1",
    "equator": "n=2,c=1",
    "euclidean-sphere": "n=2,r=1",
    "hyperbolic-sphere": "n=2,r=1,c=-1",
    "perturbed-equator": "n=2,c=1,amp=0.05,seed=7",
    "small-sphere": "n=2,c=1",
}

_KEY_ALIASES = {"amp": "amplitude", "axes": "semiaxes"}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt}
_CONSTS = {"pi": math.pi}


def parse_number(text: str) -> float:
    """Evaluate a small arithmetic expression such as ``1/sqrt(2)`` or ``0.5*pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            return _FUNCS[node.func.id](*[ev(a) for a in node.args])
        if isinstance(node, ast.Name) and node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ValueError(f"unsupported number expression: {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


def _as_param(key, value):
    if key in ("n", "n1", "n2", "seed"):
        return int(value)
    return parse_number(value)


def parse_entry_name(spec: str):
    """Split ``"clifford:1x2"`` or ``"small-sphere:n=3,r=1/sqrt(2)"`` into ``(kind, kwargs)``."""
    kind, _, rest = spec.strip().partition(":")
    if kind not in _BUILDERS:
        raise KeyError(f"unknown catalog entry {kind!r}; known: {', '.join(sorted(_BUILDERS))}")
    kwargs = {}
    for part in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in part:
            if kind == "clifford" and "x" in part:
                n1, n2 = part.split("x")
                kwargs.update(n1=int(n1), n2=int(n2))
            elif kind == "ellipsoid":
                kwargs["semiaxes"] = tuple(parse_number(x) for x in part.split("x"))
            else:
                raise ValueError(f"cannot parse parameter {part!r} of {kind}")
            continue
        key, value = (s.strip() for s in part.split("=", 1))
        key = _KEY_ALIASES.get(key, key)
        if key == "semiaxes":
            kwargs[key] = tuple(parse_number(x) for x in value.split("x"))
        else:
            kwargs[key] = _as_param(key, value)
    return kind, kwargs


def get_entry(spec: str) -> CatalogEntry:
    kind, kwargs = parse_entry_name(spec)
    try:
        entry = _BUILDERS[kind](**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None
    return replace(entry, name=spec.strip())


def catalog_names():
    return sorted(_BUILDERS)


def default_catalog():
    """One entry per kind with its default parameters, sorted by name."""
    return [get_entry(f"{k}:{_DEFAULTS[k]}") for k in catalog_names()]
