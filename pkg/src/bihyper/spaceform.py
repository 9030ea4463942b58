"""Simply connected space forms of curvature ``c`` in their standard embeddings.

* ``c > 0``: the round sphere ``<p, p> = 1/c`` in Euclidean ``R^{n+2}``.
* ``c = 0``: Euclidean ``R^{n+1}`` itself.
* ``c < 0``: the upper sheet of ``<p, p>_L = 1/c`` in Lorentzian ``R^{n+1,1}``
  (last coordinate timelike).

Distances are measured from a base point ``x0`` and the position vector of a
point is ``X = psi_c(d) * grad d``. In all three cases this works out to the
ambient vector ``theta_c(d) * p - x0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CLAMP_TOL = 1e-12
_SERIES_CUTOFF = 1e-8


class DomainError(ValueError):
    """Argument outside the region where a space-form quantity is defined."""


def _check_t(c, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("distance must be non-negative")
    if c > 0 and np.any(t >= np.pi / np.sqrt(c)):
        raise DomainError(f"t must be below the injectivity radius pi/sqrt(c) = {np.pi / np.sqrt(c)}")
    return t


def _series_or(c, t, exact, series):
    x = c * t * t
    small = np.abs(x) < _SERIES_CUTOFF
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, series(t, x), exact(t))
    return out if out.ndim else float(out)


def psi(c: float, t):
    """Solution of ``y'' + c y = 0`` with ``y(0) = 0, y'(0) = 1``."""
    t = _check_t(c, t)
    if c == 0:
        return _series_or(c, t, lambda t: t, lambda t, x: t)
    k = np.sqrt(abs(c))
    exact = (lambda t: np.sin(k * t) / k) if c > 0 else (lambda t: np.sinh(k * t) / k)
    # sin(k t)/k = t (1 - x/6 + x^2/120 - ...), x = c t^2
    return _series_or(c, t, exact, lambda t, x: t * (1.0 - x / 6.0 + x * x / 120.0))


def theta(c: float, t):
    """Derivative of :func:`psi` in ``t``: ``cos``, ``1`` or ``cosh``."""
    t = _check_t(c, t)
    if c == 0:
        return _series_or(c, t, np.ones_like, lambda t, x: np.ones_like(t))
    k = np.sqrt(abs(c))
    exact = (lambda t: np.cos(k * t)) if c > 0 else (lambda t: np.cosh(k * t))
    return _series_or(c, t, exact, lambda t, x: 1.0 - x / 2.0 + x * x / 24.0)


@dataclass(frozen=True)
class SpaceFormModel:
    """Ambient space ``M^{n+1}(c)`` with a chosen base point."""

    c: float
    n: int
    base_point: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("hypersurface dimension n must be >= 2")
        if self.base_point is None:
            object.__setattr__(self, "base_point", self.default_base_point())
        else:
            x0 = np.asarray(self.base_point, dtype=float)
            if x0.shape != (self.embed_dim,):
                raise ValueError(f"base point must have {self.embed_dim} coordinates")
            object.__setattr__(self, "base_point", x0)
            if not self.contains(x0):
                raise ValueError("base point is not a point of the model")

    @property
    def embed_dim(self) -> int:
        return self.n + 1 if self.c == 0 else self.n + 2

    @property
    def signature(self) -> str:
        return "lorentzian" if self.c < 0 else "euclidean"

    @property
    def eta(self) -> np.ndarray:
        """Diagonal of the ambient metric."""
        d = np.ones(self.embed_dim)
        if self.c < 0:
            d[-1] = -1.0
        return d

    @property
    def radius(self) -> float:
        """Curvature radius ``1/sqrt|c|`` (``inf`` for flat space)."""
        return np.inf if self.c == 0 else 1.0 / np.sqrt(abs(self.c))

    def default_base_point(self) -> np.ndarray:
        x0 = np.zeros(self.embed_dim)
        if self.c != 0:
            x0[-1] = self.radius
        return x0

    def with_base_point(self, x0) -> "SpaceFormModel":
        return SpaceFormModel(self.c, self.n, np.asarray(x0, dtype=float))

    def inner(self, v, w):
        return ambient_inner(self, v, w)

    def contains(self, p, tol: float = 1e-10) -> bool:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.embed_dim:
            return False
        if self.c == 0:
            return True
        q = ambient_inner(self, p, p)
        ok = np.abs(self.c * q - 1.0) < tol
        if self.c < 0:
            ok = ok & (p[..., -1] > 0)
        return bool(np.all(ok))


def ambient_inner(model: SpaceFormModel, v, w):
    """Ambient bilinear form, broadcasting over leading axes."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape[-1] != model.embed_dim or w.shape[-1] != model.embed_dim:
        raise ValueError(
            f"dimension mismatch: expected {model.embed_dim}, got {v.shape[-1]} and {w.shape[-1]}"
        )
    return np.sum(v * w * model.eta, axis=-1)


def _cos_arg(model, p, q):
    """``c <p, q>``: cosine (c > 0) or hyperbolic cosine (c < 0) of ``sqrt|c| d``."""
    return model.c * ambient_inner(model, p, q)


def geodesic_distance(model: SpaceFormModel, p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = model.c
    if c == 0:
        return np.linalg.norm(q - p, axis=-1)
    a = _cos_arg(model, p, q)
    if c > 0:
        if np.any(a < -1.0 - CLAMP_TOL) or np.any(a > 1.0 + CLAMP_TOL):
            raise DomainError("inner product outside [-1, 1]: points are not on the sphere")
        if np.any(a <= -1.0 + CLAMP_TOL):
            raise DomainError("antipodal points: distance function is not smooth there")
        return np.arccos(np.clip(a, -1.0, 1.0)) / np.sqrt(c)
    if np.any(a < 1.0 - CLAMP_TOL):
        raise DomainError("Lorentzian inner product below 1: points are not on the upper sheet")
    return np.arccosh(np.maximum(a, 1.0)) / np.sqrt(-c)


def theta_at(model: SpaceFormModel, p):
    """``theta_c(d(x0, p))`` evaluated without going through ``d``."""
    p = np.asarray(p, dtype=float)
    if model.c == 0:
        return np.ones(p.shape[:-1])
    return _cos_arg(model, p, model.base_point)


def position_vector(model: SpaceFormModel, p, tol: float = 1e-12):
    """Ambient representation of ``X = psi_c(d) grad d`` at the model points ``p``."""
    p = np.asarray(p, dtype=float)
    x0 = model.base_point
    if np.any(np.linalg.norm(p - x0, axis=-1) < tol):
        raise DomainError("point coincides with the base point")
    th = theta_at(model, p)
    if model.c > 0 and np.any(th <= -1.0 + CLAMP_TOL):
        raise DomainError("point is antipodal to the base point")
    return th[..., None] * p - x0
