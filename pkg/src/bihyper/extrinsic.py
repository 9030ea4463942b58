"""Pointwise extrinsic and intrinsic geometry of a hypersurface chart.

Conventions: the shape operator is ``A = -dN`` (tangential part), so the
second fundamental form is ``h_ij = <d_i d_j p, N>`` and ``A^i_j = g^{ik} h_kj``.
``H = tr(A) / n`` and the normalized scalar curvature ``S`` is the scalar
curvature divided by ``n(n-1)``. Curvature tensors follow
``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`` with
``Ric_jk = R^i_{ijk}``.

All functions here work on batches: arrays carry a leading sample axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spaceform import SpaceFormModel, ambient_inner, position_vector, theta_at

DEGENERATE_COND = 1e12


class DegenerateMetricError(ValueError):
    pass


def unit_normal(model: SpaceFormModel, p, dp, orientation: int = 1):
    """Unit normal of the hypersurface inside the model, oriented by ``det[p, dp, N]``.

    ``N`` is orthogonal (in the ambient form) to ``p`` when ``c != 0`` and to
    every ``d_i p``; it is obtained as the last column of a complete QR
    factorisation of those vectors.
    """
    eta = model.eta
    cols = [dp[:, i, :] for i in range(dp.shape[1])]
    if model.c != 0:
        cols = [p] + cols
    B = np.stack(cols, axis=-1)
    # unit columns keep the complement accurate where the chart degenerates
    Bs = B * eta[None, :, None]
    Bs = Bs / np.linalg.norm(Bs, axis=1, keepdims=True)
    q, _ = np.linalg.qr(Bs, mode="complete")
    N = q[:, :, -1]
    norm2 = np.sum(N * N * eta, axis=-1)
    if np.any(norm2 <= 0):
        raise DegenerateMetricError("normal construction failed: non-spacelike complement")
    N = N / np.sqrt(norm2)[:, None]
    frame = np.concatenate([B, N[:, :, None]], axis=-1)
    sign = np.sign(np.linalg.det(frame))
    if np.any(sign == 0):
        raise DegenerateMetricError("normal construction failed: dependent frame")
    return N * (orientation * sign)[:, None]


def _eta_project_out(v, basis, eta):
    for q in basis:
        v = v - (np.sum(v * q * eta, axis=-1) / np.sum(q * q * eta, axis=-1))[:, None] * q
    return v


def refine_normal(model: SpaceFormModel, p, dp, N):
    """Re-orthogonalize a unit normal in extended precision.

    Where a chart degenerates the tangent vectors shrink, and the few-ulp
    tangential error of a QR normal then shows up in ``h_ij / g_ij`` divided
    by the shrinking length. Gram-Schmidt in ``longdouble`` removes it.
    Returns a ``longdouble`` array.
    """
    ld = np.longdouble
    eta = model.eta.astype(ld)
    cols = [dp[:, i, :].astype(ld) for i in range(dp.shape[1])]
    if model.c != 0:
        cols = [p.astype(ld)] + cols
    basis = []
    for v in cols:
        basis.append(_eta_project_out(_eta_project_out(v, basis, eta), basis, eta))
    N = _eta_project_out(_eta_project_out(N.astype(ld), basis, eta), basis, eta)
    return N / np.sqrt(np.sum(N * N * eta, axis=-1))[:, None]


def spd_inverse(g):
    """Inverse of a batch of symmetric positive definite matrices, in their own dtype."""
    n = g.shape[-1]
    M = np.concatenate([g, np.broadcast_to(np.eye(n, dtype=g.dtype), g.shape)], axis=-1).copy()
    for k in range(n):
        M[:, k, :] /= M[:, k, k:k + 1]
        for i in range(n):
            if i != k:
                M[:, i, :] -= M[:, i, k:k + 1] * M[:, k, :]
    return M[:, :, n:]


def intrinsic_scalar(g, ginv, gamma1, dgamma1):
    """Ricci tensor and scalar curvature from first-kind Christoffel symbols.

    ``gamma1[b, i, j, k] = Gamma_{ij,k}`` and ``dgamma1[b, m, i, j, k]`` is its
    derivative along parameter ``m``. Returns ``(Ric, scal)``.
    """
    gamma2 = np.einsum("bkl,bijl->bkij", ginv, gamma1)
    dg = gamma1 + np.swapaxes(gamma1, 2, 3)  # d_m g_ab = Gamma_{ma,b} + Gamma_{mb,a}
    dginv = -np.einsum("zla,zmac,zck->zmlk", ginv, dg, ginv)
    # d_m Gamma^l_{jk}
    dgamma2 = (np.einsum("bmlq,bjkq->bmljk", dginv, gamma1)
               + np.einsum("blq,bmjkq->bmljk", ginv, dgamma1))
    # Ric_jk = R^i_{ijk} = d_i G^i_jk - d_j G^i_ik + G^i_im G^m_jk - G^i_jm G^m_ik
    ric = (np.einsum("biijk->bjk", dgamma2)
           - np.einsum("bjiik->bjk", dgamma2)
           + np.einsum("biim,bmjk->bjk", gamma2, gamma2)
           - np.einsum("bijm,bmik->bjk", gamma2, gamma2))
    scal = np.einsum("bjk,bjk->b", ginv, ric)
    return ric, scal


def christoffel_first(eta, dp, d2p):
    """``Gamma_{ij,k} = <d_i d_j p, d_k p>`` for the ambient metric diagonal ``eta``."""
    return np.einsum("bije,bke,e->bijk", d2p, dp, eta)


def christoffel_first_derivative(eta, dp, d2p, d3p):
    return (np.einsum("bmije,bke,e->bmijk", d3p, dp, eta)
            + np.einsum("bije,bmke,e->bmijk", d2p, d2p, eta))


def _fd_christoffel_derivative(chart, u):
    """Central differences of ``Gamma_{ij,k}`` with step ``eps^(1/3)`` per axis."""
    n = chart.param_dim
    step = np.finfo(float).eps ** (1.0 / 3.0) * np.maximum(1.0, np.abs(u))
    out = []
    for m in range(n):
        e = np.zeros(n)
        e[m] = 1.0
        vals = []
        for sgn in (1.0, -1.0):
            _, dp, d2p, _ = chart.evaluate(u + sgn * step[:, m:m + 1] * e)
            vals.append(christoffel_first(chart.model.eta, dp, d2p))
        out.append((vals[0] - vals[1]) / (2 * step[:, m])[:, None, None, None])
    return np.stack(out, axis=1)


def compute_geometry(chart, u, intrinsic: bool = False, christoffel: bool = False):
    """All pointwise quantities at the ``(B, n)`` parameter points ``u`` as a dict of arrays.

    The chart jets and every curvature quantity are computed in ``longdouble``
    and returned as float. Near chart poles the tangent vectors shrink and
    float64 rounding in the jets would be divided by powers of their length.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    model = chart.model
    n = model.n
    ld = np.longdouble
    eta = model.eta.astype(ld)
    p_ld, dp_ld, d2p_ld, d3p_ld = chart.evaluate(u, dtype=ld)
    p, dp = p_ld.astype(float), dp_ld.astype(float)

    g_ld = np.einsum("bie,bje,e->bij", dp_ld, dp_ld, eta)
    g = g_ld.astype(float)
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > DEGENERATE_COND):
        raise DegenerateMetricError(f"{chart.name}: metric condition number {np.max(cond):.3e}")
    N_ld = refine_normal(model, p_ld, dp_ld, unit_normal(model, p, dp, chart.orientation))
    ginv_ld = spd_inverse(g_ld)
    h_ld = np.einsum("bije,be,e->bij", d2p_ld, N_ld, eta)
    A_ld = ginv_ld @ h_ld
    H = (np.trace(A_ld, axis1=1, axis2=2) / n).astype(float)
    A_sq = np.einsum("bij,bji->b", A_ld, A_ld).astype(float)
    N, ginv, h, A = (a.astype(float) for a in (N_ld, ginv_ld, h_ld, A_ld))
    S = model.c + (n * n * H * H - A_sq) / (n * (n - 1))

    X = position_vector(model, p)
    theta = theta_at(model, p)
    rho = ambient_inner(model, X, N)
    xT = np.einsum("bij,bje,be,e->bi", ginv, dp, X, model.eta)
    P1 = n * H[:, None, None] * np.eye(n)[None] - A

    geo = dict(u=u, p=p, dp=dp, g=g, ginv=ginv, J=np.sqrt(np.linalg.det(g)), N=N, h=h, A=A,
               H=H, A_sq=A_sq, S=S, X=X, theta=theta, rho=rho, xT=xT, P1=P1)
    if christoffel or intrinsic:
        gamma1 = christoffel_first(eta, dp_ld, d2p_ld)
        geo["gamma1"] = gamma1.astype(float)
        geo["gamma2"] = np.einsum("bkl,bijl->bkij", ginv_ld, gamma1).astype(float)
    if intrinsic:
        if chart.derivative_mode == "analytic":
            dgamma1 = christoffel_first_derivative(eta, dp_ld, d2p_ld, d3p_ld)
            ric, scal = intrinsic_scalar(g_ld, ginv_ld, gamma1, dgamma1)
        else:
            dgamma1 = _fd_christoffel_derivative(chart, u)
            ric, scal = intrinsic_scalar(g, ginv, geo["gamma1"], dgamma1)
        geo["Ric"] = ric.astype(float)
        geo["S_intrinsic"] = (scal / (n * (n - 1))).astype(float)
    return geo


@dataclass(frozen=True, eq=False)
class PointGeometry:
    """Every pointwise quantity of the immersion at one parameter point."""

    u: np.ndarray
    p: np.ndarray
    tangent_basis: np.ndarray
    g: np.ndarray
    metric_inv: np.ndarray
    N: np.ndarray
    h: np.ndarray
    A: np.ndarray
    H: float
    A_sq: float
    S: float
    S_intrinsic: float
    Ric: np.ndarray
    X: np.ndarray
    rho: float
    xT: np.ndarray
    theta: float
    P1: np.ndarray
    c: float

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def principal_curvatures(self) -> np.ndarray:
        return np.sort(np.linalg.eigvals(self.A).real)


def point_geometry(chart, u) -> PointGeometry:
    u = np.asarray(u, dtype=float)
    geo = compute_geometry(chart, u[None, :], intrinsic=True)
    one = {k: v[0] for k, v in geo.items()}
    return PointGeometry(
        u=u, p=one["p"], tangent_basis=one["dp"], g=one["g"], metric_inv=one["ginv"], N=one["N"],
        h=one["h"], A=one["A"], H=float(one["H"]), A_sq=float(one["A_sq"]), S=float(one["S"]),
        S_intrinsic=float(one["S_intrinsic"]), Ric=one["Ric"], X=one["X"], rho=float(one["rho"]),
        xT=one["xT"], theta=float(one["theta"]), P1=one["P1"], c=chart.model.c,
    )


def ricci_extrinsic(pg: PointGeometry, v, w) -> float:
    """``Ric(v, w) = (n-1) c <v, w> + n H <A v, w> - <A v, A w>`` for coordinate vectors."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    g, A, n = pg.g, pg.A, pg.n
    Av, Aw = A @ v, A @ w
    return float((n - 1) * pg.c * v @ g @ w + n * pg.H * Av @ g @ w - Av @ g @ Aw)


def ricci_extrinsic_tensor(c, n, g, h, A, H):
    """Covariant components of the extrinsic Ricci form, batched."""
    AgA = np.einsum("bia,bij,bjk->bak", A, g, A)
    return (n - 1) * c * g + n * H[:, None, None] * h - AgA


def support_and_position(pg: PointGeometry, model: SpaceFormModel):
    """Support function, tangential position components and ``theta_c`` at ``pg``."""
    X = position_vector(model, pg.p[None])[0]
    rho = float(ambient_inner(model, X, pg.N))
    xT = pg.metric_inv @ (pg.tangent_basis * model.eta) @ X
    return rho, xT, float(theta_at(model, pg.p))


def newton_P1(pg: PointGeometry) -> np.ndarray:
    return pg.n * pg.H * np.eye(pg.n) - pg.A
