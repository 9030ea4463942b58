import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bihyper.charts import get_entry, small_hypersphere
from bihyper.extrinsic import (
    DegenerateMetricError,
    compute_geometry,
    newton_P1,
    point_geometry,
    ricci_extrinsic,
    ricci_extrinsic_tensor,
    spd_inverse,
    support_and_position,
)
from bihyper.spaceform import ambient_inner, position_vector

from test_charts import ALL_ENTRIES, interior_points

ENTRIES = [get_entry(name) for name in ALL_ENTRIES]


def random_points(chart, seed, count=8):
    return interior_points(chart, np.random.default_rng(seed), count)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, len(ENTRIES) - 1), seed=st.integers(0, 2**31))
def test_normal_and_frame_properties(k, seed):
    entry = ENTRIES[k]
    model = entry.model
    geo = compute_geometry(entry.chart, random_points(entry.chart, seed))
    N, dp, p = geo["N"], geo["dp"], geo["p"]
    np.testing.assert_allclose(ambient_inner(model, N, N), 1.0, atol=1e-10)
    np.testing.assert_allclose(ambient_inner(model, dp, N[:, None, :]), 0.0, atol=1e-10)
    if model.c != 0:
        np.testing.assert_allclose(ambient_inner(model, N, p), 0.0, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(geo["g"]) > 0)
    gA = geo["g"] @ geo["A"]
    np.testing.assert_allclose(gA, np.swapaxes(gA, 1, 2), atol=1e-9)
    n = model.n
    assert np.all(geo["A_sq"] - n * geo["H"] ** 2 >= -1e-10)
    # X = x^T + rho N, and the decomposition is orthogonal
    X = position_vector(model, p)
    recon = np.einsum("bi,bie->be", geo["xT"], dp) + geo["rho"][:, None] * N
    np.testing.assert_allclose(recon, X, atol=1e-9)
    xT_sq = np.einsum("bi,bij,bj->b", geo["xT"], geo["g"], geo["xT"])
    np.testing.assert_allclose(xT_sq + geo["rho"] ** 2, ambient_inner(model, X, X), atol=1e-9)


@pytest.mark.parametrize("entry", ENTRIES, ids=ALL_ENTRIES)
def test_gauss_equation_pointwise(entry, rng):
    """The intrinsic curvature of g agrees with the extrinsic Gauss value."""
    geo = compute_geometry(entry.chart, interior_points(entry.chart, rng, 50), intrinsic=True)
    np.testing.assert_allclose(geo["S_intrinsic"], geo["S"], atol=1e-6)


@pytest.mark.parametrize("entry", ENTRIES, ids=ALL_ENTRIES)
def test_intrinsic_ricci_matches_extrinsic(entry, rng):
    geo = compute_geometry(entry.chart, interior_points(entry.chart, rng, 10), intrinsic=True)
    ric = ricci_extrinsic_tensor(entry.model.c, entry.model.n, geo["g"], geo["h"], geo["A"], geo["H"])
    scale = max(1.0, np.max(np.abs(ric)))
    np.testing.assert_allclose(geo["Ric"], ric, atol=1e-8 * scale)


@pytest.mark.parametrize("name", ["ellipsoid:2x1x1", "clifford:1x2", "hyperbolic-sphere:n=2",
                                  "perturbed-equator:seed=7"])
def test_finite_difference_mode_matches_analytic(name, rng):
    entry = get_entry(name)
    fd = replace(entry.chart, derivative_mode="finite_difference")
    u = interior_points(entry.chart, rng, 10)
    a = compute_geometry(entry.chart, u, intrinsic=True)
    b = compute_geometry(fd, u, intrinsic=True)
    np.testing.assert_allclose(b["S_intrinsic"], a["S_intrinsic"], atol=1e-6)
    np.testing.assert_allclose(b["H"], a["H"])


def test_pointwise_examples():
    eq = point_geometry(get_entry("equator").chart, [0.9, 2.0])
    assert eq.H == pytest.approx(0.0, abs=1e-12)
    assert eq.S == pytest.approx(1.0)
    assert abs(eq.rho) == pytest.approx(1.0)
    assert eq.theta == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(eq.xT, 0.0, atol=1e-12)
    np.testing.assert_allclose(newton_P1(eq), 0.0, atol=1e-12)
    e1 = np.array([1.0, 0.0]) / math.sqrt(eq.g[0, 0])
    assert ricci_extrinsic(eq, e1, e1) == pytest.approx(1.0)

    sm = point_geometry(small_hypersphere(2).chart, [0.4, 1.0])
    assert (sm.H, sm.A_sq, sm.S) == pytest.approx((1.0, 2.0, 2.0))


def test_small_sphere_three_ricci_and_newton_operator():
    pg = point_geometry(small_hypersphere(3).chart, [0.5, 1.0, 2.0])
    v = np.array([0.0, 1.0, 0.0]) / math.sqrt(pg.g[1, 1])
    assert ricci_extrinsic(pg, v, v) == pytest.approx(4.0)
    # intrinsic Ricci of S^3(1/sqrt 2) is (n-1)/r^2 = 4
    assert v @ pg.Ric @ v == pytest.approx(4.0, abs=1e-9)
    np.testing.assert_allclose(newton_P1(pg), 2 * np.eye(3), atol=1e-12)
    np.testing.assert_allclose(pg.principal_curvatures, [1.0, 1.0, 1.0], atol=1e-12)


def test_clifford_ricci_against_intrinsic():
    pg = point_geometry(get_entry("clifford:1x2").chart, [1.0, 0.7, 2.0])
    for k in range(3):
        v = np.zeros(3)
        v[k] = 1.0 / math.sqrt(pg.g[k, k])
        assert ricci_extrinsic(pg, v, v) == pytest.approx(v @ pg.Ric @ v, abs=1e-6)


@pytest.mark.parametrize("k", range(20))
def test_newton_trace_on_ellipsoid(k):
    rng = np.random.default_rng(k)
    chart = get_entry("ellipsoid:2x1x1").chart
    pg = point_geometry(chart, interior_points(chart, rng, 1)[0])
    assert np.trace(newton_P1(pg)) == pytest.approx(pg.n * (pg.n - 1) * pg.H)


def test_support_function_on_euclidean_sphere():
    entry = get_entry("euclidean-sphere:n=2,r=2")
    pg = point_geometry(entry.chart, [1.1, 0.3])
    rho, xT, th = support_and_position(pg, entry.model)
    assert rho == pytest.approx(2.0)
    np.testing.assert_allclose(xT, 0.0, atol=1e-12)
    assert th == 1.0


def test_degenerate_metric_at_pole():
    chart = get_entry("equator").chart
    with pytest.raises(DegenerateMetricError):
        compute_geometry(chart, np.array([[0.0, 1.0]]))


def test_spd_inverse(rng):
    B = rng.normal(size=(6, 4, 4))
    g = B @ np.swapaxes(B, 1, 2) + 0.1 * np.eye(4)
    np.testing.assert_allclose(spd_inverse(g), np.linalg.inv(g), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_ricci_collapse_on_tangent_equation(n, rng):
    """If A x = -(n/2) H x then Ric(x, x) = ((n-1)c - 3n^2H^2/4)|x|^2."""
    c = rng.uniform(-1, 1)
    others = rng.normal(size=n - 1)
    # H from the trace: n H = -(n/2) H + sum(others)
    H = others.sum() / (1.5 * n)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = Q @ np.diag(np.concatenate([[-n * H / 2], others])) @ Q.T
    g = np.eye(n)
    x = Q[:, 0] * rng.uniform(0.5, 2.0)
    ric = ricci_extrinsic_tensor(c, n, g[None], (g @ A)[None], A[None], np.array([H]))[0]
    assert x @ ric @ x == pytest.approx(((n - 1) * c - 0.75 * n * n * H * H) * (x @ x), abs=1e-12)
