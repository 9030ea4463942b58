import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bihyper.charts import Chart, get_entry
from bihyper.fieldcalc import (
    Grid,
    GridField,
    NotClosedError,
    ResolutionError,
    band_limited_function,
    cheng_yau,
    divergence,
    fejer_weights,
    gradient,
    grid_scalar_curvature,
    hessian,
    hessian_norm_sq,
    inner,
    integrate,
    laplace_beltrami,
    mean,
    metric_trace,
    random_band_limited,
    random_tangent_field,
    sample_function,
    scalar_field,
)
from bihyper.spaceform import SpaceFormModel

from conftest import grid

CLOSED_2D = ["equator", "small-sphere:n=2", "euclidean-sphere:n=2,r=2", "ellipsoid:2x1x1",
             "ellipsoid:1.2x1x0.9", "perturbed-equator:seed=7", "hyperbolic-sphere:n=2",
             "clifford:1x1"]


def coordinate(k):
    return lambda p: p[:, k]


# -- quadrature -------------------------------------------------------------------------

@pytest.mark.parametrize("m", [8, 16, 33])
def test_fejer_rule_integrates_polynomials(m):
    t = (np.arange(m) + 0.5) * np.pi / m
    x, w = np.cos(t), fejer_weights(m)
    for k in range(m):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.sum(w * x**k) == pytest.approx(exact, abs=1e-13)


@pytest.mark.parametrize("name, m, area", [
    ("euclidean-sphere:n=2,r=1", 128, 4 * math.pi),
    ("euclidean-sphere:n=2,r=2", 32, 16 * math.pi),
    ("clifford:1x1", 32, 2 * math.pi**2),
    ("small-sphere:n=3", 16, 2 * math.pi**2 / 2 ** 1.5),
    ("equator:n=3", 16, 2 * math.pi**2),
    ("hyperbolic-sphere:n=2,r=0.7", 32, 4 * math.pi * math.sinh(0.7) ** 2),
    ("clifford:1x2", 16, 2 * math.pi * 4 * math.pi / 2 ** 1.5),
])
def test_areas(name, m, area):
    assert grid(name, m).area == pytest.approx(area, rel=1e-12)


def test_odd_function_integrates_to_zero():
    g = grid("equator", 32)
    for k in range(3):
        assert abs(integrate(sample_function(g, coordinate(k)))) < 1e-14


def test_open_chart_has_no_quadrature():
    def formula(u):
        x, y = u
        return [x, y, x * y * 0.1]

    chart = Chart(SpaceFormModel(0.0, 2), (0.0, 0.0), (1.0, 1.0), (False, False), (None, None),
                  formula, "patch")
    g = Grid(chart, 16)
    with pytest.raises(NotClosedError):
        g.area
    # one-sided differences are exact on cubics
    F = g.nodes[:, 0].reshape(g.shape) ** 3
    np.testing.assert_allclose(g.diff(F, 0), 3 * g.nodes[:, 0].reshape(g.shape) ** 2, atol=1e-12)


def test_resolution_errors():
    chart = get_entry("equator").chart
    with pytest.raises(ResolutionError):
        Grid(chart, 6)
    with pytest.raises(ResolutionError):
        Grid(chart, (16, 17))
    with pytest.raises(ValueError):
        Grid(chart, (16, 16, 16))


# -- operators ----------------------------------------------------------------------------

def test_constant_fields_are_annihilated():
    g = grid("ellipsoid:2x1x1", 16)
    one = scalar_field(g, np.ones(g.shape))
    assert gradient(one).linf() == 0.0
    assert np.max(np.abs(laplace_beltrami(one).values)) < 1e-13
    assert np.max(np.abs(hessian(one).values)) == 0.0
    zero = GridField(g, np.zeros(g.shape + (2,)), 1)
    assert divergence(zero).linf() == 0.0


@pytest.mark.parametrize("k", [0, 1, 2])
def test_first_harmonic_eigenvalue(k):
    """Coordinate functions on the unit sphere satisfy Laplace f = -n f."""
    errs = []
    for m in (16, 32, 64):
        g = grid("equator", m)
        f = sample_function(g, coordinate(k))
        errs.append((laplace_beltrami(f) + 2 * f).linf())
    assert errs[-1] < 1e-5
    assert math.log2(errs[0] / errs[1]) >= 2 and math.log2(errs[1] / errs[2]) >= 2


def test_second_harmonic_eigenvalue():
    g = grid("equator", 64)
    f = sample_function(g, lambda p: p[:, 0] * p[:, 1] + p[:, 2] ** 2 - 1 / 3)
    assert (laplace_beltrami(f) + 6 * f).linf() < 1e-5


def test_three_sphere_harmonic():
    g = grid("equator:n=3", 16)
    f = sample_function(g, coordinate(1))
    assert (laplace_beltrami(f) + 3 * f).linf() < 1e-3


def test_gradient_of_constant_H_vanishes():
    g = grid("small-sphere:n=2", 32)
    assert gradient(g.scalar("H")).linf() < 1e-10


@pytest.mark.parametrize("name", ["ellipsoid:2x1x1", "perturbed-equator:seed=7", "clifford:1x1"])
def test_hessian_symmetry_and_trace(name):
    errs = []
    for m in (16, 32):
        g = grid(name, m)
        f = random_band_limited(g, seed=5)
        Hs = hessian(f)
        asym = np.max(np.abs(Hs.values - np.swapaxes(Hs.values, -1, -2)))
        trace = (metric_trace(Hs) - laplace_beltrami(f)).linf()
        errs.append((asym, trace))
        hess_gap = hessian_norm_sq(GridField(g, 0.5 * (Hs.values + np.swapaxes(Hs.values, -1, -2)), 2))
        assert np.all(hess_gap.values - metric_trace(Hs).values ** 2 / 2 >= -1e-10)
    assert max(errs[0][0], errs[1][0]) < 1e-12
    assert errs[1][1] < 1e-12 or errs[1][1] < errs[0][1] / 4


@pytest.mark.parametrize("name", CLOSED_2D)
def test_integration_by_parts_converges(name):
    res = []
    for m in (16, 32):
        g = grid(name, m)
        f = random_band_limited(g, seed=2)
        V = random_tangent_field(g, seed=3)
        res.append(abs(integrate(f * divergence(V)) + integrate(inner(gradient(f), V))) / g.area)
    assert res[1] < 1e-4
    assert res[1] < 1e-12 or math.log2(res[0] / res[1]) >= 2


@pytest.mark.parametrize("name", CLOSED_2D)
def test_divergence_integrates_to_zero(name):
    g = grid(name, 32)
    assert abs(integrate(divergence(random_tangent_field(g, seed=11)))) / g.area < 1e-6


def test_cheng_yau_operator_special_cases():
    g = grid("equator", 32)
    f = random_band_limited(g, seed=1)
    assert cheng_yau(f).linf() < 1e-12
    g = grid("small-sphere:n=3", 16)
    f = random_band_limited(g, seed=1)
    np.testing.assert_allclose(cheng_yau(f).values, 2 * laplace_beltrami(f).values, atol=1e-10)
    res = []
    for m in (16, 32, 64):
        g = grid("ellipsoid:2x1x1", m)
        res.append(abs(integrate(cheng_yau(random_band_limited(g, seed=4)))) / g.area)
    assert res[-1] < 1e-6
    assert math.log2(res[0] / res[1]) >= 2 and math.log2(res[1] / res[2]) >= 2


def test_grid_scalar_curvature_converges():
    errs = []
    for m in (32, 64):
        g = grid("ellipsoid:2x1x1", m)
        errs.append((grid_scalar_curvature(g) - g.scalar("S")).linf())
    assert errs[1] < 1e-4 and math.log2(errs[0] / errs[1]) >= 2
    g = grid("small-sphere:n=2", 32)
    assert (grid_scalar_curvature(g) - 2.0).linf() < 1e-3


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), s1=st.integers(0, 99), s2=st.integers(0, 99))
def test_laplacian_is_linear(a, b, s1, s2):
    g = grid("ellipsoid:1.2x1x0.9", 16)
    f, h = random_band_limited(g, s1), random_band_limited(g, s2)
    lhs = laplace_beltrami(a * f + b * h)
    rhs = a * laplace_beltrami(f) + b * laplace_beltrami(h)
    assert (lhs - rhs).linf() < 1e-10 * (1 + abs(a) + abs(b)) * max(1.0, lhs.linf())


# -- seeded fields ---------------------------------------------------------------------------

def test_random_fields_are_deterministic():
    g = grid("ellipsoid:2x1x1", 16)
    a, b = random_band_limited(g, 3), random_band_limited(g, 3)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, random_band_limited(g, 4).values)
    np.testing.assert_array_equal(random_tangent_field(g, 3).values, random_tangent_field(g, 3).values)


def test_random_field_is_one_function_across_resolutions():
    for m in (16, 32):
        g = grid("ellipsoid:2x1x1", m)
        f = band_limited_function(3, 3, 2, g.length_scale)
        np.testing.assert_array_equal(random_band_limited(g, 3).values,
                                      f(g["p"].reshape(-1, 3)).reshape(g.shape))


def test_random_field_options():
    g = grid("ellipsoid:2x1x1", 16)
    f = random_band_limited(g, 3, modes=0)
    assert np.ptp(f.values) < 1e-15
    assert abs(mean(random_band_limited(g, 3, zero_mean=True))) < 1e-14
    with pytest.raises(ResolutionError):
        random_band_limited(g, 3, modes=5)


def test_field_shape_checks():
    g = grid("equator", 16)
    with pytest.raises(ValueError):
        GridField(g, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        laplace_beltrami(GridField(g, np.zeros(g.shape + (2,)), 1))
    with pytest.raises(ValueError):
        divergence(scalar_field(g, np.zeros(g.shape)))


def test_chart_jets_give_exact_metric():
    # the grid stores analytic metrics, independent of resolution
    g = grid("euclidean-sphere:n=2,r=2", 16)
    theta = g.nodes[:, 0].reshape(g.shape)
    np.testing.assert_allclose(g["g"][..., 0, 0], 4.0)
    np.testing.assert_allclose(g["g"][..., 1, 1], 4.0 * np.sin(theta) ** 2, atol=1e-14)
