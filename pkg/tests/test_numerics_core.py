import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oval_lab_app import numerics_core as nc
from oval_lab_app.errors import InvalidStateError, UsageError


def test_dimension_checks():
    assert nc.check_dimension(3) == 3
    assert nc.cylinder_radius(2) == pytest.approx(math.sqrt(2.0))
    assert nc.cylinder_radius(3) == pytest.approx(2.0)
    assert nc.sphere_radius(2) == pytest.approx(2.0)
    for bad in (1, 0, 2.5):
        with pytest.raises(UsageError):
            nc.check_dimension(bad)


def test_grid_rejects_even_count_and_bad_length():
    with pytest.raises(UsageError):
        nc.Grid(1.0, 4)
    with pytest.raises(UsageError):
        nc.Grid(-1.0, 5)
    with pytest.raises(UsageError):
        nc.Grid.from_json({"half_length": 1.0})


def test_grid_nodes_are_symmetric_with_zero_on_a_node():
    grid = nc.Grid(20.0, 4001)
    y = grid.nodes
    assert np.array_equal(y, -y[::-1])
    assert y[grid.count // 2] == 0.0
    assert grid.spacing == pytest.approx(0.01)
    assert nc.Grid.from_json(grid.to_json()) == grid
    assert grid.refined().spacing == pytest.approx(0.005)


def test_grid_from_spacing():
    grid = nc.Grid.from_spacing(10.0, 0.1)
    assert grid.count == 201
    assert grid.spacing == pytest.approx(0.1)


def test_gaussian_moments():
    grid = nc.Grid(20.0, 4001)
    y = grid.nodes
    one = np.ones_like(y)
    assert nc.weighted_inner(one, one, grid) == pytest.approx(2.0 * math.sqrt(math.pi), rel=1e-10)
    assert nc.weighted_inner(y * y, one, grid) == pytest.approx(4.0 * math.sqrt(math.pi), rel=1e-10)
    assert nc.weighted_inner(y, one, grid) == pytest.approx(0.0, abs=1e-12)
    assert nc.weighted_norm(one, grid) == pytest.approx(math.sqrt(2.0 * math.sqrt(math.pi)))


def test_weighted_inner_rejects_mismatched_samples():
    grid = nc.Grid(5.0, 101)
    with pytest.raises(UsageError):
        nc.weighted_inner(np.ones(100), np.ones(101), grid)


def test_diff_is_exact_on_low_degree_polynomials():
    grid = nc.Grid(1.0, 21)
    y = grid.nodes
    np.testing.assert_allclose(nc.diff(y**2, grid, 1), 2.0 * y, atol=1e-10)
    np.testing.assert_allclose(nc.diff(y**3, grid, 2), 6.0 * y, atol=1e-8)
    np.testing.assert_allclose(nc.diff(y**3, grid, 3), np.full_like(y, 6.0), atol=1e-6)


def test_diff_preserves_parity():
    grid = nc.Grid(3.0, 61)
    f = np.cos(grid.nodes)
    d1 = nc.diff(f, grid, 1)
    d2 = nc.diff(f, grid, 2)
    assert np.array_equal(d1, -d1[::-1])
    assert np.array_equal(d2, d2[::-1])


def test_diff_rejects_unknown_order():
    grid = nc.Grid(1.0, 11)
    with pytest.raises(UsageError):
        nc.diff(np.zeros(11), grid, 4)


def test_nonuniform_second_derivative_on_a_parabola():
    x = np.cumsum(np.linspace(0.05, 0.15, 30))
    d1, d2 = nc.nonuniform_second_derivative(x**2, x)
    np.testing.assert_allclose(d1[1:-1], 2.0 * x[1:-1], rtol=1e-10)
    np.testing.assert_allclose(d2, 2.0, rtol=1e-8)


def test_richardson_removes_the_leading_error():
    values = [1.0 + h**2 for h in (1.0, 0.5, 0.25)]
    assert nc.richardson_extrapolate(values, p=2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UsageError):
        nc.richardson_extrapolate([1.0], p=2)


def test_radial_profile_invariants():
    grid = nc.Grid(4.0, 81)
    c = nc.cylinder_radius(2)
    cyl = nc.RadialProfile.from_function(grid, lambda y: c, 2, symmetric=True, convex=True)
    np.testing.assert_allclose(cyl.deviation(), 0.0, atol=1e-15)
    with pytest.raises(InvalidStateError):
        nc.RadialProfile(grid, 1.0 + 0.1 * grid.nodes, 2, symmetric=True)
    with pytest.raises(InvalidStateError):
        nc.RadialProfile(grid, np.cos(grid.nodes), 2)
    with pytest.raises(InvalidStateError):
        nc.RadialProfile(grid, 2.0 + np.cos(grid.nodes), 2, convex=True)


def _circle(radius: float, count: int, n: int = 2) -> nc.ArcCurve:
    phi = np.linspace(0.0, math.pi, count)
    return nc.ArcCurve.from_points(-radius * np.cos(phi), radius * np.sin(phi), n)


def test_arc_curve_of_a_circle():
    curve = _circle(2.0, 401)
    assert curve.theta[0] == pytest.approx(math.pi / 2)
    assert curve.theta[-1] == pytest.approx(-math.pi / 2)
    assert curve.length == pytest.approx(2.0 * math.pi, rel=1e-4)
    assert curve.spacing == pytest.approx(curve.length / 400)
    mirrored = curve.reflected()
    np.testing.assert_allclose(mirrored.y, curve.y, atol=1e-12)
    np.testing.assert_allclose(mirrored.r, curve.r, atol=1e-12)


def test_arc_curve_rejects_broken_curves():
    y = np.linspace(-1.0, 1.0, 9)
    r = 1.0 - y**2
    theta = np.zeros_like(y)
    theta[0], theta[-1] = math.pi / 2, -math.pi / 2
    with pytest.raises(InvalidStateError):
        nc.ArcCurve(y, r + 0.5, theta, 2)
    with pytest.raises(InvalidStateError):
        nc.ArcCurve(y, r, np.zeros_like(y), 2)
    with pytest.raises(InvalidStateError):
        nc.ArcCurve(y[:4], r[:4], theta[:4], 2)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3.0, 3.0), b=st.floats(-3.0, 3.0))
def test_weighted_inner_is_bilinear(a, b):
    grid = nc.Grid(15.0, 1501)
    y = grid.nodes
    f, g, h = np.cos(y), y, np.ones_like(y)
    lhs = nc.weighted_inner(a * f + b * g, h, grid)
    rhs = a * nc.weighted_inner(f, h, grid) + b * nc.weighted_inner(g, h, grid)
    assert lhs == pytest.approx(rhs, abs=1e-9)
