import math

import numpy as np
import pytest

from oval_lab_app import flow_evolver as fe
from oval_lab_app.errors import UsageError
from oval_lab_app.numerics_core import Grid


def test_sphere_curvatures():
    curve = fe.sphere_curve(2.0, 2, 201)
    kappa, lam = fe.principal_curvatures(curve)
    np.testing.assert_allclose(kappa, 0.5, rtol=1e-9)
    np.testing.assert_allclose(lam, 0.5, rtol=1e-3)
    np.testing.assert_allclose(fe.mean_curvature(curve), 1.0, rtol=1e-3)
    assert fe.convexity_violation(curve) == 0.0
    # the round sphere of radius √(2n) is a rescaled fixed point
    np.testing.assert_allclose(fe.normal_speed(curve), 0.0, atol=1e-3)


def test_sphere_diagnostics():
    state = fe.FlowState(0.0, fe.sphere_curve(1.0, 3, 401))
    diag = fe.diagnostics(state)
    assert diag.dbar == pytest.approx(1.0)
    assert diag.area == pytest.approx(2.0 * math.pi**2, rel=1e-4)
    assert diag.u0 == pytest.approx(1.0, rel=1e-4)
    assert diag.Rmax == pytest.approx(1.0, rel=1e-2)
    big = fe.diagnostics(fe.FlowState(0.0, fe.sphere_curve(2.0, 2, 401)))
    assert big.huisken == pytest.approx(8.0 / math.e, rel=1e-4)
    assert set(diag.to_dict()) >= {"dbar", "Hmax", "Htip", "huisken", "minPy"}


def test_capped_cylinder_geometry():
    c = math.sqrt(2.0)
    curve = fe.capped_cylinder_curve(c, 6.0, 2, 801)
    diag = fe.diagnostics(fe.FlowState(0.0, curve))
    assert diag.u0 == pytest.approx(c, rel=1e-6)
    assert diag.dbar == pytest.approx(6.0 + c, rel=1e-3)
    expected = 2.0 * math.pi * c * 12.0 + 4.0 * math.pi * 2.0
    assert diag.area == pytest.approx(expected, rel=1e-3)
    with pytest.raises(UsageError):
        fe.capped_cylinder_curve(-1.0, 6.0, 2, 101)


def test_rescaling_round_trip():
    curve = fe.sphere_curve(2.0, 2, 51)
    state = fe.FlowState(-4.0, curve, rescaled=False)
    rescaled = fe.rescale_state(state)
    assert rescaled.time == pytest.approx(-math.log(4.0))
    np.testing.assert_allclose(rescaled.curve.r, 0.5 * curve.r)
    back = fe.unrescale_state(rescaled)
    assert back.time == pytest.approx(-4.0)
    np.testing.assert_allclose(back.curve.y, curve.y, atol=1e-12)
    with pytest.raises(UsageError):
        fe.rescale_state(rescaled)
    with pytest.raises(UsageError):
        fe.unrescale_state(back)
    with pytest.raises(UsageError):
        fe.rescale_state(fe.FlowState(1.0, curve, rescaled=False))


def test_stable_step_and_step_guards():
    state = fe.FlowState(0.0, fe.sphere_curve(2.0, 2, 101))
    h = state.curve.spacing
    assert fe.stable_step(state, 0.2) == pytest.approx(0.2 * h * h / 2)
    with pytest.raises(UsageError):
        fe.step_rescaled(state, 0.0)
    with pytest.raises(UsageError):
        fe.step_unrescaled(state, 1e-4)
    with pytest.raises(UsageError):
        fe.evolve(state, -1.0)


def test_graph_samples_of_a_sphere():
    curve = fe.sphere_curve(2.0, 2, 401)
    grid = Grid(3.0, 61)
    u = fe.graph_samples(curve, grid, symmetric=True)
    y = grid.nodes
    assert np.array_equal(u, u[::-1])
    assert np.all(u[np.abs(y) > 2.01] == 0.0)
    inner = np.abs(y) <= 1.5
    np.testing.assert_allclose(u[inner], np.sqrt(4.0 - y[inner] ** 2), atol=1e-4)


def test_run_from_curves():
    curves = [fe.sphere_curve(r, 2, 51) for r in (2.0, 1.9)]
    run = fe.FlowRun.from_curves([-3.0, -2.0], curves)
    assert run.times == [-3.0, -2.0]
    assert run.diagnostics[1].dbar == pytest.approx(1.9)
    with pytest.raises(UsageError):
        fe.FlowRun.from_curves([-3.0], curves)


@pytest.mark.slow
def test_unrescaled_sphere_shrinks_on_schedule():
    state = fe.FlowState(0.0, fe.sphere_curve(1.0, 2, 101), rescaled=False)
    seen = []
    final, run = fe.evolve(state, 0.1, record_every=0.05, on_record=seen.append)
    assert len(run.times) == 3
    assert len(seen) == 3
    assert run.times[-1] == pytest.approx(0.1)
    # R² = R0² − 2nt
    assert run.diagnostics[-1].dbar == pytest.approx(math.sqrt(0.6), rel=1e-2)
    assert run.diagnostics[-1].u0 == pytest.approx(math.sqrt(0.6), rel=1e-2)
    assert fe.convexity_violation(final.curve) == 0.0


@pytest.mark.slow
def test_rescaled_sphere_stays_put():
    state = fe.FlowState(-10.0, fe.sphere_curve(2.0, 2, 401))
    final, run = fe.evolve(state, -9.99, record_every=0.005)
    assert run.rejected == 0
    assert final.time == pytest.approx(-9.99)
    drift = np.abs(np.hypot(final.curve.y, final.curve.r) - 2.0)
    assert drift.max() <= 1e-4


@pytest.mark.slow
def test_rescaled_cylinder_stays_put():
    c = math.sqrt(2.0)
    state = fe.FlowState(-10.0, fe.capped_cylinder_curve(c, 10.0, 2, 801))
    final, run = fe.evolve(state, -9.99, record_every=0.005)
    assert run.rejected == 0
    curve = final.curve
    # the caps move; the middle of the cylinder does not
    middle = np.abs(curve.y) <= 6.0
    assert middle.sum() > 100
    assert np.max(np.abs(curve.r[middle] - c)) <= 1e-4
    assert final.curve.y[-1] > 10.0 + c


@pytest.mark.slow
def test_max_steps_stops_early():
    state = fe.FlowState(0.0, fe.sphere_curve(2.0, 2, 101))
    final, run = fe.evolve(state, 1.0, max_steps=5)
    assert run.steps == 5
    assert final.time < 1.0
    assert run.times[-1] == final.time
