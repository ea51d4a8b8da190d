import math

import numpy as np
import pytest

from oval_lab_app import asymptotics as asy
from oval_lab_app.errors import AnsatzError, ResolutionError, UsageError
from oval_lab_app.flow_evolver import (
    FlowRun,
    convexity_violation,
    diagnostics,
    evolve,
    sphere_curve,
)
from oval_lab_app.numerics_core import ArcCurve, Grid
from oval_lab_app.shrinker_ode import solve_bowl

C = math.sqrt(2.0)
GRID = Grid(20.0, 4001)


@pytest.fixture(scope="module")
def bowl():
    return solve_bowl(2, 40.0, 1e-3)


@pytest.fixture(scope="module")
def oval(bowl):
    return asy.build_ansatz(asy.AnsatzSpec(n=2, tau0=-50.0, nodes=1501), bowl)


@pytest.fixture(scope="module")
def oval_run(oval):
    return FlowRun.from_curves([oval.time], [oval.curve])


def test_spec_validation_and_targets():
    spec = asy.AnsatzSpec(tau0=-50.0)
    assert spec.diameter == pytest.approx(10.0)
    assert spec.top_radius == pytest.approx(C * 1.01)
    for bad in ({"tau0": -20.0}, {"nodes": 10}, {"blend_fraction": 1.0}, {"tip_rho": 0.0}):
        with pytest.raises(UsageError):
            asy.AnsatzSpec(**bad)


def test_ansatz_hits_its_targets(oval):
    curve = oval.curve
    assert oval.time == -50.0
    assert oval.rescaled and oval.symmetric
    assert curve.y[-1] == pytest.approx(10.0, rel=1e-6)
    assert curve.y[0] == pytest.approx(-10.0, rel=1e-6)
    assert convexity_violation(curve) <= 1e-6
    diag = diagnostics(oval)
    assert diag.u0 == pytest.approx(C * 1.01, rel=1e-4)
    assert diag.Htip / math.sqrt(50.0) == pytest.approx(1.0 / math.sqrt(2.0), rel=0.05)
    assert diag.Hmax <= 1.01 * diag.Htip


def test_short_bowl_is_rejected():
    short = solve_bowl(2, 10.0, 1e-2)
    with pytest.raises(AnsatzError):
        asy.ansatz_geometry(asy.AnsatzSpec(tau0=-5000.0), short)


def test_chart_profiles():
    assert asy.parabolic_profile(np.array([C]), -50.0, 2)[0] == pytest.approx(C)
    assert asy.parabolic_profile(np.array([0.0]), -50.0, 2)[0] == pytest.approx(C * 1.01)
    z = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(asy.intermediate_profile(z, 3), [2.0, C, 0.0])


def test_ansatz_sits_in_the_parabolic_and_intermediate_charts(oval_run):
    parabolic = asy.verify_parabolic(oval_run)
    assert parabolic.region == "parabolic"
    assert parabolic.sup_error <= asy.PARABOLIC_BOUND
    intermediate = asy.verify_intermediate(oval_run, barrier=False)
    assert intermediate.sup_error <= asy.INTERMEDIATE_BOUND
    assert "characteristic_residual" not in intermediate.fits
    with pytest.raises(UsageError):
        asy.verify_parabolic(oval_run, M=20.0)
    with pytest.raises(UsageError):
        asy.verify_intermediate(oval_run, z_window=(0.5, 1.5))


def test_global_laws_of_the_ansatz(oval_run):
    report = asy.verify_global(oval_run)
    assert report.sup_error < 1e-6
    assert report.fits["dbar_ratio_min"] == pytest.approx(1.0, abs=1e-6)
    assert 0.6 <= report.fits["Hmax_ratio_min"] <= 0.8
    assert report.fits["Hmax_over_dbar_max"] <= 1.0
    assert "dbar_rate_excess" not in report.fits
    assert report.to_dict()["growth"] == 1.0


def test_harnack_monitor(oval):
    steady = FlowRun.from_curves([-50.0, -49.0], [oval.curve, oval.curve])
    assert asy.verify_global(steady).fits["harnack_drop"] == 0.0
    # H̄ drops from about 5 at the oval tip to 1 on the round sphere
    dropped = FlowRun.from_curves([-50.0, -49.9], [oval.curve, sphere_curve(2.0, 2, 401)])
    assert asy.verify_global(dropped).fits["harnack_drop"] > 0.5


def test_tip_is_the_bowl_inside_the_cap(oval_run, bowl):
    geometry = asy.ansatz_geometry(asy.AnsatzSpec(n=2, tau0=-50.0, nodes=1501), bowl)
    assert geometry.blend_rho == pytest.approx(3.0)
    report = asy.verify_tip(oval_run, bowl, rho_window=geometry.blend_rho, min_nodes=10)
    assert report.sup_error <= asy.TIP_BOUND
    assert report.fits["rho_window"] == pytest.approx(3.0)
    with pytest.raises(ResolutionError):
        asy.tip_distance(oval_run.curves[0], bowl, 3.0, min_nodes=10_000)


def test_tip_window_grows_with_the_start_time():
    assert asy.tip_window(-50.0) == pytest.approx(3.0)
    assert asy.tip_window(-100.0) == pytest.approx(6.0)
    assert asy.tip_window(-200.0) == 10.0
    assert asy.tip_window(-200.0, tip_rho=20.0) == pytest.approx(12.0)


def test_deep_ansatz_is_the_bowl_out_to_the_tip_window(bowl):
    deep = asy.build_ansatz(asy.AnsatzSpec(n=2, tau0=-200.0), bowl)
    run = FlowRun.from_curves([deep.time], [deep.curve])
    assert asy.ansatz_geometry(asy.AnsatzSpec(n=2, tau0=-200.0), bowl).blend_rho == 10.0
    tip = asy.verify_tip(run, bowl)
    assert tip.fits["rho_window"] == 10.0
    assert tip.sup_error <= asy.TIP_BOUND
    assert asy.verify_parabolic(run).sup_error <= asy.PARABOLIC_BOUND
    assert asy.verify_intermediate(run, barrier=False).sup_error <= asy.INTERMEDIATE_BOUND


def test_runs_must_be_rescaled(oval):
    with pytest.raises(UsageError):
        asy.verify_global(FlowRun())
    with pytest.raises(UsageError):
        asy.verify_parabolic(FlowRun.from_curves([1.0], [oval.curve]))


def _scaled(curve, factor):
    return ArcCurve.from_points(curve.y, factor * curve.r, curve.n)


def test_upper_barrier_along_the_characteristic(oval):
    # ū at y = 4 is about 1.315, so v̄(z1, τ1) ≈ −0.27 and w ≈ −0.30 after Δτ = 0.1
    thinner = FlowRun.from_curves([-50.0, -49.9], [oval.curve, _scaled(oval.curve, 0.9)])
    fits = asy.upper_barrier_check(thinner)
    assert fits["upper_barrier_checked"] == 1.0
    assert fits["upper_barrier_violations"] == 0.0
    assert fits["upper_barrier_margin"] < -0.2

    bulged = FlowRun.from_curves([-50.0, -49.9], [oval.curve, _scaled(oval.curve, 1.1)])
    report = asy.verify_intermediate(bulged, barrier=False)
    assert report.fits["upper_barrier_violations"] == 1.0
    assert report.fits["upper_barrier_margin"] > 0.2
    assert not asy.acceptance([report], 2)["upper_barrier"]

    with pytest.raises(UsageError):
        asy.upper_barrier_check(FlowRun.from_curves([oval.time], [oval.curve]))


def test_characteristics_follow_their_law():
    ts, zs = asy.trace_characteristic(4.0, -50.0, -25.0)
    assert ts[0] == -50.0
    assert ts[-1] == pytest.approx(-25.0)
    assert zs[0] == pytest.approx(4.0 / math.sqrt(50.0))
    book = ts - ts[0] - np.log(zs * zs * np.abs(ts) / 16.0)
    assert np.max(np.abs(book)) < 1e-8
    with pytest.raises(UsageError):
        asy.trace_characteristic(4.0, -25.0, -50.0)


def _report(region, sup, errors=(1.0, 1.0), fits=None):
    return asy.RegionReport(region, sup, np.array([-50.0, -40.0]), np.asarray(errors), fits or {})


def test_acceptance_criteria():
    global_fits = {
        "dbar_ratio_min": 0.95,
        "dbar_ratio_max": 1.02,
        "Hmax_ratio_min": 0.65,
        "Hmax_ratio_max": 0.72,
        "Hmax_over_dbar_max": 0.6,
        "dbar_rate_excess": 0.01,
    }
    reports = [
        _report("parabolic", 0.1),
        _report(
            "intermediate",
            0.05,
            fits={"barrier_violations": 0.0, "upper_barrier_violations": 0.0},
        ),
        _report("tip", 0.2),
        _report("global", 0.05, fits=global_fits),
    ]
    baseline = [_report("parabolic", 0.04), _report("tip", 0.3)]
    verdict = asy.acceptance(reports, 2, baseline)
    assert verdict["parabolic"] and verdict["intermediate"] and verdict["lower_barrier"]
    assert verdict["upper_barrier"]
    assert not verdict["tip"]
    assert verdict["diameter"] and verdict["Hmax"] and verdict["Hmax_le_dbar"]
    assert not verdict["dbar_rate"]
    assert not verdict["parabolic_persists"]
    assert verdict["tip_persists"]


@pytest.mark.slow
def test_lower_barrier_holds_at_the_start(oval_run):
    fits = asy.lower_barrier_check(oval_run)
    assert fits["barrier_violations"] == 0.0
    assert fits["barrier_margin"] >= 0.0
    assert 0.25 <= fits["K1"] <= 1.0 / (4.0 * 0.3**2)


@pytest.mark.slow
def test_verify_all_reports_every_region(oval_run, bowl):
    reports = asy.verify_all(oval_run, bowl, barrier=False)
    assert [r.region for r in reports] == ["parabolic", "intermediate", "tip", "global"]
    verdict = asy.acceptance(reports, 2, baseline=reports)
    assert verdict["parabolic"] and verdict["intermediate"] and verdict["diameter"]
    assert all(verdict[f"{r.region}_persists"] for r in reports if r.sup_error > 0)


def test_inner_outer_ratios_of_the_shrinking_sphere():
    sphere = sphere_curve(2.0, 2, 401)
    run = FlowRun.from_curves([-50.0, -49.9], [sphere, sphere])
    report = asy.verify_inner_outer(run, GRID)
    assert report.region == "inner_outer"
    assert report.fits["pairs"] == 6.0
    assert report.fits["skipped"] == 0.0
    assert math.isfinite(report.fits["grad_spread"])
    assert math.isfinite(report.fits["mass_L2_spread"])
    assert report.errors.shape == (2,)
    with pytest.raises(UsageError):
        asy.verify_inner_outer(run, GRID, lengths=(12.0,))


def test_acceptance_of_the_run_level_laws():
    monotone = {
        "max_rate": -1e-3,
        "max_mismatch": 1e-4,
        "Rmax": 1.002,
        "min_Py": -1e-4,
        "min_Qy": 0.0,
        "argmax_at_tip": 1.0,
    }
    alpha = {
        "slope_check": 3.8,
        "alpha_fit": 1.02,
        "sign": -1.0,
        "truncation_bias": 0.56,
        "zero_dominant": float("nan"),
    }
    spread = {"grad_spread": 1.5, "mass_L2_spread": 2.5}
    reports = [
        _report("monotonicity", 0.0, fits=monotone),
        _report("alpha", 0.02, fits=alpha),
        _report("inner_outer", 3.0, fits=spread),
    ]
    verdict = asy.acceptance(reports, 2)
    assert verdict["huisken_monotone"] and verdict["Rmax"] and verdict["PQ_monotone"]
    assert verdict["argmax_at_tip"]
    assert verdict["alpha_law"]
    assert "zero_mode" not in verdict
    assert not verdict["inner_outer"]

    alpha.update(slope_check=3.2, zero_dominant=1.0)
    monotone.update(Rmax=1.05)
    verdict = asy.acceptance(reports, 2)
    assert not verdict["alpha_law"]
    assert verdict["zero_mode"]
    assert not verdict["Rmax"]


@pytest.fixture(scope="module")
def evolved(oval):
    _, run = evolve(oval, -49.75, record_every=0.025)
    return run


@pytest.mark.slow
def test_evolved_ansatz_follows_the_alpha_law(evolved):
    assert len(evolved.times) == 11
    report = asy.verify_alpha(evolved, GRID)
    fits = report.fits
    assert fits["sign"] == -1.0
    assert asy.ALPHA_SLOPE_WINDOW[0] <= fits["slope_check"] <= asy.ALPHA_SLOPE_WINDOW[1]
    assert asy.ALPHA_FIT_WINDOW[0] <= fits["alpha_fit"] <= asy.ALPHA_FIT_WINDOW[1]
    # truncating at d̄ ≈ 10 keeps a little over half of the neutral coefficient
    assert 0.4 < fits["truncation_bias"] < 0.7
    verdict = asy.acceptance([report], 2)
    assert verdict["alpha_law"]
    assert "zero_mode" not in verdict


@pytest.mark.slow
def test_monotone_quantities_of_the_evolved_ansatz(evolved):
    report = asy.verify_monotonicity(evolved)
    assert report.region == "monotonicity"
    assert report.errors.shape == (len(evolved.times),)
    assert np.all(report.errors >= 0.0)
    assert set(report.fits) == {
        "max_rate", "max_mismatch", "Rmax", "min_Py", "min_Qy", "argmax_at_tip",
    }
    verdict = asy.acceptance([report], 2)
    assert {"huisken_monotone", "Rmax", "PQ_monotone", "argmax_at_tip"} <= set(verdict)
