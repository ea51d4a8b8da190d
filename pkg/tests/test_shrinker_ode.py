import math

import numpy as np
import pytest

from oval_lab_app import shrinker_ode as so
from oval_lab_app.errors import UsageError


@pytest.fixture(scope="module")
def bowl():
    return so.solve_bowl(2, rho_max=40.0, h=1e-3)


@pytest.fixture(scope="module")
def cap40():
    return so.shoot_leaf(40.0, 2, y_min=0.0)


@pytest.fixture(scope="module")
def trumpet():
    return so.solve_trumpet(0.5, 2, (0.0, 100.0))


def test_bowl_starts_regular_at_the_axis(bowl):
    assert bowl.psi[0] == 0.0
    assert bowl.slope[0] == 0.0
    assert bowl.curvature[0] == pytest.approx(0.25, abs=1e-6)
    assert bowl.curvature[1] == pytest.approx(0.25, abs=1e-4)
    assert float(bowl(-5.0)) == pytest.approx(float(bowl(5.0)))


def test_bowl_tail_follows_the_expansion(bowl):
    # Ψ′ − (ρ/2 − 2/ρ) = −16/ρ³ − 352/ρ⁵ + … for n = 2
    assert bowl.expansion_residual(np.array([30.0]))[0] * 30.0**3 == pytest.approx(-16.0, rel=0.05)
    assert so.tail_slope(bowl, 15.0, 40.0) == pytest.approx(-3.0, abs=0.4)
    assert np.isfinite(bowl.C0)
    far = np.array([60.0])
    assert bowl(far)[0] == pytest.approx(float(bowl.asymptote(far)[0]))


def test_bowl_rejects_bad_arguments():
    with pytest.raises(UsageError):
        so.solve_bowl(2, rho_max=5.0)
    with pytest.raises(UsageError):
        so.solve_bowl(2, h=0.1)
    with pytest.raises(UsageError):
        so.tail_slope(so.solve_bowl(2, rho_max=10.0, h=1e-2), 15.0, 30.0)


def test_bowl_error_estimate_is_small():
    assert 0.0 <= so.bowl_error_estimate(2) < 1e-5


def test_tip_caps_converge_to_the_bowl_like_inverse_square():
    bowl = so.solve_bowl(2, rho_max=10.0, h=1e-2)
    errors = []
    for a in (40.0, 80.0):
        cap = so.solve_tip_cap(a, M=10.0, n=2, h=1e-2)
        assert cap.psi[0] == 0.0
        assert cap.chi_rho[0] == pytest.approx(0.25)
        errors.append(float(np.max(np.abs(cap.psi - bowl.psi))))
    assert 0.2 <= errors[1] / errors[0] <= 0.35
    with pytest.raises(UsageError):
        so.solve_tip_cap(5.0)


def test_shrinker_residual_vanishes_on_exact_shrinkers():
    y = np.linspace(-1.5, 1.5, 31)
    c = math.sqrt(2.0)
    zero = np.zeros_like(y)
    residual = so.shrinker_residual(y, np.full_like(y, c), zero, zero, 2)
    np.testing.assert_allclose(residual, 0.0, atol=1e-14)
    n = 3
    u = np.sqrt(2.0 * n - y * y)
    uy = -y / u
    uyy = -2.0 * n / u**3
    np.testing.assert_allclose(so.shrinker_residual(y, u, uy, uyy, n), 0.0, atol=1e-12)
    fine = np.linspace(-1.5, 1.5, 3001)
    sampled = so.graph_residual(fine, np.sqrt(2.0 * n - fine**2), n)
    assert np.max(np.abs(sampled[1:-1])) < 1e-5


def test_cap_reaches_the_middle_above_its_lower_bound(cap40):
    assert cap40.kind == "cap"
    assert cap40.a == 40.0
    assert not cap40.turned
    assert cap40.y_star <= 0.0
    assert so.cap_lower_bound_margin(cap40) > 0.0
    assert cap40.sup_residual < 1e-3
    assert cap40.convexity_defect() <= 1e-8
    assert np.all(cap40.u[cap40.y >= 2.0] < math.sqrt(2.0))
    assert set(cap40.to_columns()) == {"y", "u", "u_y", "w", "residual"}


def test_cap_profile_reaches_the_tip(cap40):
    u, uy = cap40.profile_at([40.0, 41.0])
    assert u[0] == pytest.approx(0.0, abs=1e-9)
    assert np.isnan(u[1])
    inside, _ = cap40.profile_at([0.0])
    assert inside[0] == pytest.approx(math.sqrt(2.0) * (1.0 + 1.0 / 40.0**2), rel=1e-4)


def test_w_on_caps(cap40):
    wd = so.w_diagnostic(cap40)
    assert wd.tip_limit == pytest.approx(4.0, abs=1e-3)
    assert wd.clipped_at is not None and wd.clipped_at < 2.0
    assert np.min(wd.w) > 2.0
    band = (wd.y >= 5.0) & (wd.y <= 20.0)
    assert np.all(wd.w[band] <= so.w_upper_barrier(wd.y[band], 40.0, 2))


def test_tip_limit_needs_the_quadratic_regime(cap40):
    tip = cap40.tip
    assert tip.tip_w_limit() == pytest.approx(tip.tip_w_limit(rho_ref=1.0))
    assert tip.tip_w_limit(rho_ref=0.5) == pytest.approx(4.0, abs=1e-3)
    # {M, M/2, M/4} reaches where w has already dropped towards 2
    assert abs(tip.tip_w_limit(rho_ref=tip.M) - 4.0) > 0.1
    for bad in (0.0, 2.0 * tip.M):
        with pytest.raises(UsageError):
            tip.tip_w_limit(rho_ref=bad)


def test_cap_rejects_bad_heights():
    with pytest.raises(UsageError):
        so.shoot_leaf(0.5, 2)
    with pytest.raises(UsageError):
        so.shoot_leaf(20.0, 2, y_min=-1.0)


def test_trumpet_hugs_its_cone(trumpet):
    assert trumpet.kind == "trumpet"
    assert trumpet.y[0] == 0.0
    assert trumpet.y[-1] == pytest.approx(100.0)
    assert trumpet.u[-1] - 50.0 == pytest.approx(0.02, rel=0.05)
    floor = np.maximum(math.sqrt(2.0), 0.5 * trumpet.y)
    assert np.all(trumpet.u >= floor - 1e-9)
    assert np.min(trumpet.uyy[trumpet.y <= 90.0]) >= -1e-6
    wd = so.w_diagnostic(trumpet)
    assert math.isnan(wd.tip_limit)
    far = wd.y >= 20.0
    assert np.max(np.abs(wd.w[far] - 2.0) * wd.y[far] ** 2) <= 16.0


def test_trumpet_seed_and_bad_slopes():
    u, uy = so.trumpet_seed(0.5, 2, 100.0)
    assert u == pytest.approx(50.02)
    assert uy == pytest.approx(0.5 - 1.0 / 5000.0)
    with pytest.raises(UsageError):
        so.solve_trumpet(1.5, 2)
    with pytest.raises(UsageError):
        so.solve_trumpet(0.5, 2, (0.0, 50.0))


def test_hermite_odd_solution_solves_its_equation():
    h = 1e-3
    y = np.linspace(0.5, 4.0, 36)
    v = so.hermite_odd_solution(y)
    vp = (so.hermite_odd_solution(y + h) - so.hermite_odd_solution(y - h)) / (2 * h)
    vpp = (so.hermite_odd_solution(y + h) - 2 * v + so.hermite_odd_solution(y - h)) / h**2
    assert np.max(np.abs(vpp - 0.5 * y * vp + v)) < 1e-4
    assert so.hermite_odd_solution(np.array([0.0]))[0] == 0.0
    with pytest.raises(UsageError):
        so.hermite_odd_solution(np.array([60.0]))


def test_two_point_decomposition_recovers_coefficients():
    y1, y2 = 4.0, 6.0
    v = 3.0 * (np.array([y1, y2]) ** 2 - 2.0) - 2.0 * so.hermite_odd_solution(np.array([y1, y2]))
    alpha, beta = so.two_point_decomposition(y1, v[0], y2, v[1])
    assert alpha == pytest.approx(3.0, rel=1e-9)
    assert beta == pytest.approx(-2.0, rel=1e-9)


@pytest.mark.slow
def test_expansion_sweep_improves_with_height():
    fits = so.expansion_sweep([20.0, 40.0, 80.0], 2)
    assert [f.a for f in fits] == [20.0, 40.0, 80.0]
    outer = [f.outer_residual for f in fits]
    assert outer[0] > outer[1] > outer[2]
    assert fits[2].inner_scaled < fits[0].inner_scaled
    assert math.isnan(fits[0].decay_exponent)
    assert fits[1].decay_exponent > 0
    with pytest.raises(UsageError):
        so.fit_expansions(so.shoot_leaf(15.0, 2), (0.0, 5.0))
