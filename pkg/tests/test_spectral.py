import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from oval_lab_app import spectral as sp
from oval_lab_app.errors import RegimeError, UsageError
from oval_lab_app.numerics_core import Grid

GRID = Grid(20.0, 4001)
SQRT_PI = math.sqrt(math.pi)


@pytest.fixture(scope="module")
def basis():
    return sp.HermiteBasis.build(grid=GRID)


def test_hermite_polynomials_are_eigenfunctions():
    np.testing.assert_array_equal(sp.hermite(1), [-2.0, 0.0, 1.0])
    np.testing.assert_array_equal(sp.hermite(2), [12.0, 0.0, -12.0, 0.0, 1.0])
    for m in range(6):
        c = sp.hermite(m)
        np.testing.assert_allclose(P.polysub(sp.apply_operator(c), (1 - m) * c), 0.0, atol=1e-9)
    with pytest.raises(UsageError):
        sp.hermite(-1)


def test_gaussian_moments_and_norms():
    assert sp.gaussian_moment(0) == pytest.approx(2.0 * SQRT_PI)
    assert sp.gaussian_moment(4) == pytest.approx(24.0 * SQRT_PI)
    assert sp.gaussian_moment(3) == 0.0
    assert sp.hermite_norm_sq(1) == pytest.approx(16.0 * SQRT_PI)
    psi2 = sp.hermite(1)
    cubic = sp.polynomial_inner(psi2, P.polymul(psi2, psi2)) / sp.hermite_norm_sq(1)
    assert cubic == pytest.approx(8.0)
    with pytest.raises(UsageError):
        sp.gaussian_moment(-2)


def test_sampled_basis_is_orthogonal(basis):
    gram = basis.gram()
    scale = np.sqrt(np.outer(basis.norms_sq, basis.norms_sq))
    np.testing.assert_allclose(gram / scale, np.eye(basis.n_modes), atol=1e-8)
    np.testing.assert_array_equal(basis.eigenvalues, 1.0 - np.arange(7))
    with pytest.raises(UsageError):
        sp.HermiteBasis.build(0)


def test_reconstruct_reproduces_even_polynomials(basis):
    y = GRID.nodes
    f = 3.0 + y**2 - 0.5 * y**4
    coeffs, partial = sp.reconstruct(f, basis)
    np.testing.assert_allclose(coeffs[:3], [-1.0, -5.0, -0.5], atol=1e-8)
    np.testing.assert_allclose(coeffs[3:], 0.0, atol=1e-8)
    inner = np.abs(y) <= 10.0
    np.testing.assert_allclose(partial[inner], f[inner], rtol=1e-8, atol=1e-8)


def test_quadratic_form_matches_its_integrated_version():
    f = P.polyval(GRID.nodes, sp.hermite(2))
    lhs, rhs = sp.quadratic_form(f, GRID)
    assert lhs == pytest.approx(-sp.hermite_norm_sq(2), rel=1e-3)
    assert rhs == pytest.approx(lhs, rel=1e-3)


def test_cutoff_bump_shape():
    s = np.linspace(-3.0, 3.0, 601)
    phi = sp.cutoff_bump(s)
    assert np.all(phi[np.abs(s) <= 1.0] == 1.0)
    assert np.all(phi[np.abs(s) >= 2.0] == 0.0)
    assert np.array_equal(sp.cutoff_bump(-s), phi)
    assert float(sp.cutoff_bump(1.5)) == pytest.approx(0.5)
    band = (s > 1.0) & (s < 2.0)
    assert np.all(np.diff(phi[band]) <= 0)


def test_cutoff_profile_and_truncation():
    cutoff = sp.CutoffProfile.for_diameter(GRID, 8.0)
    assert cutoff.ell == pytest.approx(2.0)
    phi_y, phi_yy = cutoff.derivatives()
    off = ~cutoff.transition()
    assert np.all(phi_y[off] == 0.0) and np.all(phi_yy[off] == 0.0)
    vbar, _ = sp.truncate(np.ones(GRID.count), GRID, 8.0)
    np.testing.assert_array_equal(vbar, cutoff.phi)
    with pytest.raises(UsageError):
        sp.CutoffProfile.for_diameter(GRID, 2000.0)
    with pytest.raises(UsageError):
        sp.CutoffProfile.for_diameter(GRID, 0.0)
    with pytest.raises(UsageError):
        sp.truncate(np.ones(10), GRID, 8.0)


def test_project_reads_off_the_modes(basis):
    y = GRID.nodes
    psi2 = y**2 - 2.0
    psi4 = P.polyval(y, sp.hermite(2))
    split = sp.project(0.3 - 0.2 * psi2 + 0.1 * psi4, basis)
    assert split.V_plus == pytest.approx(0.3 * math.sqrt(2.0 * SQRT_PI), rel=1e-8)
    assert split.V_zero == pytest.approx(0.2 * 4.0 * math.pi**0.25, rel=1e-8)
    assert split.V_minus == pytest.approx(0.1 * math.sqrt(sp.hermite_norm_sq(2)), rel=1e-6)
    assert split.alpha == pytest.approx(-0.2, rel=1e-8)
    assert set(split.to_dict()) == {"Vplus", "Vzero", "Vminus", "alpha"}


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(-1.0, 1.0),
    b=st.floats(-1.0, 1.0),
    c=st.floats(-0.2, 0.2),
)
def test_split_is_pythagorean(basis, a, b, c):
    y = GRID.nodes
    split = sp.project(a + b * (y**2 - 2.0) + c * np.cos(y), basis)
    total = split.V_plus**2 + split.V_zero**2 + split.V_minus**2
    assert total == pytest.approx(split.norm**2, rel=1e-9, abs=1e-12)


def test_error_fields_vanish_outside_the_cutoff():
    cutoff = sp.CutoffProfile.for_diameter(GRID, 10.0)
    v = 0.05 * np.cos(GRID.nodes)
    vbar = cutoff.phi * v
    fields = sp.error_fields(v, vbar, cutoff, 2, 10.0, -0.1)
    outside = cutoff.phi == 0
    for e in fields:
        assert np.all(e[outside] == 0.0)
    assert np.any(fields[0] != 0.0)
    zero = sp.error_terms(np.zeros(GRID.count), np.zeros(GRID.count), cutoff, 2, 10.0, 0.0)
    assert (zero.E1, zero.E2, zero.E3, zero.total) == (0.0, 0.0, 0.0, 0.0)


def _splits(plus, zero, minus):
    return [
        sp.SpectralSplit(p, z, m, -z, math.sqrt(p * p + z * z + m * m))
        for p, z, m in zip(plus, zero, minus)
    ]


def test_classify_modes():
    tau = np.linspace(-60.0, -30.0, 31)
    neutral = sp.classify_modes(tau, _splits(np.full(31, 1e-6), 1.0 / np.abs(tau), 1e-4 / tau**2))
    assert neutral.dominant == "zero"
    assert neutral.fits["zero_exponent"] == pytest.approx(-1.0, abs=1e-6)
    flat = np.full(31, 1e-3)
    growing = sp.classify_modes(tau, _splits(np.exp(tau + 60.0), flat, flat))
    assert growing.dominant == "plus"
    assert growing.fits["plus_rate"] == pytest.approx(1.0, rel=1e-6)
    short = sp.classify_modes(tau[:5], _splits(np.ones(5), np.ones(5), np.ones(5)))
    assert short.dominant == "undetermined"
    with pytest.raises(UsageError):
        sp.classify_modes(tau, _splits(np.ones(3), np.ones(3), np.ones(3)))


def test_track_alpha_recovers_the_neutral_law():
    tau = np.linspace(-60.0, -30.0, 31)
    track = sp.track_alpha(tau, 1.0 / (4.0 * tau))
    assert track.sign == -1
    assert track.alpha_fit == pytest.approx(1.0)
    assert track.slope_check == pytest.approx(4.0, rel=1e-2)
    with pytest.raises(RegimeError):
        sp.track_alpha(tau, np.sin(tau))
    with pytest.raises(UsageError):
        sp.track_alpha(tau[::-1], 1.0 / (4.0 * tau[::-1]))
    with pytest.raises(UsageError):
        sp.track_alpha(tau[:2], tau[:2])


def test_spectral_series_of_a_neutral_perturbation(basis):
    c = math.sqrt(2.0)
    y = GRID.nodes
    profiles = [c * np.ones_like(y), c * (1.0 + 0.01 * (y**2 - 2.0))]
    splits, errors = sp.spectral_series([-50.0, -49.0], profiles, [729.0, 729.0], GRID, 2, basis)
    assert splits[0].norm == 0.0
    assert errors[0].total == 0.0
    assert splits[1].alpha == pytest.approx(0.01, rel=1e-4)
    assert splits[1].alpha_wide == pytest.approx(0.01, rel=1e-8)
    assert splits[1].V_plus < 1e-6
    with pytest.raises(UsageError):
        sp.spectral_series([-50.0], profiles[:1], [729.0], GRID, 2)
    with pytest.raises(UsageError):
        sp.spectral_series([-50.0, -49.0], profiles, [729.0, 729.0], Grid(20.0, 2001), 2, basis)


def test_truncation_biases_the_neutral_coefficient(basis):
    y = GRID.nodes
    v = -0.005 * (y**2 - 2.0)
    vbar, cutoff = sp.truncate(v, GRID, 10.0)
    assert cutoff.ell == pytest.approx(10.0 ** (1.0 / 3.0))
    assert sp.project(vbar, basis).alpha / -0.005 == pytest.approx(0.5595, abs=2e-3)
    assert sp.neutral_coefficient(v, basis, 9.0) == pytest.approx(-0.005, rel=1e-6)
    with pytest.raises(UsageError):
        sp.neutral_coefficient(v[:-1], basis, 9.0)
