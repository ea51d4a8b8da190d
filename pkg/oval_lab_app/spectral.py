"""
Gaussian-weighted Hermite analysis of the deviation from the cylinder.

The linearized operator ℒψ = ψ_yy − (y/2)ψ_y + ψ is self-adjoint on
L²(e^{−y²/4}dy). Its even eigenfunctions ψ_{2m} are monic polynomials with
eigenvalue 1 − m, so ψ₀ is the only unstable mode, ψ₂ = y² − 2 is neutral and
the rest are stable. A deviation v, truncated smoothly at ℓ = d̄^{1/3}, is
split into these three parts; the neutral coefficient α(τ) drives the
asymptotics of ancient ovals.

Polynomials are numpy coefficient arrays in ascending powers of y.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike, NDArray

from oval_lab_app.errors import QuadratureError, RegimeError, UsageError
from oval_lab_app.numerics_core import (
    Grid,
    check_dimension,
    diff,
    weighted_inner,
    weighted_norm,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_MODES = 7
# Shortest τ-window on which a mode classification is attempted.
MIN_CLASSIFY_SPAN = 10.0
# Fraction of d̄ over which the untruncated neutral coefficient is taken.
WIDE_REACH = 0.9


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


def hermite(m: int) -> FloatArray:
    """
    Coefficients of the monic eigenfunction ψ_{2m} of ℒ.

    Built top-down from c_m = 1 by c_{k−1} = −2k(2k−1)/(m−k+1)·c_k, where c_k
    multiplies y^{2k}.
    """
    if m < 0:
        raise UsageError(f"mode index must be non-negative (got {m})")
    coeffs = np.zeros(2 * m + 1)
    coeffs[2 * m] = 1.0
    for k in range(m, 0, -1):
        coeffs[2 * k - 2] = -2.0 * k * (2 * k - 1) / (m - k + 1) * coeffs[2 * k]
    return coeffs


def apply_operator(coeffs: ArrayLike) -> FloatArray:
    """ℒ applied to a polynomial, in polynomial arithmetic."""
    c = np.asarray(coeffs, dtype=np.float64)
    d1 = P.polyder(c, 1) if c.size > 1 else np.zeros(1)
    d2 = P.polyder(c, 2) if c.size > 2 else np.zeros(1)
    out = P.polyadd(d2, -0.5 * P.polymulx(d1))
    return P.polyadd(out, c)


def gaussian_moment(j: int) -> float:
    """∫ y^j e^{−y²/4} dy over the real line."""
    if j < 0:
        raise UsageError("moment order must be non-negative")
    if j % 2:
        return 0.0
    return 2.0 * math.sqrt(math.pi) * math.prod(range(j - 1, 0, -2)) * 2.0 ** (j // 2)


def polynomial_inner(p: ArrayLike, q: ArrayLike) -> float:
    """Exact weighted inner product of two polynomials from Gaussian moments."""
    prod = P.polymul(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64))
    return float(sum(c * gaussian_moment(j) for j, c in enumerate(prod) if c))


def hermite_norm_sq(m: int) -> float:
    """‖ψ_{2m}‖²; 16√π for ψ₂."""
    c = hermite(m)
    return polynomial_inner(c, c)


@dataclass(frozen=True)
class HermiteBasis:
    """
    The first `n_modes` even eigenfunctions sampled on a grid.

    Attributes:
        grid: Quadrature grid; wide enough that the weight is negligible at
            its ends (half-length 20 by default).
        coefficients: ψ₀, ψ₂, … as coefficient arrays.
    """

    grid: Grid
    coefficients: Tuple[FloatArray, ...]

    @classmethod
    def build(cls, n_modes: int = DEFAULT_MODES, grid: Optional[Grid] = None) -> "HermiteBasis":
        if n_modes < 1:
            raise UsageError("the basis needs at least one mode")
        return cls(grid or Grid(20.0, 4001), tuple(hermite(m) for m in range(n_modes)))

    @property
    def n_modes(self) -> int:
        return len(self.coefficients)

    @property
    def eigenvalues(self) -> FloatArray:
        return 1.0 - np.arange(self.n_modes, dtype=np.float64)

    @cached_property
    def norms_sq(self) -> FloatArray:
        """‖ψ_{2m}‖², exact."""
        return np.array([polynomial_inner(c, c) for c in self.coefficients])

    @cached_property
    def values(self) -> FloatArray:
        """Samples, shape (n_modes, grid.count)."""
        y = self.grid.nodes
        return np.vstack([P.polyval(y, c) for c in self.coefficients])

    def coefficient(self, f: ArrayLike, m: int) -> float:
        """⟨f, ψ_{2m}⟩ / ‖ψ_{2m}‖² by quadrature."""
        return weighted_inner(f, self.values[m], self.grid) / float(self.norms_sq[m])

    def gram(self) -> FloatArray:
        """Quadrature Gram matrix of the sampled basis."""
        k = self.n_modes
        out = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                out[i, j] = out[j, i] = weighted_inner(self.values[i], self.values[j], self.grid)
        return out


def reconstruct(f: ArrayLike, basis: HermiteBasis) -> Tuple[FloatArray, FloatArray]:
    """
    Expansion coefficients of f in the basis and the resulting partial sum.

    Even polynomials of degree < 2·n_modes are reproduced exactly.
    """
    coeffs = np.array([basis.coefficient(f, m) for m in range(basis.n_modes)])
    return coeffs, coeffs @ basis.values


def quadratic_form(f: ArrayLike, grid: Grid) -> Tuple[float, float]:
    """(⟨f, ℒf⟩, −∫(f_y² − f²)e^{−y²/4}); equal when f e^{−y²/4} f_y vanishes at the ends."""
    fa = np.asarray(f, dtype=np.float64)
    fy = diff(fa, grid, 1)
    lf = diff(fa, grid, 2) - 0.5 * grid.nodes * fy + fa
    lhs = weighted_inner(fa, lf, grid)
    rhs = -weighted_inner(fy, fy, grid) + weighted_inner(fa, fa, grid)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Cutoff and truncation
# ---------------------------------------------------------------------------


def _smooth_step(t: FloatArray) -> FloatArray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff_bump(s: ArrayLike) -> FloatArray:
    """φ̄(s) = f(2−|s|)/(f(2−|s|) + f(|s|−1)), f(t) = e^{−1/t} for t > 0."""
    a = np.abs(np.asarray(s, dtype=np.float64))
    p = _smooth_step(2.0 - a)
    q = _smooth_step(a - 1.0)
    return p / (p + q)


@dataclass(frozen=True)
class CutoffProfile:
    """φ(y) = φ̄(y/ℓ) sampled on a grid."""

    ell: float
    grid: Grid
    phi: FloatArray

    @classmethod
    def for_diameter(cls, grid: Grid, dbar: float) -> "CutoffProfile":
        if dbar <= 0:
            raise UsageError(f"half-diameter must be positive (got {dbar})")
        ell = dbar ** (1.0 / 3.0)
        if 2.0 * ell > grid.half_length:
            raise UsageError(
                f"cutoff support 2ℓ = {2 * ell:.3g} exceeds the grid half-length {grid.half_length}"
            )
        return cls(ell, grid, cutoff_bump(grid.nodes / ell))

    def transition(self) -> NDArray[np.bool_]:
        """Nodes with ℓ < |y| < 2ℓ, where φ is not locally constant."""
        a = np.abs(self.grid.nodes)
        return (a > self.ell) & (a < 2.0 * self.ell)

    def derivatives(self) -> Tuple[FloatArray, FloatArray]:
        """(φ_y, φ_yy), zero off the transition band."""
        band = self.transition()
        phi_y = np.where(band, diff(self.phi, self.grid, 1), 0.0)
        phi_yy = np.where(band, diff(self.phi, self.grid, 2), 0.0)
        return phi_y, phi_yy


def truncate(v: ArrayLike, grid: Grid, dbar: float) -> Tuple[FloatArray, CutoffProfile]:
    """
    v̄ = φ v, extended by zero beyond 2ℓ.

    Values of v outside |y| < 2ℓ are ignored, so v may be undefined there.

    Raises:
        UsageError: if 2ℓ exceeds the grid half-length.
    """
    cutoff = CutoffProfile.for_diameter(grid, dbar)
    va = np.asarray(v, dtype=np.float64)
    if va.shape != (grid.count,):
        raise UsageError("v must be sampled on the grid")
    support = cutoff.phi > 0
    vbar = np.zeros_like(va)
    vbar[support] = cutoff.phi[support] * va[support]
    return vbar, cutoff


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralSplit:
    V_plus: float
    V_zero: float
    V_minus: float
    alpha: float
    norm: float
    alpha_wide: float = float("nan")

    def to_dict(self) -> Dict[str, float]:
        return {
            "Vplus": self.V_plus,
            "Vzero": self.V_zero,
            "Vminus": self.V_minus,
            "alpha": self.alpha,
        }


def neutral_coefficient(v: ArrayLike, basis: HermiteBasis, reach: float) -> float:
    """
    ⟨v, ψ₂⟩/‖ψ₂‖² over |y| <= reach, with no smooth cutoff.

    With reach = 0.9·d̄ the weight beyond the cut is below e^{−(0.9d̄)²/4}, so
    this is the neutral coefficient of the whole deviation. The truncated
    split keeps only part of ψ₂ (about 56% at d̄ = 10).
    """
    va = np.asarray(v, dtype=np.float64)
    if va.shape != (basis.grid.count,):
        raise UsageError("v must be sampled on the grid")
    if basis.n_modes < 2:
        raise UsageError("the basis needs the neutral mode")
    inside = np.abs(basis.grid.nodes) <= reach
    return basis.coefficient(np.where(inside, va, 0.0), 1)


def project(vbar: ArrayLike, basis: HermiteBasis, rtol: float = 1e-8) -> SpectralSplit:
    """
    Splits v̄ into its unstable, neutral and stable parts.

    V₋ is the complement √(‖v̄‖² − V₊² − V₀²).

    Raises:
        QuadratureError: if the complement is negative beyond rtol·‖v̄‖².
    """
    grid = basis.grid
    va = np.asarray(vbar, dtype=np.float64)
    norm_sq = weighted_inner(va, va, grid)
    c0 = weighted_inner(va, basis.values[0], grid)
    c2 = weighted_inner(va, basis.values[1], grid) if basis.n_modes > 1 else 0.0
    n0 = float(basis.norms_sq[0])
    n2 = float(hermite_norm_sq(1))
    v_plus = abs(c0) / math.sqrt(n0)
    v_zero = abs(c2) / math.sqrt(n2)
    rest = norm_sq - v_plus**2 - v_zero**2
    if rest < -rtol * max(norm_sq, 1e-300):
        raise QuadratureError(
            f"stable-mode remainder is negative ({rest:.3e}, ‖v̄‖² = {norm_sq:.3e})"
        )
    return SpectralSplit(
        V_plus=v_plus,
        V_zero=v_zero,
        V_minus=math.sqrt(max(rest, 0.0)),
        alpha=c2 / n2,
        norm=math.sqrt(max(norm_sq, 0.0)),
    )


# ---------------------------------------------------------------------------
# Error terms of the truncated equation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorTerms:
    """Weighted norms of Ẽ₁, Ẽ₂, Ẽ₃ and of their sum."""

    E1: float
    E2: float
    E3: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return {"E1": self.E1, "E2": self.E2, "E3": self.E3, "E": self.total}


def error_fields(
    v: ArrayLike,
    vbar: ArrayLike,
    cutoff: CutoffProfile,
    n: int,
    dbar: float,
    dbar_rate: float,
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """
    Pointwise Ẽ₁, Ẽ₂, Ẽ₃ of ∂_τ v̄ = ℒv̄ + Ẽ.

    Ẽ₁ = −v v̄/(2(1+v)) − φ·2(n−1)v_y²v_yy/(1+2(n−1)v_y²),
    Ẽ₂ = (−φ_yy + (½ − d̄′/(3d̄)) y φ_y) v and Ẽ₃ = −2φ_y v_y.
    All three vanish where φ = 0.
    """
    check_dimension(n)
    grid = cutoff.grid
    y = grid.nodes
    va = np.asarray(v, dtype=np.float64)
    vb = np.asarray(vbar, dtype=np.float64)
    inside = cutoff.phi > 0
    # undefined samples past the tips never meet a nonzero φ
    vs = np.where(np.isfinite(va), va, 0.0)
    vy = diff(vs, grid, 1)
    vyy = diff(vs, grid, 2)
    phi_y, phi_yy = cutoff.derivatives()
    k = 2.0 * (n - 1)
    e1 = np.zeros_like(va)
    e1[inside] = -va[inside] * vb[inside] / (2.0 * (1.0 + va[inside])) - cutoff.phi[inside] * (
        k * vy[inside] ** 2 * vyy[inside] / (1.0 + k * vy[inside] ** 2)
    )
    drift = 0.5 - dbar_rate / (3.0 * dbar)
    e2 = (-phi_yy + drift * y * phi_y) * vs
    e3 = -2.0 * phi_y * vy
    return e1, e2, e3


def error_terms(
    v: ArrayLike,
    vbar: ArrayLike,
    cutoff: CutoffProfile,
    n: int,
    dbar: float,
    dbar_rate: float,
) -> ErrorTerms:
    """Weighted norms of the error fields; d̄′ comes from the recorded run."""
    e1, e2, e3 = error_fields(v, vbar, cutoff, n, dbar, dbar_rate)
    grid = cutoff.grid
    return ErrorTerms(
        E1=weighted_norm(e1, grid),
        E2=weighted_norm(e2, grid),
        E3=weighted_norm(e3, grid),
        total=weighted_norm(e1 + e2 + e3, grid),
    )


# ---------------------------------------------------------------------------
# Mode dominance and the neutral-mode law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeClassification:
    dominant: str
    fits: Dict[str, float] = field(default_factory=dict)


def _log_slope(x: FloatArray, values: FloatArray) -> float:
    ok = (values > 0) & np.isfinite(values) & np.isfinite(x)
    if np.count_nonzero(ok) < 3:
        return float("nan")
    return float(np.polyfit(x[ok], np.log(values[ok]), 1)[0])


def _median_ratio(num: FloatArray, den: FloatArray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.inf)
    return float(np.median(ratio))


def classify_modes(tau: Sequence[float], splits: Sequence[SpectralSplit]) -> ModeClassification:
    """
    Decides which of V₊ and V₀ dominates a recorded series.

    `plus` needs (V₀+V₋)/V₊ small with V₊ growing exponentially in τ; `zero`
    needs (V₊+V₋)/V₀ small with V₀ decaying in |τ|. Series spanning less than
    10 units of τ are `undetermined`.
    """
    t = np.asarray(tau, dtype=np.float64)
    if t.size != len(splits):
        raise UsageError("one split per τ sample is required")
    if t.size < 3 or float(t.max() - t.min()) < MIN_CLASSIFY_SPAN:
        return ModeClassification("undetermined", {"span": float(np.ptp(t)) if t.size else 0.0})
    vp = np.array([s.V_plus for s in splits])
    v0 = np.array([s.V_zero for s in splits])
    vm = np.array([s.V_minus for s in splits])
    fits = {
        "median_ratio_plus": _median_ratio(v0 + vm, vp),
        "median_ratio_zero": _median_ratio(vp + vm, v0),
        "plus_rate": _log_slope(t, vp),
        "zero_exponent": (
            _log_slope(np.log(np.abs(t)), v0) if np.all(t < 0) else float("nan")
        ),
    }
    rp, rz = fits["median_ratio_plus"], fits["median_ratio_zero"]
    if rp < 1.0 and rp < rz and fits["plus_rate"] > 0.5:
        dominant = "plus"
    elif rz < 1.0 and not fits["zero_exponent"] > 0:
        dominant = "zero"
    else:
        dominant = "undetermined"
    logger.debug("mode classification %s: %s", dominant, fits)
    return ModeClassification(dominant, fits)


@dataclass(frozen=True)
class AlphaTrack:
    """
    Medians of |α|′/α² and −4τ|α| over the window.

    Both are 4 and 1 for |α| = −1/(4τ). The sign of α itself is recorded;
    concave profiles bend inward, so their neutral coefficient is negative.
    """

    slope_check: float
    alpha_fit: float
    sign: int


def track_alpha(tau: Sequence[float], alpha: Sequence[float]) -> AlphaTrack:
    """
    Fits the neutral-mode law to a recorded α series.

    Raises:
        UsageError: for fewer than 3 samples or non-increasing τ.
        RegimeError: if α vanishes or changes sign.
    """
    t = np.asarray(tau, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if t.shape != a.shape or t.size < 3:
        raise UsageError("need matching τ and α series with at least 3 samples")
    if np.any(np.diff(t) <= 0):
        raise UsageError("τ samples must be strictly increasing")
    signs = np.sign(a)
    if np.any(signs == 0) or np.any(signs != signs[0]):
        raise RegimeError("α crosses zero; the neutral mode does not dominate")
    mag = np.abs(a)
    rate = np.gradient(mag, t, edge_order=2)
    return AlphaTrack(
        slope_check=float(np.median(rate / mag**2)),
        alpha_fit=float(np.median(-4.0 * t * mag)),
        sign=int(signs[0]),
    )


def spectral_series(
    tau: Sequence[float],
    profiles: Sequence[ArrayLike],
    dbar: Sequence[float],
    grid: Grid,
    n: int,
    basis: Optional[HermiteBasis] = None,
) -> Tuple[List[SpectralSplit], List[ErrorTerms]]:
    """
    Projections and error norms for each recorded profile of a run.

    d̄′ is the centred difference of d̄ over adjacent records.
    Each split also carries the untruncated neutral coefficient on
    |y| <= WIDE_REACH·d̄ as `alpha_wide`.
    """
    t = np.asarray(tau, dtype=np.float64)
    d = np.asarray(dbar, dtype=np.float64)
    if not (t.size == d.size == len(profiles)) or t.size < 2:
        raise UsageError("need at least two records with matching τ, d̄ and profiles")
    basis = basis or HermiteBasis.build(grid=grid)
    if basis.grid != grid:
        raise UsageError("basis and profiles must share a grid")
    rates = np.gradient(d, t)
    c = math.sqrt(2.0 * (n - 1))
    splits: List[SpectralSplit] = []
    errors: List[ErrorTerms] = []
    for u, dbar_k, rate_k in zip(profiles, d, rates):
        v = np.asarray(u, dtype=np.float64) / c - 1.0
        vbar, cutoff = truncate(v, grid, float(dbar_k))
        wide = neutral_coefficient(v, basis, WIDE_REACH * float(dbar_k))
        splits.append(replace(project(vbar, basis), alpha_wide=wide))
        errors.append(error_terms(v, vbar, cutoff, n, float(dbar_k), float(rate_k)))
    return splits, errors
