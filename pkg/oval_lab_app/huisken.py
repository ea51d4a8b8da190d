"""
The Gaussian-weighted area (Huisken functional) of rotationally symmetric
surfaces, its monotonicity along the rescaled flow, and the two integral
inequalities that control the deviation from the cylinder near y = 0.

Everything here is the reduced one-dimensional functional

    ℋ = ∫ r^{n−1} e^{−(y² + r²)/4} ds

(the (4π)^{−n/2} and sphere-area factors are dropped). For a graph r = u(y)
this reads ∫ u^{n−1} e^{−u²/4} √(1 + u_y²) e^{−y²/4} dy. Graph integrals use
the trapezoid rule on grid nodes, so windows that end on nodes add exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from oval_lab_app.errors import HypothesisViolation, UsageError
from oval_lab_app.numerics_core import (
    ArcCurve,
    Grid,
    RadialProfile,
    check_dimension,
    cylinder_radius,
    diff,
    gaussian_weight,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_DELTA0 = 0.05
DEFAULT_L0 = 4.0
# Slack allowed on ℋ(Γ) ≤ ℋ(Σ) for quadrature error.
HYPOTHESIS_TOL = 1e-9


@dataclass(frozen=True)
class HuiskenValue:
    """A windowed value of the reduced functional over a ≤ |y| ≤ b."""

    value: float
    window: Tuple[float, float]


def cylinder_huisken(n: int) -> float:
    """Closed form (2(n−1)/e)^{(n−1)/2}·2√π for the cylinder of radius √(2(n−1))."""
    check_dimension(n)
    return (2.0 * (n - 1) / math.e) ** ((n - 1) / 2.0) * 2.0 * math.sqrt(math.pi)


def _graph_integrand(u: FloatArray, uy: FloatArray, y: FloatArray, n: int) -> FloatArray:
    return u ** (n - 1) * np.exp(-0.25 * u * u) * np.sqrt(1.0 + uy * uy) * gaussian_weight(y)


def _window_mask(y: FloatArray, window: Tuple[float, float], half_length: float) -> FloatArray:
    lo, hi = window
    if lo < 0 or hi <= lo:
        raise UsageError(f"window must satisfy 0 ≤ a < b (got {window})")
    tol = 1e-9 * max(1.0, half_length)
    if hi > half_length + tol:
        raise UsageError(f"window {window} extends past the grid half-length {half_length}")
    absy = np.abs(y)
    return (absy >= lo - tol) & (absy <= hi + tol)


def _side_integral(values: FloatArray, y: FloatArray, mask: FloatArray) -> float:
    """Trapezoid sum over each connected run of the mask."""
    total = 0.0
    idx = np.flatnonzero(mask)
    if idx.size < 2:
        return 0.0
    breaks = np.flatnonzero(np.diff(idx) > 1)
    for run in np.split(idx, breaks + 1):
        if run.size >= 2:
            total += float(integrate.trapezoid(values[run], x=y[run]))
    return total


def huisken_graph(
    profile: RadialProfile, window: Optional[Tuple[float, float]] = None
) -> HuiskenValue:
    """
    ℋ of the graph r = u(y) over the window a ≤ |y| ≤ b.

    Args:
        profile: Sampled radius; u must be positive on the window.
        window: (a, b) in |y|; the whole grid when omitted.

    Raises:
        UsageError: if the window leaves the grid or u ≤ 0 on it.
    """
    grid = profile.grid
    y = grid.nodes
    win = window if window is not None else (0.0, grid.half_length)
    mask = _window_mask(y, win, grid.half_length)
    inside = mask.copy()
    inside[0] = inside[-1] = False
    if np.any(profile.u[inside] <= 0):
        raise UsageError("u must be positive on the Huisken window")
    uy = profile.derivative(1)
    values = _graph_integrand(profile.u, uy, y, profile.n)
    return HuiskenValue(_side_integral(values, y, mask), (float(win[0]), float(win[1])))


def huisken_curve(y: ArrayLike, r: ArrayLike, n: int) -> float:
    """ℋ of a closed generating curve, by the trapezoid rule in chord arclength."""
    y = np.asarray(y, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    check_dimension(n)
    seg = np.hypot(np.diff(y), np.diff(r))
    s = np.concatenate(([0.0], np.cumsum(seg)))
    values = np.maximum(r, 0.0) ** (n - 1) * np.exp(-0.25 * (y * y + r * r))
    return float(integrate.trapezoid(values, x=s))


def dissipation_integrand(curve: ArcCurve, H: ArrayLike) -> FloatArray:
    """(H − ½⟨X, N⟩)² r^{n−1} e^{−|X|²/4} at the nodes of a curve."""
    H = np.asarray(H, dtype=np.float64)
    if H.shape != curve.y.shape:
        raise UsageError("mean curvature must be sampled on the curve nodes")
    x_dot_n = -curve.y * np.sin(curve.theta) + curve.r * np.cos(curve.theta)
    weight = curve.r ** (curve.n - 1) * np.exp(-0.25 * (curve.y**2 + curve.r**2))
    return (H - 0.5 * x_dot_n) ** 2 * weight


def dissipation(curve: ArcCurve, H: ArrayLike) -> float:
    """∫ (H − ½⟨X, N⟩)² r^{n−1} e^{−|X|²/4} ds, the rate at which ℋ decreases."""
    return float(integrate.trapezoid(dissipation_integrand(curve, H), x=curve.arclength))


def graph_dissipation_integrand(
    y: ArrayLike, u: ArrayLike, uy: ArrayLike, uyy: ArrayLike, n: int
) -> FloatArray:
    """
    The same integrand per unit y for a graph r = u(y).

    H − ½⟨X, ν⟩ equals −(u_yy/(1+u_y²) − y u_y/2 + u/2 − (n−1)/u)/√(1+u_y²),
    so it vanishes identically on a self-shrinker.
    """
    y, u, uy, uyy = (np.asarray(a, dtype=np.float64) for a in (y, u, uy, uyy))
    g = np.sqrt(1.0 + uy * uy)
    defect = (uyy / (g * g) - 0.5 * y * uy + 0.5 * u - (n - 1) / u) / g
    return defect**2 * u ** (n - 1) * np.exp(-0.25 * (y * y + u * u)) * g


# ---------------------------------------------------------------------------
# Monotonicity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotonicityReport:
    """
    Finite-difference dℋ/dτ along a recorded run.

    Attributes:
        tau: Recorded times.
        value: ℋ at those times.
        rate: dℋ/dτ (second-order differences on the recorded times).
        dissipation: The dissipation integral, when supplied.
        max_rate: Largest rate; non-positive up to quadrature error.
        max_mismatch: max |rate + dissipation|, NaN without dissipation.
    """

    tau: FloatArray
    value: FloatArray
    rate: FloatArray
    dissipation: Optional[FloatArray]
    max_rate: float
    max_mismatch: float

    def is_monotone(self, tol: float = 1e-6) -> bool:
        return bool(self.max_rate <= tol)


def monotonicity_series(
    tau: Sequence[float],
    values: Sequence[float],
    dissipation_values: Optional[Sequence[float]] = None,
) -> MonotonicityReport:
    """
    dℋ/dτ of a recorded run, optionally cross-checked against the dissipation.

    Raises:
        UsageError: for fewer than 3 samples or times that do not increase.
    """
    t = np.asarray(tau, dtype=np.float64)
    h = np.asarray(values, dtype=np.float64)
    if t.shape != h.shape or t.size < 3:
        raise UsageError("need matching τ and ℋ series with at least 3 samples")
    if np.any(np.diff(t) <= 0):
        raise UsageError("recorded times must be strictly increasing")
    rate = np.gradient(h, t, edge_order=2)
    diss: Optional[FloatArray] = None
    mismatch = float("nan")
    if dissipation_values is not None:
        diss = np.asarray(dissipation_values, dtype=np.float64)
        if diss.shape != t.shape:
            raise UsageError("dissipation series must match the τ samples")
        mismatch = float(np.max(np.abs(rate + diss)))
    max_rate = float(np.max(rate))
    if max_rate > 1e-6:
        logger.warning("ℋ increases along the run: max dℋ/dτ = %.3e", max_rate)
    return MonotonicityReport(t, h, rate, diss, max_rate, mismatch)


# ---------------------------------------------------------------------------
# Inner-outer estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnerOuterReport:
    """
    Gaussian-weighted integrals comparing v on [0, 2L] with v on [0, L].

    ratio_grad = ∫₀^{2L} v_y² e / ∫₀^L v² e and
    ratio_mass = ∫_L^{2L} v² e / ∫₀^L v² e; both are 0 when v vanishes.
    """

    L: float
    delta: float
    close_to_cylinder: bool
    lhs_grad: float
    lhs_mass: float
    rhs: float
    ratio_grad: float
    ratio_mass: float
    huisken: float
    cylinder: float

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "delta": self.delta,
            "close_to_cylinder": self.close_to_cylinder,
            "lhs_grad": self.lhs_grad,
            "lhs_mass": self.lhs_mass,
            "rhs": self.rhs,
            "ratio_grad": self.ratio_grad,
            "ratio_mass": self.ratio_mass,
            "huisken": self.huisken,
            "cylinder": self.cylinder,
        }


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num <= 0 else float("inf")


def inner_outer_check(
    u: ArrayLike,
    grid: Grid,
    n: int,
    L: float,
    delta0: float = DEFAULT_DELTA0,
    huisken_value: Optional[float] = None,
) -> InnerOuterReport:
    """
    Evaluates both sides of the inner-outer estimate for v = u/√(2(n−1)) − 1.

    Closed surfaces may be sampled with u = 0 past their tips; only
    0 ≤ y ≤ 2L enters the integrals.

    Args:
        u: Radius samples on `grid` (even in y).
        grid: Symmetric grid with half-length ≥ 2L.
        n: Surface dimension.
        L: Inner radius.
        delta0: Closeness threshold for sup_{|y| ≤ 4L} |v|.
        huisken_value: ℋ of the whole surface; computed from the graph when
            omitted, which requires u > 0 on the open grid.

    Raises:
        UsageError: for L ≤ 0 or 2L beyond the grid.
        HypothesisViolation: if ℋ of the surface exceeds ℋ of the cylinder.
    """
    check_dimension(n)
    if L <= 0 or 2.0 * L > grid.half_length + 1e-9:
        raise UsageError(f"need 0 < 2L ≤ {grid.half_length} (got L={L})")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (grid.count,):
        raise UsageError("u must be sampled on the grid")
    cyl = cylinder_huisken(n)
    if huisken_value is None:
        huisken_value = huisken_graph(RadialProfile(grid, u, n)).value
    if huisken_value > cyl + HYPOTHESIS_TOL:
        raise HypothesisViolation(
            f"ℋ(Γ) = {huisken_value:.8f} exceeds ℋ(cylinder) = {cyl:.8f}"
        )
    y = grid.nodes
    v = u / cylinder_radius(n) - 1.0
    vy = diff(v, grid, 1)
    near = np.abs(y) <= min(4.0 * L, grid.half_length) + 1e-9
    delta = float(np.max(np.abs(v[near])))
    close = delta <= delta0
    if not close:
        logger.info("sup |v| over |y| ≤ 4L is %.3g > δ0 = %.3g", delta, delta0)

    e = gaussian_weight(y)
    tol = 1e-9 * max(1.0, grid.half_length)
    right = y >= -tol
    inner = right & (y <= L + tol)
    outer = right & (y >= L - tol) & (y <= 2.0 * L + tol)
    both = right & (y <= 2.0 * L + tol)
    lhs_grad = _side_integral(vy * vy * e, y, both)
    lhs_mass = _side_integral(v * v * e, y, outer)
    rhs = _side_integral(v * v * e, y, inner)
    return InnerOuterReport(
        L=float(L),
        delta=delta,
        close_to_cylinder=close,
        lhs_grad=lhs_grad,
        lhs_mass=lhs_mass,
        rhs=rhs,
        ratio_grad=_ratio(lhs_grad, rhs),
        ratio_mass=_ratio(lhs_mass, rhs),
        huisken=float(huisken_value),
        cylinder=cyl,
    )


# ---------------------------------------------------------------------------
# Weighted Poincaré inequality on [0, ℓ]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoincareReport:
    lhs: float
    rhs: float
    slack: float


def weighted_poincare_check(
    f: ArrayLike, y: ArrayLike, f_y: Optional[ArrayLike] = None
) -> PoincareReport:
    """
    Both sides of

        ∫₀^ℓ f_y² e + ¼∫₀^ℓ f² e ≥ ¼ ℓ e^{−ℓ²/4} f(ℓ)² + (1/16)∫₀^ℓ y² f² e,

    with e = e^{−y²/4}. Equality holds only for f = C e^{y²/8}.

    Args:
        f: Samples on y.
        y: Increasing abscissae from 0 to ℓ.
        f_y: Exact derivative samples; second-order differences when omitted.
    """
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if y.ndim != 1 or y.size < 3 or f.shape != y.shape:
        raise UsageError("f and y must be matching arrays with at least 3 samples")
    if abs(y[0]) > 1e-12 or np.any(np.diff(y) <= 0):
        raise UsageError("y must increase from 0")
    if f_y is None:
        fy = np.gradient(f, y, edge_order=2)
    else:
        fy = np.asarray(f_y, dtype=np.float64)
        if fy.shape != y.shape:
            raise UsageError("f_y must match y")
    e = gaussian_weight(y)
    ell = float(y[-1])
    lhs = float(integrate.simpson(fy * fy * e, x=y)) + 0.25 * float(
        integrate.simpson(f * f * e, x=y)
    )
    rhs = 0.25 * ell * math.exp(-0.25 * ell * ell) * float(f[-1]) ** 2 + float(
        integrate.simpson(y * y * f * f * e, x=y)
    ) / 16.0
    return PoincareReport(lhs, rhs, lhs - rhs)
