"""
The rotationally symmetric shrinker and translator ODEs.

Four families of solutions live here:

    * the bowl soliton Ψ(ρ), the unit-speed translator, in the tip chart;
    * tip caps ψ(ρ, a), the same chart for a shrinker meeting the axis at
      y = a, where the shrinker term enters with the small parameter
      ε = 1/(2a²);
    * cap leaves Σ_a, obtained by continuing a tip cap with the arclength
      system for the generating curve until it reaches the requested height
      or turns back;
    * trumpet leaves Σ̃_b, integrated inward from their conical end.

The tip chart writes a cap near its tip as y = a − ψ(ρ)/a, r = ρ/a. The
singular point ρ = 0 is bridged by a short Taylor seed, after which a
fixed-step RK4 takes over. Trumpets decay like e^{-y²/4} towards the cone when
integrated backwards, which makes the inward problem stiff; they go through
scipy's implicit Radau solver instead.

Every leaf is stored as a graph r = u(y) sampled in increasing y, together
with u_y and u_yy taken from the ODE itself, so that later stages can build
cubic Hermite interpolants without differentiating noisy data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from oval_lab_app.errors import IntegrationError, UsageError
from oval_lab_app.integrators import RK4
from oval_lab_app.numerics_core import (
    check_dimension,
    cylinder_radius,
    nonuniform_second_derivative,
    richardson_extrapolate,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Where the Taylor seed hands over to the integrator.
TAYLOR_START = 1e-2
DEFAULT_CAP_EXTENT = 30.0
# Caps with small a cannot use the full extent: the tip chart must end well
# inside the cylinder.
CAP_EXTENT_FRACTION = 0.6
# Smallest ρ whose tip-chart sample is stored in a leaf's graph arrays.
TIP_CHART_CUT = 1.0
DEFAULT_B0 = 1.0
TRUMPET_MIN_Y = 100.0
TRUMPET_SEED_FACTOR = 20.0


# ---------------------------------------------------------------------------
# Tip chart: translator and tip caps
# ---------------------------------------------------------------------------


def _taylor_seed(n: int, eps: float, rho: float) -> Tuple[float, float]:
    """ψ and ψ_ρ from ψ = Aρ² + Bρ⁴, the regular solution at the axis."""
    A = 1.0 / (4.0 * n)
    B = (8.0 * A**3 + eps * A) / (4.0 * (n + 2))
    return A * rho**2 + B * rho**4, 2.0 * A * rho + 4.0 * B * rho**3


def _chi_rate(n: int, eps: float, rho: FloatArray, psi: FloatArray, chi: FloatArray):
    return (1.0 + chi * chi) * (-(n - 1) * chi / rho + 0.5 + eps * (rho * chi - psi))


def _tip_rhs(n: int, eps: float) -> Callable[[float, FloatArray], FloatArray]:
    def rhs(rho: float, x: FloatArray) -> FloatArray:
        psi, chi = float(x[0]), float(x[1])
        rate = (1.0 + chi * chi) * (-(n - 1) * chi / rho + 0.5 + eps * (rho * chi - psi))
        return np.array([chi, rate])

    return rhs


def _integrate_tip_chart(
    n: int, eps: float, rho_max: float, h: float, steps: Optional[int] = None
) -> Tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """Integrates the tip-chart ODE from the Taylor seed to rho_max."""
    if steps is None:
        steps = max(1, int(math.ceil((rho_max - TAYLOR_START) / h)))
    step = (rho_max - TAYLOR_START) / steps
    seed = _taylor_seed(n, eps, TAYLOR_START)
    ts, xs, _ = RK4().integrate(_tip_rhs(n, eps), TAYLOR_START, seed, step, steps)
    rho = np.concatenate(([0.0], ts))
    psi = np.concatenate(([0.0], xs[:, 0]))
    chi = np.concatenate(([0.0], xs[:, 1]))
    chi_rho = np.empty_like(rho)
    chi_rho[0] = 1.0 / (2.0 * n)
    chi_rho[1:] = _chi_rate(n, eps, rho[1:], psi[1:], chi[1:])
    return rho, psi, chi, chi_rho


@dataclass(frozen=True, eq=False)
class BowlProfile:
    """
    The bowl soliton in the tip chart, sampled on [0, rho_max].

    Attributes:
        n: Surface dimension.
        rho, psi, slope, curvature: Samples of ρ, Ψ, Ψ′ and Ψ″.
        C0: Constant of the expansion Ψ = ρ²/(4(n−1)) − 2 ln ρ + C0 + o(1),
            fitted on [rho_max/2, rho_max].
        step: Integration step in ρ.
    """

    n: int
    rho: FloatArray
    psi: FloatArray
    slope: FloatArray
    curvature: FloatArray
    C0: float
    step: float

    @property
    def rho_max(self) -> float:
        return float(self.rho[-1])

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.rho, self.psi, self.slope)

    @cached_property
    def _slope_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.rho, self.slope, self.curvature)

    def asymptote(self, rho: ArrayLike) -> FloatArray:
        rho = np.asarray(rho, dtype=np.float64)
        return rho**2 / (4.0 * (self.n - 1)) - 2.0 * np.log(rho) + self.C0

    def __call__(self, rho: ArrayLike) -> FloatArray:
        """Ψ(ρ); beyond rho_max the fitted expansion takes over."""
        rho = np.abs(np.asarray(rho, dtype=np.float64))
        inside = rho <= self.rho_max
        out = np.empty_like(rho)
        out[inside] = self._spline(rho[inside])
        if np.any(~inside):
            out[~inside] = self.asymptote(rho[~inside])
        return out

    def derivative(self, rho: ArrayLike) -> FloatArray:
        """Ψ′(ρ) for ρ ≥ 0."""
        rho = np.asarray(rho, dtype=np.float64)
        inside = rho <= self.rho_max
        out = np.empty_like(rho)
        out[inside] = self._slope_spline(rho[inside])
        far = rho[~inside]
        out[~inside] = far / (2.0 * (self.n - 1)) - 2.0 / far
        return out

    def expansion_residual(self, rho: ArrayLike) -> FloatArray:
        """Ψ′(ρ) − (ρ/(2(n−1)) − 2/ρ), which decays like ρ⁻³."""
        rho = np.asarray(rho, dtype=np.float64)
        return self.derivative(rho) - (rho / (2.0 * (self.n - 1)) - 2.0 / rho)


def solve_bowl(n: int, rho_max: float = 40.0, h: float = 1e-3) -> BowlProfile:
    """
    Solves the translator ODE
        Ψ″/(1+Ψ′²) + (n−1)Ψ′/ρ = ½
    with Ψ(0) = Ψ′(0) = 0.

    Args:
        n: Surface dimension.
        rho_max: End of the sampled interval (at least 10).
        h: RK4 step in ρ (at most 1e-2).

    Returns:
        The sampled bowl with its fitted expansion constant.

    Raises:
        UsageError: for rho_max < 10 or h > 1e-2.
        IntegrationError: if the integration produced a non-finite value.
    """
    n = check_dimension(n)
    if rho_max < 10:
        raise UsageError(f"rho_max must be >= 10 (got {rho_max})")
    if not 0 < h <= 1e-2:
        raise UsageError(f"bowl step must lie in (0, 1e-2] (got {h})")
    rho, psi, chi, chi_rho = _integrate_tip_chart(n, 0.0, rho_max, h)
    window = rho >= 0.5 * rho_max
    C0 = float(
        np.mean(psi[window] - rho[window] ** 2 / (4.0 * (n - 1)) + 2.0 * np.log(rho[window]))
    )
    logger.debug("bowl n=%d rho_max=%.3g: C0=%.6f", n, rho_max, C0)
    return BowlProfile(n, rho, psi, chi, chi_rho, C0, h)


def bowl_error_estimate(n: int, rho_max: float = 20.0, h: float = 1e-2) -> float:
    """Step-doubling estimate max|Ψ_h − Ψ_{h/2}|/15 of the RK4 error."""
    n = check_dimension(n)
    steps = max(1, int(math.ceil((rho_max - TAYLOR_START) / h)))
    _, coarse, _, _ = _integrate_tip_chart(n, 0.0, rho_max, h, steps)
    _, fine, _, _ = _integrate_tip_chart(n, 0.0, rho_max, h / 2, 2 * steps)
    # fine has the origin plus 2·steps+1 samples; every other one matches coarse
    return float(np.max(np.abs(coarse[1:] - fine[1::2])) / 15.0)


def tail_slope(bowl: BowlProfile, lo: float = 15.0, hi: float = 30.0) -> float:
    """
    Log-log slope of |Ψ′ − (ρ/(2(n−1)) − 2/ρ)| on [lo, hi].

    Raises:
        UsageError: if the window is not inside the sampled range.
    """
    if not 0 < lo < hi <= bowl.rho_max:
        raise UsageError(f"window [{lo}, {hi}] must lie inside (0, {bowl.rho_max}]")
    mask = (bowl.rho >= lo) & (bowl.rho <= hi)
    rho = bowl.rho[mask]
    res = np.abs(bowl.expansion_residual(rho))
    return float(np.polyfit(np.log(rho), np.log(res), 1)[0])


@dataclass(frozen=True, eq=False)
class TipCap:
    """
    A shrinker near its tip in the chart y = a − ψ(ρ)/a, r = ρ/a.

    Attributes:
        a: Tip height.
        n: Surface dimension.
        M: Cap extent in ρ.
        rho, psi, chi, chi_rho: Samples of ρ, ψ, ψ_ρ and ψ_ρρ on [0, M].
    """

    a: float
    n: int
    M: float
    rho: FloatArray
    psi: FloatArray
    chi: FloatArray
    chi_rho: FloatArray

    @property
    def eps(self) -> float:
        return 1.0 / (2.0 * self.a * self.a)

    @property
    def y_Ma(self) -> float:
        """Height where the cap chart ends."""
        return self.a - float(self.psi[-1]) / self.a

    @cached_property
    def _psi_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.rho, self.psi, self.chi)

    @cached_property
    def _chi_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.rho, self.chi, self.chi_rho)

    def psi_at(self, rho: ArrayLike) -> FloatArray:
        return self._psi_spline(np.asarray(rho, dtype=np.float64))

    def chi_at(self, rho: ArrayLike) -> FloatArray:
        return self._chi_spline(np.asarray(rho, dtype=np.float64))

    def w_at(self, rho: ArrayLike) -> FloatArray:
        """w = 2yuu_y/(u² − 2(n−1)) evaluated in the tip chart, ρ > 0."""
        rho = np.asarray(rho, dtype=np.float64)
        y = self.a - self.psi_at(rho) / self.a
        u = rho / self.a
        uy = -1.0 / self.chi_at(rho)
        return 2.0 * y * u * uy / (u * u - 2.0 * (self.n - 1))

    def tip_w_limit(self, rho_ref: Optional[float] = None) -> float:
        """
        lim w at the tip by Richardson extrapolation in ρ² from ρ_ref·{1, ½, ¼}.

        The default ρ_ref is min(1, M). Passing ρ_ref = M uses the samples
        {M, M/2, M/4}; w is close to a polynomial in ρ² only for ρ ≲ 1,
        while on the bowl-like tip it falls towards 2(n−1) for ρ ≫ √(2n),
        so the wide stencil is far less accurate.

        Raises:
            UsageError: unless 0 < ρ_ref <= M.
        """
        if rho_ref is None:
            rho_ref = min(1.0, self.M)
        if not 0.0 < rho_ref <= self.M:
            raise UsageError(f"need 0 < rho_ref <= M={self.M:g} (got {rho_ref})")
        samples = [float(self.w_at(rho_ref / 2**k)) for k in range(3)]
        return richardson_extrapolate(samples, p=2, r=2.0)


def _tip_cap(a: float, M: float, n: int, h: float) -> TipCap:
    rho, psi, chi, chi_rho = _integrate_tip_chart(n, 1.0 / (2.0 * a * a), M, h)
    if np.any(np.diff(psi) <= 0):
        raise IntegrationError(f"tip cap a={a:.4g} is not monotone in ρ")
    return TipCap(float(a), n, float(M), rho, psi, chi, chi_rho)


def solve_tip_cap(a: float, M: float = DEFAULT_CAP_EXTENT, n: int = 2, h: float = 1e-3) -> TipCap:
    """
    Solves the tip-chart ODE
        ψ_ρρ/(1+ψ_ρ²) + (n−1)ψ_ρ/ρ = ½ + ε(ρψ_ρ − ψ),   ε = 1/(2a²),
    from the regular solution at the axis.

    Raises:
        UsageError: for a < 10 or M < 10.
        IntegrationError: on a non-finite or non-monotone solution.
    """
    n = check_dimension(n)
    if a < 10 or M < 10:
        raise UsageError(f"tip caps need a >= 10 and M >= 10 (got a={a}, M={M})")
    return _tip_cap(a, M, n, h)


# ---------------------------------------------------------------------------
# Leaves
# ---------------------------------------------------------------------------


def shrinker_residual(
    y: ArrayLike, u: ArrayLike, uy: ArrayLike, uyy: ArrayLike, n: int
) -> FloatArray:
    """
    Residual of the graph shrinker equation in curvature form,
        u_yy/(1+u_y²) − (y/2)u_y + u/2 − (n−1)/u.

    Zero on the cylinder √(2(n−1)) and on the sphere √(2n − y²).
    """
    y, u, uy, uyy = (np.asarray(v, dtype=np.float64) for v in (y, u, uy, uyy))
    return uyy / (1.0 + uy * uy) - 0.5 * y * uy + 0.5 * u - (n - 1) / u


def graph_residual(y: ArrayLike, u: ArrayLike, n: int) -> FloatArray:
    """shrinker_residual with u_y, u_yy from three-point differences of the samples."""
    d1, d2 = nonuniform_second_derivative(u, y)
    return shrinker_residual(y, u, d1, d2, n)


def w_from_graph(y: ArrayLike, u: ArrayLike, uy: ArrayLike, n: int) -> FloatArray:
    """w = 2yuu_y/(u² − 2(n−1)) = y·d/dy ln|2(n−1) − u²|."""
    y, u, uy = (np.asarray(v, dtype=np.float64) for v in (y, u, uy))
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * y * u * uy / (u * u - 2.0 * (n - 1))


@dataclass(frozen=True, eq=False)
class ShrinkerLeaf:
    """
    A cap Σ_a or trumpet Σ̃_b as a graph r = u(y), sampled in increasing y.

    For caps the first `graph_count` samples come from the arclength system
    and the rest from the tip chart (ρ ≥ TIP_CHART_CUT); the stored tip cap
    covers what lies beyond. For trumpets every sample is a graph sample.
    """

    kind: str
    parameter: float
    n: int
    y: FloatArray
    u: FloatArray
    uy: FloatArray
    uyy: FloatArray
    y_star: float
    graph_count: int
    turned: bool = False
    tip: Optional[TipCap] = None

    @property
    def a(self) -> float:
        if self.kind != "cap":
            raise UsageError("only cap leaves have a tip height")
        return self.parameter

    @property
    def y_Ma(self) -> float:
        """Top of the graph portion (the tip-chart boundary for caps)."""
        return float(self.y[self.graph_count - 1])

    @property
    def y_end(self) -> float:
        """Largest y on the leaf: the tip for caps, the seed height for trumpets."""
        return self.parameter if self.kind == "cap" else float(self.y[-1])

    @cached_property
    def w(self) -> FloatArray:
        return w_from_graph(self.y, self.u, self.uy, self.n)

    @cached_property
    def residual(self) -> FloatArray:
        return graph_residual(self.y, self.u, self.n)

    @property
    def sup_residual(self) -> float:
        """Largest shrinker-equation residual over interior graph samples."""
        k = self.graph_count
        if k < 3:
            return float("nan")
        return float(np.max(np.abs(self.residual[1 : k - 1])))

    @cached_property
    def _u_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.y, self.u, self.uy)

    @cached_property
    def _uy_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.y, self.uy, self.uyy)

    def profile_at(self, y: ArrayLike) -> Tuple[FloatArray, FloatArray]:
        """
        u and u_y at arbitrary heights.

        Between samples the Hermite interpolants are used; between the last
        stored sample and the tip of a cap the tip chart is inverted. Heights
        outside the leaf give NaN.
        """
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        u = np.full_like(y, np.nan)
        uy = np.full_like(y, np.nan)
        inside = (y >= self.y[0]) & (y <= self.y[-1])
        u[inside] = self._u_spline(y[inside])
        uy[inside] = self._uy_spline(y[inside])
        if self.tip is not None:
            beyond = (y > self.y[-1]) & (y <= self.a)
            if np.any(beyond):
                a = self.a
                target = a * (a - y[beyond])
                rho = np.interp(target, self.tip.psi, self.tip.rho)
                u[beyond] = rho / a
                with np.errstate(divide="ignore"):
                    uy[beyond] = -1.0 / self.tip.chi_at(rho)
        return u, uy

    def convexity_defect(self) -> float:
        """
        Largest violation of the expected sign of the discrete u_yy: positive
        second differences for caps, negative ones for trumpets.
        """
        k = self.graph_count
        _, d2 = nonuniform_second_derivative(self.u[:k], self.y[:k])
        d2 = d2[1:-1]
        return float(np.max(d2) if self.kind == "cap" else np.max(-d2))

    def to_columns(self) -> Dict[str, FloatArray]:
        return {
            "y": self.y,
            "u": self.u,
            "u_y": self.uy,
            "w": self.w,
            "residual": self.residual,
        }


def _arclength_rhs(n: int) -> Callable[[float, FloatArray], FloatArray]:
    def rhs(s: float, x: FloatArray) -> FloatArray:
        y, r, theta = float(x[0]), float(x[1]), float(x[2])
        c, sn = math.cos(theta), math.sin(theta)
        r = max(r, 1e-12)
        return np.array([c, sn, ((n - 1) / r - 0.5 * r) * c + 0.5 * y * sn])

    return rhs


def cap_extent(a: float, n: int, M: float = DEFAULT_CAP_EXTENT) -> float:
    """Tip-chart extent actually used for a cap of height a."""
    return min(M, CAP_EXTENT_FRACTION * a * cylinder_radius(n))


def shoot_leaf(
    a: float,
    n: int,
    y_min: float = 0.0,
    M: float = DEFAULT_CAP_EXTENT,
    h: float = 1e-2,
    tip_step: float = 1e-3,
) -> ShrinkerLeaf:
    """
    Continues the tip cap of height a with the arclength system

        y_s = cos θ,  r_s = sin θ,
        θ_s = ((n−1)/r − r/2) cos θ + (y/2) sin θ

    from ρ = M down to y_min, or until the curve turns back (cos θ ≥ 0) or
    reaches the axis.

    Args:
        a: Tip height.
        n: Surface dimension.
        y_min: Lowest height wanted (>= 0).
        M: Tip-chart extent, clipped for small a.
        h: RK4 step in arclength.
        tip_step: RK4 step in ρ for the tip chart.

    Returns:
        The cap leaf. `turned` tells whether it ended before y_min.

    Raises:
        UsageError: for y_min < 0 or a <= max(y_min, 1).
        IntegrationError: if the state becomes non-finite.
    """
    n = check_dimension(n)
    if y_min < 0:
        raise UsageError(f"y_min must be >= 0 (got {y_min})")
    if a <= max(y_min, 1.0):
        raise UsageError(f"tip height a={a} must exceed max(y_min, 1)")
    extent = cap_extent(a, n, M)
    tip = _tip_cap(a, extent, n, tip_step)
    start = np.array(
        [tip.y_Ma, extent / a, math.atan2(1.0, -float(tip.chi[-1]))], dtype=np.float64
    )

    def stop(_s: float, x: FloatArray) -> bool:
        return math.cos(x[2]) >= 0 or x[1] <= 0 or x[0] <= y_min

    rhs = _arclength_rhs(n)
    n_steps = int(math.ceil(4.0 * (a + 10.0) / h))
    _, xs, stopped = RK4().integrate(rhs, 0.0, start, h, n_steps, stop)
    last = xs[-1]
    turned = bool(stopped and (math.cos(last[2]) >= 0 or last[1] <= 0))
    if turned:
        xs = xs[:-1]
        logger.info("cap a=%.4g turned back at y=%.4g", a, xs[-1, 0])
    elif not stopped:
        logger.warning("cap a=%.4g did not reach y_min=%.4g", a, y_min)

    graph = xs[::-1]
    gy, gr, gt = graph[:, 0], graph[:, 1], graph[:, 2]
    cos_t = np.cos(gt)
    theta_s = ((n - 1) / gr - 0.5 * gr) * cos_t + 0.5 * gy * np.sin(gt)
    g_uy = np.tan(gt)
    g_uyy = theta_s / cos_t**3

    keep = (tip.rho >= min(TIP_CHART_CUT, 0.5 * extent)) & (tip.rho < extent)
    rho = tip.rho[keep][::-1]
    psi = tip.psi[keep][::-1]
    chi = tip.chi[keep][::-1]
    chi_rho = tip.chi_rho[keep][::-1]
    t_y = a - psi / a
    t_u = rho / a
    t_uy = -1.0 / chi
    t_uyy = -a * chi_rho / chi**3

    y = np.concatenate((gy, t_y))
    if np.any(np.diff(y) <= 0):
        raise IntegrationError(f"cap a={a:.4g} is not a graph over the axis")
    logger.debug("cap a=%.4g: %d graph samples, y_Ma=%.5g", a, gy.size, tip.y_Ma)
    return ShrinkerLeaf(
        kind="cap",
        parameter=float(a),
        n=n,
        y=y,
        u=np.concatenate((gr, t_u)),
        uy=np.concatenate((g_uy, t_uy)),
        uyy=np.concatenate((g_uyy, t_uyy)),
        y_star=float(gy[0]),
        graph_count=int(gy.size),
        turned=turned,
        tip=tip,
    )


def trumpet_seed(b: float, n: int, Y: float) -> Tuple[float, float]:
    """Two-term conical asymptote u = bY + (n−1)/(bY) and its slope."""
    return b * Y + (n - 1) / (b * Y), b - (n - 1) / (b * Y * Y)


def solve_trumpet(
    b: float,
    n: int,
    y_span: Sequence[float] = (0.0, TRUMPET_MIN_Y),
    spacing: float = 1e-2,
    b0: float = DEFAULT_B0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> ShrinkerLeaf:
    """
    Integrates the graph shrinker equation
        u_yy = (1+u_y²)((y/2)u_y − u/2 + (n−1)/u)
    inward from the conical end, seeded with the two-term asymptote.

    The seed height is raised to 20·√(2(n−1))/b when that exceeds Y, so that
    gentle cones start in their asymptotic regime; samples are recorded on
    y_span only.

    Args:
        b: Cone slope, 0 < b <= b0.
        n: Surface dimension.
        y_span: (y_lo, Y) with Y >= 100.
        spacing: Sample spacing in y.

    Raises:
        UsageError: for b outside (0, b0] or an invalid span.
        IntegrationError: if the implicit solver fails.
    """
    n = check_dimension(n)
    if not 0 < b <= b0:
        raise UsageError(f"trumpet slope must lie in (0, {b0}] (got {b})")
    y_lo, Y = float(y_span[0]), float(y_span[1])
    if Y < TRUMPET_MIN_Y or not 0 <= y_lo < Y:
        raise UsageError(f"trumpet span needs 0 <= y_lo < Y and Y >= 100 (got {y_span})")
    start = max(Y, TRUMPET_SEED_FACTOR * cylinder_radius(n) / b)
    count = int(round((Y - y_lo) / spacing)) + 1
    t_eval = np.linspace(y_lo, Y, count)[::-1]

    def rhs(y: float, x: FloatArray) -> FloatArray:
        u, p = x
        return np.array([p, (1.0 + p * p) * (0.5 * y * p - 0.5 * u + (n - 1) / u)])

    def jac(y: float, x: FloatArray) -> FloatArray:
        u, p = x
        bracket = 0.5 * y * p - 0.5 * u + (n - 1) / u
        return np.array(
            [
                [0.0, 1.0],
                [
                    (1.0 + p * p) * (-0.5 - (n - 1) / (u * u)),
                    2.0 * p * bracket + 0.5 * y * (1.0 + p * p),
                ],
            ]
        )

    sol = solve_ivp(
        rhs,
        (start, y_lo),
        trumpet_seed(b, n, start),
        method="Radau",
        t_eval=t_eval,
        jac=jac,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise IntegrationError(f"trumpet b={b:.4g}: {sol.message}")
    y = sol.t[::-1]
    u = sol.y[0][::-1]
    uy = sol.y[1][::-1]
    uyy = (1.0 + uy * uy) * (0.5 * y * uy - 0.5 * u + (n - 1) / u)
    logger.debug("trumpet b=%.4g seeded at Y=%.5g, u(%.3g)=%.6f", b, start, y[0], u[0])
    return ShrinkerLeaf(
        kind="trumpet",
        parameter=float(b),
        n=n,
        y=y,
        u=u,
        uy=uy,
        uyy=uyy,
        y_star=float(y[0]),
        graph_count=int(y.size),
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WDiagnostic:
    y: FloatArray
    w: FloatArray
    ode_residual: float
    tip_limit: float
    clipped_at: Optional[float]


def w_ode_rhs(y: ArrayLike, u: ArrayLike, uy: ArrayLike, w: ArrayLike, n: int) -> FloatArray:
    """Right-hand side of y·w_y = w − (½ + (n−1)/u²)w² + ½y²(1+u_y²)(w−2)."""
    y, u, uy, w = (np.asarray(v, dtype=np.float64) for v in (y, u, uy, w))
    return w - (0.5 + (n - 1) / (u * u)) * w * w + 0.5 * y * y * (1.0 + uy * uy) * (w - 2.0)


def w_diagnostic(leaf: ShrinkerLeaf, y_from: Optional[float] = None) -> WDiagnostic:
    """
    The w-quantity along the graph portion of a leaf.

    The window is y > 0 on the graph portion. Where u² − 2(n−1) changes sign
    (caps cross the cylinder radius once near y ≈ √2) w is singular, so the
    window is clipped to start two samples above the last sign change.

    Args:
        leaf: Cap or trumpet.
        y_from: Lower end of the window on which the w-ODE residual is
            measured; defaults to the start of the (clipped) window.

    Returns:
        Samples of w, the largest w-ODE residual, and for caps the
        extrapolated tip limit (NaN for trumpets).
    """
    k = leaf.graph_count
    y, u, uy = leaf.y[:k], leaf.u[:k], leaf.uy[:k]
    c2 = 2.0 * (leaf.n - 1)
    idx = np.flatnonzero(y > 0)
    gap = u[idx] * u[idx] - c2
    flips = np.flatnonzero(np.sign(gap[1:]) != np.sign(gap[:-1]))
    clipped_at = None
    if flips.size:
        first = min(int(flips[-1]) + 2, idx.size - 1)
        idx = idx[first:]
        clipped_at = float(y[idx[0]])
        logger.info(
            "%s %.4g: w window clipped at y=%.4g (cylinder crossing)",
            leaf.kind,
            leaf.parameter,
            clipped_at,
        )
    idx = idx[(u[idx] * u[idx] - c2) != 0]
    wy = y[idx]
    w = w_from_graph(wy, u[idx], uy[idx], leaf.n)

    lo = -np.inf if clipped_at is None else clipped_at
    if y_from is not None:
        lo = max(lo, y_from)
    sel = wy >= lo
    ode_residual = float("nan")
    if np.count_nonzero(sel) >= 3:
        dw, _ = nonuniform_second_derivative(w[sel], wy[sel])
        res = wy[sel] * dw - w_ode_rhs(wy[sel], u[idx][sel], uy[idx][sel], w[sel], leaf.n)
        ode_residual = float(np.max(np.abs(res[1:-1])))

    tip_limit = leaf.tip.tip_w_limit() if leaf.tip is not None else float("nan")
    return WDiagnostic(wy, w, ode_residual, tip_limit, clipped_at)


def w_upper_barrier(y: ArrayLike, a: float, n: int, K: Optional[float] = None) -> FloatArray:
    """2 + K/(a² − y²) + K/y² with K = 20(n−1) by default."""
    y = np.asarray(y, dtype=np.float64)
    K = 20.0 * (n - 1) if K is None else K
    return 2.0 + K / (a * a - y * y) + K / (y * y)


def cap_lower_bound_margin(leaf: ShrinkerLeaf) -> float:
    """min of u² − 2(n−1)(1 − y²/a²) over the samples with 0 <= y < a."""
    a = leaf.a
    mask = (leaf.y >= 0) & (leaf.y < a)
    y, u = leaf.y[mask], leaf.u[mask]
    return float(np.min(u * u - 2.0 * (leaf.n - 1) * (1.0 - y * y / (a * a))))


def hermite_odd_solution(y: ArrayLike) -> FloatArray:
    """
    The odd solution v₁ of v″ − (y/2)v′ + v = 0 with v₁′(0) = −½.

    Summed from its power series, c_{m+2} = (m−2)c_m/(2(m+1)(m+2)); every
    term beyond the first is positive, and v₁(y)·y³e^{−y²/4} → 2.

    Raises:
        UsageError: for |y| > 50, where the value overflows.
    """
    y = np.asarray(y, dtype=np.float64)
    if np.any(np.abs(y) > 50):
        raise UsageError("hermite_odd_solution is only evaluated for |y| <= 50")
    y2 = y * y
    term = -0.5 * y
    total = term.copy()
    m = 1
    m_max = 2 * int(np.max(y2, initial=0.0)) + 60
    while m < m_max:
        term = term * ((m - 2) / (2.0 * (m + 1) * (m + 2))) * y2
        m += 2
        total = total + term
    return total


def two_point_decomposition(
    y1: float, v1: float, y2: float, v2: float
) -> Tuple[float, float]:
    """(α, β) with v(y) = α(y²−2) + β·v₁(y) at the two heights."""
    h1, h2 = hermite_odd_solution(np.array([y1, y2]))
    matrix = np.array([[y1 * y1 - 2.0, h1], [y2 * y2 - 2.0, h2]])
    alpha, beta = np.linalg.solve(matrix, np.array([v1, v2]))
    return float(alpha), float(beta)


@dataclass(frozen=True)
class ExpansionFit:
    """
    Comparison of a cap against its inner and outer expansions.

    Attributes:
        a: Tip height.
        window: Inner window (lo, hi).
        inner_residual: sup |u − √(2(n−1))(1 − (y²−2)/(2a²))| on the window.
        inner_scaled: inner_residual·a².
        outer_residual: sup |u − √(2(n−1)(1 − y²/a²))| over 0 <= y <= a.
        alpha, beta: Two-point Hermite decomposition of a²(u/√(2(n−1)) − 1)
            at y = 2L and 3L.
        rough_slack: sup_{[5,4L]} a²|u − √(2(n−1))(1 − y²/(2a²))| − C_n; <= 0
            when the rough inner estimate holds.
        upper_margin: sup over [8√(n−1), y_Ma] of
            u² − 2(n−1)(1−y²/a²) − 20(n−1)²/a².
        decay_exponent: -d log(inner_residual)/d log a from a sweep.
    """

    a: float
    window: Tuple[float, float]
    inner_residual: float
    inner_scaled: float
    outer_residual: float
    alpha: float
    beta: float
    rough_slack: float
    upper_margin: float
    decay_exponent: float = float("nan")


def _sup_on(values: FloatArray) -> float:
    values = values[np.isfinite(values)]
    return float(np.max(values)) if values.size else float("nan")


def fit_expansions(
    leaf: ShrinkerLeaf,
    inner_window: Tuple[float, float] = (0.0, 5.0),
    L: float = 2.0,
) -> ExpansionFit:
    """
    Measures a cap against its expansions for large a.

    Raises:
        UsageError: if the leaf is not a cap with a >= 20, the window is not
            inside [0, 5], or the leaf does not reach down to the window.
    """
    if leaf.kind != "cap" or leaf.a < 20:
        raise UsageError("fit_expansions needs a cap leaf with a >= 20")
    lo, hi = float(inner_window[0]), float(inner_window[1])
    if not 0 <= lo < hi <= 5:
        raise UsageError(f"inner window must lie inside [0, 5] (got {inner_window})")
    if leaf.y[0] > lo + 1e-9:
        raise UsageError(f"leaf starts at y={leaf.y[0]:.4g}, above the window")
    a, n = leaf.a, leaf.n
    c = cylinder_radius(n)

    yy = np.linspace(lo, hi, 501)
    u, _ = leaf.profile_at(yy)
    inner = _sup_on(np.abs(u - c * (1.0 - (yy * yy - 2.0) / (2.0 * a * a))))

    mask = leaf.y >= 0
    y_all, u_all = leaf.y[mask], leaf.u[mask]
    outer = _sup_on(np.abs(u_all - c * np.sqrt(np.clip(1.0 - y_all**2 / a**2, 0.0, None))))

    alpha = beta = float("nan")
    if 3.0 * L <= leaf.y_Ma:
        heights = np.array([2.0 * L, 3.0 * L])
        uv, _ = leaf.profile_at(heights)
        v = a * a * (uv / c - 1.0)
        alpha, beta = two_point_decomposition(heights[0], v[0], heights[1], v[1])

    c_n = (20.0 * (n - 1) ** 2 + 1.0) / (2.0 * (n - 1))
    rough_slack = float("nan")
    top = min(4.0 * L, leaf.y_Ma)
    if top > 5.0:
        yr = np.linspace(5.0, top, 301)
        ur, _ = leaf.profile_at(yr)
        rough_slack = a * a * _sup_on(np.abs(ur - c * (1.0 - yr * yr / (2.0 * a * a)))) - c_n

    upper_margin = float("nan")
    band = (leaf.y >= 8.0 * math.sqrt(n - 1)) & (leaf.y <= leaf.y_Ma)
    if np.any(band):
        yb, ub = leaf.y[band], leaf.u[band]
        upper_margin = _sup_on(
            ub * ub - 2.0 * (n - 1) * (1.0 - yb * yb / (a * a)) - 20.0 * (n - 1) ** 2 / (a * a)
        )

    return ExpansionFit(
        a=a,
        window=(lo, hi),
        inner_residual=inner,
        inner_scaled=inner * a * a,
        outer_residual=outer,
        alpha=alpha,
        beta=beta,
        rough_slack=rough_slack,
        upper_margin=upper_margin,
    )


def expansion_sweep(
    a_values: Sequence[float],
    n: int,
    inner_window: Tuple[float, float] = (0.0, 5.0),
    h: float = 1e-2,
) -> List[ExpansionFit]:
    """fit_expansions over increasing a, with decay exponents between neighbours."""
    fits: List[ExpansionFit] = []
    for a in sorted(a_values):
        fit = fit_expansions(shoot_leaf(a, n, y_min=0.0, h=h), inner_window)
        if fits:
            prev = fits[-1]
            exponent = math.log(prev.inner_residual / fit.inner_residual) / math.log(
                fit.a / prev.a
            )
            fit = replace(fit, decay_exponent=exponent)
        fits.append(fit)
    return fits
