"""
The ancient-oval ansatz and the region-by-region checks of its asymptotics.

At a very negative rescaled time τ an ancient oval looks like

    u ≈ √(2(n−1))·(1 − (y² − 2)/(4|τ|))          for |y| = O(1),
    u ≈ √(n−1)·√(2 − z²),  z = y/√|τ|           in the intermediate region,
    a bowl soliton of scale 1/√(2|τ|)           at the tips (y ≈ ±√(2|τ|)).

The first two charts agree to O(|τ|⁻²) with a single ellipse-like body,
so the ansatz is glued from two pieces only: that body and the bowl.
The gluing is done on the radius of curvature R(θ) of the generating curve
as a function of its tangent angle: any positive R closes up into a convex
curve, so convexity never depends on the blend. A fixed-point iteration on
the body's semi-axes (A, B) then puts the tips at ±√(2|τ|) and the top at
u(0) = √(2(n−1))(1 + 1/(2|τ|)).

The curve is exactly the bowl for ρ ≤ min(tip_rho, blend_fraction·2|τ0|)
and blends into the body over the next fifth of that radius. Bowl and body
drift apart as ρ/√|τ| grows, so the exact cap only reaches ρ = 10 once
|τ0| ≳ 170; at τ0 = −50 it ends at ρ = 3.

The verification functions post-process a recorded run (`FlowRun`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from oval_lab_app.config import LabConfig
from oval_lab_app.errors import AnsatzError, HypothesisViolation, ResolutionError, UsageError
from oval_lab_app.flow_evolver import (
    FlowRun,
    FlowState,
    convexity_violation,
    graph_samples,
    mean_curvature,
    resample_uniform,
)
from oval_lab_app.huisken import (
    DEFAULT_DELTA0,
    dissipation,
    huisken_curve,
    inner_outer_check,
    monotonicity_series,
)
from oval_lab_app.integrators import RK4
from oval_lab_app.numerics_core import ArcCurve, Grid, check_dimension, cylinder_radius
from oval_lab_app.shrinker_ode import BowlProfile, shoot_leaf, solve_bowl
from oval_lab_app.spectral import classify_modes, cutoff_bump, spectral_series, track_alpha

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Largest |τ0| below which the three-scale picture is not trusted.
MAX_TAU0 = -25.0
# Exact bowl on ρ ≤ BLEND_FRACTION·2|τ0| (capped by tip_rho), blended over
# the next BLEND_WIDTH of that radius.
BLEND_FRACTION = 0.03
BLEND_WIDTH = 0.2
_FIT_ITERATIONS = 40
_FIT_TOL = 1e-10

PARABOLIC_BOUND = 0.2
INTERMEDIATE_BOUND = 0.1
TIP_BOUND = 0.05
HMAX_WINDOW = (0.6, 0.8)
DIAMETER_WINDOW = (0.9, 1.1)
ALPHA_SLOPE_WINDOW = (3.5, 4.5)
ALPHA_FIT_WINDOW = (0.85, 1.15)
RMAX_BOUND = 1.01
MONOTONE_TOL = 1e-6
DERIVATIVE_TOL = 1e-2
INNER_OUTER_LENGTHS = (4.0, 6.0, 8.0)
INNER_OUTER_SPREAD = 2.0
MIN_TIP_NODES = 50


# ---------------------------------------------------------------------------
# Ansatz
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnsatzSpec:
    """
    Parameters of the ancient-oval ansatz.

    Attributes:
        n: Surface dimension.
        tau0: Rescaled time of the ansatz (≤ −25).
        nodes: Number of curve nodes.
        tip_rho: Largest bowl radius up to which the tip is exactly the bowl.
        bowl_rho_max: Extent of the bowl solution.
        bowl_step: RK4 step of the bowl solution.
        angle_samples: Resolution of the tangent-angle quadrature.
        blend_fraction: Bowl extent as a fraction of μ² = 2|τ0|, before
            capping by tip_rho.
    """

    n: int = 2
    tau0: float = -50.0
    nodes: int = 4000
    tip_rho: float = 10.0
    bowl_rho_max: float = 40.0
    bowl_step: float = 1e-3
    angle_samples: int = 20001
    blend_fraction: float = BLEND_FRACTION

    def __post_init__(self) -> None:
        check_dimension(self.n)
        if self.tau0 > MAX_TAU0:
            raise UsageError(f"ansatz needs tau0 <= {MAX_TAU0} (got {self.tau0})")
        if self.nodes < 50:
            raise UsageError(f"ansatz needs at least 50 nodes (got {self.nodes})")
        if self.tip_rho <= 0:
            raise UsageError("tip_rho must be positive")
        if not 0 < self.blend_fraction < 1:
            raise UsageError("blend_fraction must lie in (0, 1)")

    @classmethod
    def from_config(cls, config: LabConfig) -> "AnsatzSpec":
        return cls(
            n=config.n,
            tau0=config.tau0,
            nodes=config.nodes,
            tip_rho=config.tip_rho,
            bowl_rho_max=config.rho_max,
            bowl_step=config.bowl_step,
        )

    @property
    def diameter(self) -> float:
        """Target half-diameter √(2|τ0|)."""
        return math.sqrt(2.0 * abs(self.tau0))

    @property
    def top_radius(self) -> float:
        return cylinder_radius(self.n) * (1.0 + 0.5 / abs(self.tau0))

    @property
    def tip_scale(self) -> float:
        """μ with H̄(tip) = μ/2, the bowl being normalized to H(0) = ½."""
        return math.sqrt(2.0 * abs(self.tau0))


@dataclass(frozen=True)
class AnsatzGeometry:
    """
    The glued generating curve before resampling.

    Attributes:
        A, B: Semi-axes of the body after fitting.
        mu: Bowl scale at the tips.
        blend_rho: Bowl radius where blending starts; it ends at
            (1 + BLEND_WIDTH)·blend_rho.
        y, r: Polyline from the left tip to the right tip.
    """

    A: float
    B: float
    mu: float
    blend_rho: float
    y: FloatArray
    r: FloatArray


def _ellipse_radius(theta: FloatArray, A: float, B: float) -> FloatArray:
    return (A * B) ** 2 / (A**2 * np.sin(theta) ** 2 + B**2 * np.cos(theta) ** 2) ** 1.5


def tip_window(tau: float, tip_rho: float = 10.0, blend_fraction: float = BLEND_FRACTION) -> float:
    """Bowl radius out to which an ansatz started at τ is exactly the bowl."""
    return min(tip_rho, blend_fraction * 2.0 * abs(tau))


def ansatz_geometry(spec: AnsatzSpec, bowl: Optional[BowlProfile] = None) -> AnsatzGeometry:
    """
    Glues the bowl to the body in the tangent-angle chart.

    Raises:
        AnsatzError: if the bowl is too short for the blend or the fit on
            (A, B) does not settle.
    """
    bowl = bowl or solve_bowl(spec.n, spec.bowl_rho_max, spec.bowl_step)
    mu = spec.tip_scale
    c = cylinder_radius(spec.n)
    blend_rho = tip_window(spec.tau0, spec.tip_rho, spec.blend_fraction)
    blend_end = (1.0 + BLEND_WIDTH) * blend_rho
    if blend_end > bowl.rho_max:
        raise AnsatzError(
            f"bowl solved to ρ={bowl.rho_max:.3g} cannot cover the blend up to {blend_end:.3g}"
        )
    # bowl radius of curvature against its tangent angle, both increasing in ρ
    chi = bowl.slope
    theta_b = -np.arctan2(1.0, chi)
    radius_b = (1.0 + chi * chi) ** 1.5 / bowl.curvature

    theta = np.linspace(-0.5 * math.pi, 0.0, spec.angle_samples)
    rho_of_theta = np.interp(theta, theta_b, bowl.rho, right=np.inf)
    weight = cutoff_bump(1.0 + np.maximum(rho_of_theta / blend_rho - 1.0, 0.0) / BLEND_WIDTH)
    bowl_part = np.interp(theta, theta_b, radius_b) / mu

    A, B = spec.diameter, c * math.sqrt(1.0 + 1.0 / abs(spec.tau0))
    for _ in range(_FIT_ITERATIONS):
        R = weight * bowl_part + (1.0 - weight) * _ellipse_radius(theta, A, B)
        x = integrate.cumulative_trapezoid(R * np.cos(theta), theta, initial=0.0)
        r = integrate.cumulative_trapezoid(-R * np.sin(theta), theta, initial=0.0)
        tip, top = float(x[-1]), float(r[-1])
        miss = max(abs(tip - spec.diameter) / spec.diameter, abs(top - spec.top_radius))
        if miss < _FIT_TOL:
            break
        A *= spec.diameter / tip
        B += spec.top_radius - top
    else:
        raise AnsatzError(f"ansatz fit did not settle (miss {miss:.3e})")

    # right half from the top to the tip, then its mirror image
    y_right = (tip - x)[::-1]
    r_right = r[::-1]
    y = np.concatenate((-y_right[::-1], y_right[1:]))
    rr = np.concatenate((r_right[::-1], r_right[1:]))
    logger.debug("ansatz A=%.6g B=%.6g mu=%.4g blend at ρ=%.3g", A, B, mu, blend_rho)
    return AnsatzGeometry(A, B, mu, blend_rho, y, rr)


def build_ansatz(spec: AnsatzSpec, bowl: Optional[BowlProfile] = None) -> FlowState:
    """
    Rescaled state at τ0 resembling an ancient oval.

    Raises:
        AnsatzError: if the glued curve fails the convexity check after
            resampling.
    """
    geometry = ansatz_geometry(spec, bowl)
    curve = resample_uniform(geometry.y, geometry.r, spec.nodes, spec.n)
    violation = convexity_violation(curve)
    if violation > 1e-6:
        raise AnsatzError(
            f"glued ansatz is not convex (violation {violation:.3e}); widen the blend"
        )
    return FlowState(spec.tau0, curve, rescaled=True, symmetric=True)


# ---------------------------------------------------------------------------
# Region reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionReport:
    """
    Sup-norm comparison of a run with one asymptotic chart.

    Attributes:
        region: parabolic, intermediate, tip or global.
        sup_error: Largest error over the recorded times.
        tau: Recorded times.
        errors: Error at each recorded time.
        fits: Fitted constants and auxiliary checks.
    """

    region: str
    sup_error: float
    tau: FloatArray
    errors: FloatArray
    fits: Dict[str, float] = field(default_factory=dict)

    def growth(self) -> float:
        """Last error over the first; 1 when the first is zero."""
        first, last = float(self.errors[0]), float(self.errors[-1])
        return last / first if first > 0 else 1.0

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "sup_error": self.sup_error,
            "growth": self.growth(),
            "fits": dict(self.fits),
        }


def _check_run(run: FlowRun) -> None:
    if not run.times:
        raise UsageError("run has no recorded states")
    if any(t >= 0 for t in run.times):
        raise UsageError("region checks need rescaled times τ < 0")


def _graph(curve: ArcCurve) -> PchipInterpolator:
    if np.any(np.diff(curve.y) <= 0):
        raise UsageError("curve is not a graph over the axis")
    return PchipInterpolator(curve.y, curve.r, extrapolate=False)


def parabolic_profile(y: FloatArray, tau: float, n: int) -> FloatArray:
    return cylinder_radius(n) * (1.0 - (y * y - 2.0) / (4.0 * abs(tau)))


def intermediate_profile(z: FloatArray, n: int) -> FloatArray:
    return math.sqrt(n - 1) * np.sqrt(np.clip(2.0 - z * z, 0.0, None))


def verify_parabolic(run: FlowRun, M: float = 2.0, samples: int = 201) -> RegionReport:
    """sup_{|y| ≤ M} |u − √(2(n−1))(1 − (y²−2)/(4|τ|))|·|τ| per recorded τ."""
    _check_run(run)
    if M <= 0:
        raise UsageError("M must be positive")
    y = np.linspace(-M, M, samples)
    errors = []
    for tau, curve in zip(run.times, run.curves):
        if curve.y[-1] <= M:
            raise UsageError(f"window |y| <= {M} reaches the tip at τ={tau:.4g}")
        u = _graph(curve)(y)
        errors.append(float(np.max(np.abs(u - parabolic_profile(y, tau, curve.n)))) * abs(tau))
    errs = np.asarray(errors)
    return RegionReport("parabolic", float(errs.max()), np.asarray(run.times), errs, {"M": M})


def trace_characteristic(
    L: float, tau1: float, tau_end: float, h: float = 1e-2
) -> Tuple[FloatArray, FloatArray]:
    """
    Integrates dz/dτ = (z/2)(1 − 1/τ) from z = L/√|τ1| at τ1.

    Along the traced curve τ − τ1 = log(z²|τ|/L²).
    """
    if not (tau1 < tau_end < 0):
        raise UsageError("need tau1 < tau_end < 0")
    steps = max(1, int(math.ceil((tau_end - tau1) / h)))
    step = (tau_end - tau1) / steps
    ts, zs, _ = RK4().integrate(
        lambda t, z: 0.5 * z * (1.0 - 1.0 / t),
        tau1,
        [L / math.sqrt(abs(tau1))],
        step,
        steps,
    )
    return ts, zs[:, 0]


def lower_barrier_check(
    run: FlowRun,
    y_from: float = 2.0,
    kappa_range: Tuple[float, float] = (0.3, 1.0),
    iterations: int = 8,
    h: float = 2e-2,
) -> Dict[str, float]:
    """
    Fits the cap barrier u(·, τ) ≥ u_a on y_from ≤ y ≤ d̄ with a = √(|τ|/(2K₁)).

    K₁ is the smallest value (largest cap) for which the barrier holds at the
    first recorded state; the barrier is then checked at every recorded state.
    Writing a = κ√(2|τ|), K₁ = 1/(4κ²).

    Raises:
        UsageError: if even the smallest cap does not fit under the first state.
    """
    _check_run(run)

    def margin(curve: ArcCurve, tau: float, kappa: float) -> float:
        a = kappa * math.sqrt(2.0 * abs(tau))
        # a cap reaching past the tip cannot lie below the surface
        if a <= y_from or a >= curve.y[-1]:
            return -math.inf
        leaf = shoot_leaf(a, curve.n, y_min=y_from, h=h, tip_step=h)
        sel = leaf.y >= y_from
        u = _graph(curve)(leaf.y[sel])
        ok = np.isfinite(u)
        if not np.any(ok):
            return -math.inf
        return float(np.min(u[ok] - leaf.u[sel][ok]))

    first_tau, first_curve = run.times[0], run.curves[0]
    lo, hi = kappa_range
    if margin(first_curve, first_tau, lo) < 0:
        raise UsageError(f"no cap with a/√(2|τ|) >= {lo} fits under the first state")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if margin(first_curve, first_tau, mid) >= 0:
            lo = mid
        else:
            hi = mid
    K1 = 1.0 / (4.0 * lo * lo)
    violations = 0
    worst = math.inf
    for tau, curve in zip(run.times, run.curves):
        m = margin(curve, tau, lo)
        worst = min(worst, m)
        if m < -1e-9:
            violations += 1
    return {
        "K1": K1,
        "barrier_y_from": y_from,
        "barrier_violations": float(violations),
        "barrier_margin": worst,
    }


def upper_barrier_check(run: FlowRun, L: float = 4.0, h: float = 1e-2) -> Dict[str, float]:
    """
    Compares v̄ = ū² − 2(n−1) with w = e^{τ−τ1}·v̄(z1, τ1) along the
    characteristic leaving z1 = L/√|τ1| at the first recorded time τ1.

    Concavity makes v̄ a subsolution of the transport equation that w solves,
    so v̄ ≤ w at every later record where the characteristic is still on the
    curve. `upper_barrier_margin` is the largest v̄ − w.

    Raises:
        UsageError: with fewer than two recorded times or when the
            characteristic starts off the curve.
    """
    _check_run(run)
    times = np.asarray(run.times, dtype=np.float64)
    if times.size < 2 or times[-1] <= times[0]:
        raise UsageError("upper barrier needs at least two increasing recorded times")
    tau1 = float(times[0])
    ts, zs = trace_characteristic(L, tau1, float(times[-1]), h)
    z_rec = np.interp(times, ts, zs)
    c2 = cylinder_radius(run.curves[0].n) ** 2

    u1 = float(_graph(run.curves[0])(L))
    if not math.isfinite(u1):
        raise UsageError(f"y = {L} is off the first recorded curve")
    v1 = u1 * u1 - c2
    gaps = []
    for tau, z, curve in zip(times[1:], z_rec[1:], run.curves[1:]):
        u = float(_graph(curve)(z * math.sqrt(abs(tau))))
        if not math.isfinite(u):
            # characteristic has left the curve
            continue
        gaps.append(u * u - c2 - math.exp(tau - tau1) * v1)
    gaps_arr = np.asarray(gaps)
    return {
        "upper_barrier_checked": float(gaps_arr.size),
        "upper_barrier_margin": float(gaps_arr.max()) if gaps_arr.size else 0.0,
        "upper_barrier_violations": float(np.count_nonzero(gaps_arr > 1e-9)),
    }


def verify_intermediate(
    run: FlowRun,
    z_window: Tuple[float, float] = (0.2, 1.2),
    samples: int = 101,
    L: float = 4.0,
    barrier: bool = True,
) -> RegionReport:
    """
    sup over the z-window of |u(z√|τ|) − √(n−1)√(2 − z²)| per recorded τ,
    with the characteristic bookkeeping, the upper barrier along the
    characteristic and, optionally, the cap barrier.
    """
    _check_run(run)
    lo, hi = z_window
    if not (0 <= lo < hi < math.sqrt(2.0)):
        raise UsageError("z-window must lie inside [0, √2)")
    z = np.linspace(lo, hi, samples)
    errors = []
    for tau, curve in zip(run.times, run.curves):
        u = _graph(curve)(z * math.sqrt(abs(tau)))
        if not np.all(np.isfinite(u)):
            raise UsageError(f"z-window leaves the curve at τ={tau:.4g}")
        errors.append(float(np.max(np.abs(u - intermediate_profile(z, curve.n)))))
    errs = np.asarray(errors)
    fits: Dict[str, float] = {"z_lo": lo, "z_hi": hi}

    times = np.asarray(run.times)
    if times.size > 1 and times[-1] > times[0]:
        ts, zs = trace_characteristic(L, float(times[0]), float(times[-1]))
        book = ts - ts[0] - np.log(zs * zs * np.abs(ts) / (L * L))
        fits["characteristic_residual"] = float(np.max(np.abs(book)))
        fits["characteristic_z_end"] = float(zs[-1])
        fits.update(upper_barrier_check(run, L))
    if barrier:
        fits.update(lower_barrier_check(run))
    return RegionReport("intermediate", float(errs.max()), times, errs, fits)


def tip_distance(
    curve: ArcCurve, bowl: BowlProfile, rho_window: float, min_nodes: int = MIN_TIP_NODES
) -> float:
    """
    Distance between the bowl and the right tip blown up by μ = 2H(tip).

    Returns max |μ(y_tip − y) − Ψ(μr)| over nodes with μr ≤ rho_window.

    Raises:
        ResolutionError: if fewer than `min_nodes` nodes fall in the window.
    """
    H = mean_curvature(curve)
    mu = 2.0 * float(H[-1])
    rho = mu * curve.r
    inside = rho <= rho_window
    # contiguous run ending at the tip
    count = int(np.argmin(inside[::-1])) if not np.all(inside) else inside.size
    if count < min_nodes:
        raise ResolutionError(
            f"only {count} nodes within ρ ≤ {rho_window} of the tip (need {min_nodes})"
        )
    idx = slice(curve.y.size - count, curve.y.size)
    x = mu * (curve.y[-1] - curve.y[idx])
    return float(np.max(np.abs(x - bowl(rho[idx]))))


def verify_tip(
    run: FlowRun,
    bowl: Optional[BowlProfile] = None,
    rho_window: float = 10.0,
    min_nodes: int = MIN_TIP_NODES,
) -> RegionReport:
    """Tip-versus-bowl distance per recorded τ, in bowl units."""
    _check_run(run)
    bowl = bowl or solve_bowl(run.curves[0].n)
    errs = np.asarray(
        [tip_distance(curve, bowl, rho_window, min_nodes) for curve in run.curves]
    )
    return RegionReport(
        "tip", float(errs.max()), np.asarray(run.times), errs, {"rho_window": rho_window}
    )


def verify_global(run: FlowRun) -> RegionReport:
    """
    Diameter, curvature and area laws per recorded τ.

    The error series is |d̄/√(2|τ|) − 1|. The fits carry the extreme values of
    H̄_max/√|τ|, H̄_max/d̄ and Ā/d̄ (the fitted c and C) and the largest
    |d̄′| − ½d̄. `harnack_drop` is the largest relative decrease of the
    unrescaled H_max between records.
    """
    _check_run(run)
    tau = np.asarray(run.times, dtype=np.float64)
    dbar = np.array([d.dbar for d in run.diagnostics])
    hmax = np.array([d.Hmax for d in run.diagnostics])
    area = np.array([d.area for d in run.diagnostics])
    diam_ratio = dbar / np.sqrt(2.0 * np.abs(tau))
    h_ratio = hmax / np.sqrt(np.abs(tau))
    fits = {
        "dbar_ratio_min": float(diam_ratio.min()),
        "dbar_ratio_max": float(diam_ratio.max()),
        "Hmax_ratio_min": float(h_ratio.min()),
        "Hmax_ratio_max": float(h_ratio.max()),
        "Hmax_over_dbar_max": float(np.max(hmax / dbar)),
        "area_over_dbar_min": float(np.min(area / dbar)),
        "area_over_dbar_max": float(np.max(area / dbar)),
        "argmax_at_tip": float(all(d.argmax_at_tip for d in run.diagnostics)),
    }
    if tau.size >= 3:
        rate = np.gradient(dbar, tau, edge_order=2)
        fits["dbar_rate_excess"] = float(np.max(np.abs(rate) - 0.5 * dbar))
    if tau.size >= 2:
        # unrescaled H_max = e^{τ/2}·H̄_max is nondecreasing (Harnack); monitored only
        h_unscaled = np.exp(0.5 * tau) * hmax
        fits["harnack_drop"] = float(max(0.0, np.max(-np.diff(h_unscaled) / h_unscaled[:-1])))
    errs = np.abs(diam_ratio - 1.0)
    return RegionReport("global", float(errs.max()), tau, errs, fits)


def verify_monotonicity(run: FlowRun) -> RegionReport:
    """
    ℋ and the pointwise monotone quantities along a run.

    The error series is the positive part of dℋ/dτ. The fits carry the
    largest rate, its mismatch with the dissipation integral, the largest
    R = κ/λ₁, the smallest P_y and Q_y on [0, 0.9d̄] and whether H̄ peaks at
    a tip at every record.
    """
    _check_run(run)
    n = run.curves[0].n
    values = [huisken_curve(c.y, c.r, n) for c in run.curves]
    losses = [dissipation(c, mean_curvature(c)) for c in run.curves]
    report = monotonicity_series(run.times, values, losses)
    diag = run.diagnostics
    fits = {
        "max_rate": report.max_rate,
        "max_mismatch": report.max_mismatch,
        "Rmax": float(max(d.Rmax for d in diag)),
        "min_Py": float(min(d.min_Py for d in diag)),
        "min_Qy": float(min(d.min_Qy for d in diag)),
        "argmax_at_tip": float(all(d.argmax_at_tip for d in diag)),
    }
    errs = np.maximum(report.rate, 0.0)
    return RegionReport("monotonicity", float(errs.max()), report.tau, errs, fits)


def _median_ratio(top: Sequence[float], bottom: NDArray[np.float64]) -> float:
    keep = bottom != 0.0
    if not keep.any():
        return float("nan")
    return float(np.median(np.asarray(top)[keep] / bottom[keep]))


def verify_alpha(run: FlowRun, grid: Grid) -> RegionReport:
    """
    The neutral-mode law along a run.

    α is the untruncated neutral coefficient (`alpha_wide`); the error
    series is |−4τ|α| − 1|. `truncation_bias` is the median ratio of the
    truncated α to it, and `zero_dominant` is 1/0 once the window is long
    enough to classify the modes, NaN before.
    """
    _check_run(run)
    n = run.curves[0].n
    profiles = [graph_samples(c, grid, symmetric=True) for c in run.curves]
    dbar = [d.dbar for d in run.diagnostics]
    splits, _ = spectral_series(run.times, profiles, dbar, grid, n)
    tau = np.asarray(run.times, dtype=np.float64)
    wide = np.array([s.alpha_wide for s in splits])
    track = track_alpha(tau, wide)
    modes = classify_modes(tau, splits)
    fits = {
        "slope_check": track.slope_check,
        "alpha_fit": track.alpha_fit,
        "sign": float(track.sign),
        "truncation_bias": _median_ratio([s.alpha for s in splits], wide),
        "zero_dominant": (
            float("nan") if modes.dominant == "undetermined" else float(modes.dominant == "zero")
        ),
    }
    errs = np.abs(-4.0 * tau * np.abs(wide) - 1.0)
    return RegionReport("alpha", float(errs.max()), tau, errs, fits)


def verify_inner_outer(
    run: FlowRun,
    grid: Grid,
    lengths: Sequence[float] = INNER_OUTER_LENGTHS,
    delta0: float = DEFAULT_DELTA0,
) -> RegionReport:
    """
    Inner-outer ratios at every record and inner length L.

    Records with ℋ above the cylinder are skipped. The error series is the
    largest ratio_grad per record; the fits carry the spread (max/min) of
    ratio_grad and of ratio_mass·L² over all evaluated pairs.

    Raises:
        HypothesisViolation: if no record satisfies ℋ(Γ) <= ℋ(Σ).
    """
    _check_run(run)
    n = run.curves[0].n
    tau: List[float] = []
    worst: List[float] = []
    grads: List[float] = []
    masses: List[float] = []
    skipped = 0
    for time, curve in zip(run.times, run.curves):
        u = graph_samples(curve, grid, symmetric=True)
        value = huisken_curve(curve.y, curve.r, n)
        try:
            checks = [inner_outer_check(u, grid, n, L, delta0, value) for L in lengths]
        except HypothesisViolation as exc:
            logger.info("τ=%.5g skipped: %s", time, exc)
            skipped += 1
            continue
        tau.append(time)
        worst.append(max(c.ratio_grad for c in checks))
        grads.extend(c.ratio_grad for c in checks)
        masses.extend(c.ratio_mass * c.L * c.L for c in checks)
    if not tau:
        raise HypothesisViolation("ℋ exceeds the cylinder value at every record")
    g = np.asarray(grads)
    m = np.asarray(masses)
    fits = {
        "pairs": float(g.size),
        "skipped": float(skipped),
        "grad_max": float(g.max()),
        "grad_spread": float(g.max() / g.min()) if g.min() > 0 else math.inf,
        "mass_L2_max": float(m.max()),
        "mass_L2_spread": float(m.max() / m.min()) if m.min() > 0 else math.inf,
    }
    errs = np.asarray(worst)
    return RegionReport("inner_outer", float(errs.max()), np.asarray(tau), errs, fits)


def acceptance(
    reports: Sequence[RegionReport], n: int, baseline: Optional[Sequence[RegionReport]] = None
) -> Dict[str, bool]:
    """
    Pass/fail per criterion for a set of region reports.

    With a baseline (the reports of the initial state) every sup error must
    also stay within twice its initial value.
    """
    by_region = {rep.region: rep for rep in reports}
    out: Dict[str, bool] = {}
    if "parabolic" in by_region:
        out["parabolic"] = by_region["parabolic"].sup_error <= PARABOLIC_BOUND
    if "intermediate" in by_region:
        rep = by_region["intermediate"]
        out["intermediate"] = rep.sup_error <= INTERMEDIATE_BOUND * math.sqrt(n - 1)
        if "barrier_violations" in rep.fits:
            out["lower_barrier"] = rep.fits["barrier_violations"] == 0
        if "upper_barrier_violations" in rep.fits:
            out["upper_barrier"] = rep.fits["upper_barrier_violations"] == 0
    if "tip" in by_region:
        out["tip"] = by_region["tip"].sup_error <= TIP_BOUND
    if "global" in by_region:
        f = by_region["global"].fits
        out["diameter"] = (
            DIAMETER_WINDOW[0] <= f["dbar_ratio_min"] and f["dbar_ratio_max"] <= DIAMETER_WINDOW[1]
        )
        out["Hmax"] = (
            HMAX_WINDOW[0] <= f["Hmax_ratio_min"] and f["Hmax_ratio_max"] <= HMAX_WINDOW[1]
        )
        out["Hmax_le_dbar"] = f["Hmax_over_dbar_max"] <= 1.0
        if "dbar_rate_excess" in f:
            out["dbar_rate"] = f["dbar_rate_excess"] <= 1e-3
    if "monotonicity" in by_region:
        f = by_region["monotonicity"].fits
        out["huisken_monotone"] = f["max_rate"] <= MONOTONE_TOL
        out["Rmax"] = f["Rmax"] <= RMAX_BOUND
        out["PQ_monotone"] = min(f["min_Py"], f["min_Qy"]) >= -DERIVATIVE_TOL
        out["argmax_at_tip"] = f["argmax_at_tip"] == 1.0
    if "alpha" in by_region:
        f = by_region["alpha"].fits
        out["alpha_law"] = (
            ALPHA_SLOPE_WINDOW[0] <= f["slope_check"] <= ALPHA_SLOPE_WINDOW[1]
            and ALPHA_FIT_WINDOW[0] <= f["alpha_fit"] <= ALPHA_FIT_WINDOW[1]
        )
        if not math.isnan(f["zero_dominant"]):
            out["zero_mode"] = f["zero_dominant"] == 1.0
    if "inner_outer" in by_region:
        f = by_region["inner_outer"].fits
        out["inner_outer"] = (
            f["grad_spread"] <= INNER_OUTER_SPREAD and f["mass_L2_spread"] <= INNER_OUTER_SPREAD
        )
    if baseline is not None:
        start = {rep.region: rep.sup_error for rep in baseline}
        for rep in reports:
            if rep.region in start and start[rep.region] > 0:
                out[f"{rep.region}_persists"] = rep.sup_error <= 2.0 * start[rep.region]
    return out


def verify_all(
    run: FlowRun,
    bowl: Optional[BowlProfile] = None,
    rho_window: float = 10.0,
    M: float = 2.0,
    L: float = 4.0,
    barrier: bool = True,
) -> List[RegionReport]:
    """All four region reports of a run."""
    bowl = bowl or solve_bowl(run.curves[0].n)
    return [
        verify_parabolic(run, M),
        verify_intermediate(run, L=L, barrier=barrier),
        verify_tip(run, bowl, rho_window),
        verify_global(run),
    ]
