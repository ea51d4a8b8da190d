"""
Mean curvature flow of closed convex surfaces of revolution.

A state is the generating curve of the surface in the (y, r) half plane, as an
`ArcCurve` with nodes equally spaced in arclength. Each step moves the nodes
along the outward normal N = (−sin θ, cos θ) with speed

    −H                 (unrescaled flow, time t)
    −H + ½⟨X, N⟩       (rescaled flow, time τ = −log(−t))

and then redistributes them to equal arclength, so tangential drift never
accumulates. Curvatures come from the three-point circumcircle (Menger)
formula; the tip nodes see a ghost neighbour reflected across the axis,
which makes the tip umbilic: λ₁ = κ and H = nκ there.

The explicit step is stable for Δ ≤ cfl·h²/n, the tip ghost acting as a
second diffusion of strength n − 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special
from scipy.interpolate import CubicSpline, PchipInterpolator

from oval_lab_app.errors import InvalidStateError, StepRejected, UsageError
from oval_lab_app.huisken import huisken_curve
from oval_lab_app.numerics_core import (
    ArcCurve,
    Grid,
    check_dimension,
    nonuniform_second_derivative,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Ghost nodes used on each side when splining through a tip.
_GHOSTS = 3
_MAX_HALVINGS = 8
# Fraction of the half-diameter used for graph-chart diagnostics.
GRAPH_WINDOW = 0.9


# ---------------------------------------------------------------------------
# State and geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowState:
    """
    A time and a generating curve.

    `time` is τ for rescaled states and t otherwise. Symmetric states are
    kept even under y ↦ −y.
    """

    time: float
    curve: ArcCurve
    rescaled: bool = True
    symmetric: bool = True

    @property
    def n(self) -> int:
        return self.curve.n


def _with_ghosts(curve: ArcCurve) -> Tuple[FloatArray, FloatArray]:
    y = np.concatenate(([curve.y[1]], curve.y, [curve.y[-2]]))
    r = np.concatenate(([-curve.r[1]], curve.r, [-curve.r[-2]]))
    return y, r


def principal_curvatures(curve: ArcCurve) -> Tuple[FloatArray, FloatArray]:
    """
    (κ, λ₁): curvature of the generating curve and the rotational curvature
    cos θ / r, both positive on convex surfaces; equal at the tips.

    Raises:
        InvalidStateError: if an interior node sits on the axis.
    """
    if np.any(curve.r[1:-1] <= 0):
        raise InvalidStateError("interior nodes must stay off the axis")
    y, r = _with_ghosts(curve)
    ay, ar = y[1:-1] - y[:-2], r[1:-1] - r[:-2]
    by, br = y[2:] - y[1:-1], r[2:] - r[1:-1]
    cy, cr = y[2:] - y[:-2], r[2:] - r[:-2]
    cross = ay * br - ar * by
    kappa = -2.0 * cross / (np.hypot(ay, ar) * np.hypot(by, br) * np.hypot(cy, cr))
    lam = np.empty_like(kappa)
    lam[1:-1] = np.cos(curve.theta[1:-1]) / curve.r[1:-1]
    lam[0] = kappa[0]
    lam[-1] = kappa[-1]
    return kappa, lam


def mean_curvature(curve: ArcCurve) -> FloatArray:
    """H = κ + (n−1)λ₁ at every node; H = nκ at the tips."""
    kappa, lam = principal_curvatures(curve)
    return kappa + (curve.n - 1) * lam


def normal_speed(curve: ArcCurve, rescaled: bool = True) -> FloatArray:
    """Outward normal velocity −H (+ ½⟨X, N⟩ when rescaled)."""
    speed = -mean_curvature(curve)
    if rescaled:
        speed = speed + 0.5 * (-curve.y * np.sin(curve.theta) + curve.r * np.cos(curve.theta))
    return speed


def resample_uniform(y: ArrayLike, r: ArrayLike, count: int, n: int) -> ArcCurve:
    """
    Redistributes a polyline from tip to tip to `count` nodes equally spaced in
    arclength.

    The coordinates are splined against chord length with reflected ghost
    nodes at both tips (y even, r odd), so the curve stays smooth across the
    axis.
    """
    y = np.asarray(y, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if count < 5 or y.size < 5:
        raise UsageError("need at least 5 nodes")
    s = np.concatenate(([0.0], np.cumsum(np.hypot(np.diff(y), np.diff(r)))))
    if np.any(np.diff(s) <= 0):
        raise InvalidStateError("polyline has repeated nodes")
    length = s[-1]
    k = min(_GHOSTS, y.size - 2)
    left = slice(k, 0, -1)
    right = slice(-2, -k - 2, -1)
    s_ext = np.concatenate((-s[left], s, 2.0 * length - s[right]))
    y_ext = np.concatenate((y[left], y, y[right]))
    r_ext = np.concatenate((-r[left], r, -r[right]))
    s_new = np.linspace(0.0, length, count)
    y_new = CubicSpline(s_ext, y_ext)(s_new)
    r_new = CubicSpline(s_ext, r_ext)(s_new)
    return ArcCurve.from_points(y_new, r_new, n)


def symmetrize(curve: ArcCurve) -> ArcCurve:
    """Average of a curve and its mirror image under y ↦ −y."""
    y = 0.5 * (curve.y - curve.y[::-1])
    r = 0.5 * (curve.r + curve.r[::-1])
    return ArcCurve.from_points(y, r, curve.n)


def convexity_violation(curve: ArcCurve) -> float:
    """max(0, −min κ, −min λ₁) over the nodes."""
    kappa, lam = principal_curvatures(curve)
    return float(max(0.0, -np.min(kappa), -np.min(lam)))


# ---------------------------------------------------------------------------
# Initial data and change of variables
# ---------------------------------------------------------------------------


def sphere_curve(radius: float, n: int, count: int) -> ArcCurve:
    """Half circle of the given radius centred at the origin."""
    check_dimension(n)
    if radius <= 0:
        raise UsageError("radius must be positive")
    theta = np.linspace(math.pi, 0.0, count)
    y = radius * np.cos(theta)
    r = radius * np.sin(theta)
    return ArcCurve.from_points(y, r, n)


def capped_cylinder_curve(radius: float, half_length: float, n: int, count: int) -> ArcCurve:
    """Cylinder of the given radius over |y| <= half_length closed by hemispheres."""
    check_dimension(n)
    if radius <= 0 or half_length < 0:
        raise UsageError("need radius > 0 and half_length >= 0")
    arc = np.linspace(math.pi, 0.5 * math.pi, 400)
    left_y = -half_length + radius * np.cos(arc)
    left_r = radius * np.sin(arc)
    mid = np.linspace(-half_length, half_length, 400)[1:-1]
    y = np.concatenate((left_y, mid, -left_y[::-1]))
    r = np.concatenate((left_r, np.full(mid.size, radius), left_r[::-1]))
    keep = np.concatenate(([True], np.hypot(np.diff(y), np.diff(r)) > 0))
    return resample_uniform(y[keep], r[keep], count, n)


def rescale_state(state: FlowState) -> FlowState:
    """X̄ = X/√(−t) at τ = −log(−t), for an unrescaled state with t < 0."""
    if state.rescaled:
        raise UsageError("state is already rescaled")
    t = state.time
    if t >= 0:
        raise UsageError(f"rescaling needs t < 0 (got {t})")
    scale = 1.0 / math.sqrt(-t)
    curve = state.curve
    return FlowState(
        -math.log(-t),
        ArcCurve(curve.y * scale, curve.r * scale, curve.theta, curve.n),
        rescaled=True,
        symmetric=state.symmetric,
    )


def unrescale_state(state: FlowState) -> FlowState:
    """X = e^{−τ/2}X̄ at t = −e^{−τ}."""
    if not state.rescaled:
        raise UsageError("state is not rescaled")
    scale = math.exp(-0.5 * state.time)
    curve = state.curve
    return FlowState(
        -math.exp(-state.time),
        ArcCurve(curve.y * scale, curve.r * scale, curve.theta, curve.n),
        rescaled=False,
        symmetric=state.symmetric,
    )


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------


def stable_step(state: FlowState, cfl: float = 0.2) -> float:
    """cfl·h²/n with h the node spacing in arclength."""
    return cfl * state.curve.spacing**2 / state.n


def _displace(curve: ArcCurve, speed: FloatArray, dt: float) -> Tuple[FloatArray, FloatArray]:
    y = curve.y - dt * speed * np.sin(curve.theta)
    r = curve.r + dt * speed * np.cos(curve.theta)
    r[0] = 0.0
    r[-1] = 0.0
    return y, r


def _as_curve(y: FloatArray, r: FloatArray, n: int) -> ArcCurve:
    """Validates moved nodes; anything that folds the polyline is a rejection."""
    dy, dr = np.diff(y), np.diff(r)
    if np.any(dy[1:] * dy[:-1] + dr[1:] * dr[:-1] <= 0):
        raise StepRejected("nodes swapped order during the step")
    if np.any(r[1:-1] <= 0) or not np.all(np.isfinite(y)):
        raise StepRejected("a node crossed the axis during the step")
    try:
        return ArcCurve.from_points(y, r, n)
    except InvalidStateError as exc:
        raise StepRejected(str(exc)) from exc


def _heun_step(state: FlowState, dt: float) -> FlowState:
    curve = state.curve
    n = curve.n
    k1 = normal_speed(curve, state.rescaled)
    y1, r1 = _displace(curve, k1, dt)
    mid = _as_curve(y1, r1, n)
    k2 = normal_speed(mid, state.rescaled)
    y2, r2 = _displace(mid, k2, dt)
    y = 0.5 * (curve.y + y2)
    r = 0.5 * (curve.r + r2)
    moved = _as_curve(y, r, n)
    out = resample_uniform(moved.y, moved.r, curve.y.size, n)
    if state.symmetric:
        out = symmetrize(out)
    return FlowState(state.time + dt, out, state.rescaled, state.symmetric)


def step_rescaled(state: FlowState, dtau: float) -> FlowState:
    """
    One Heun step of the rescaled flow followed by redistribution.

    Raises:
        UsageError: for an unrescaled state or a non-positive step.
        StepRejected: if the step folds the curve; retry with a smaller step.
    """
    if not state.rescaled:
        raise UsageError("step_rescaled needs a rescaled state")
    if dtau <= 0:
        raise UsageError("time step must be positive")
    return _heun_step(state, dtau)


def step_unrescaled(state: FlowState, dt: float) -> FlowState:
    """As step_rescaled, for the unrescaled flow."""
    if state.rescaled:
        raise UsageError("step_unrescaled needs an unrescaled state")
    if dt <= 0:
        raise UsageError("time step must be positive")
    return _heun_step(state, dt)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowDiagnostics:
    """
    Geometric quantities of one state.

    Attributes:
        dbar: Half the distance between the tips.
        Hmax: Largest mean curvature.
        Htip: Mean curvature at the tips (average of both).
        area: Area of the surface in R^{n+1}.
        Rmax: Largest κ/λ₁ on |y| <= 0.9·dbar.
        min_Py: Smallest y-derivative of P = −u_y/u on 0 <= y <= 0.9·dbar.
        min_Qy: Smallest y-derivative of Q = u_y²/(u²(1+u_y²)) on the same window.
        min_lambda_y: Smallest y-derivative of λ₁ on the same window.
        huisken: Gaussian area ∫ r^{n−1}e^{−(y²+r²)/4} ds.
        u0: Radius at y = 0.
        argmax_at_tip: Whether H is largest at a tip node (up to 1e-9 relative).
    """

    dbar: float
    Hmax: float
    Htip: float
    area: float
    Rmax: float
    min_Py: float
    min_Qy: float
    min_lambda_y: float
    huisken: float
    u0: float
    argmax_at_tip: bool

    def to_dict(self) -> dict:
        return {
            "dbar": self.dbar,
            "Hmax": self.Hmax,
            "Htip": self.Htip,
            "area": self.area,
            "Rmax": self.Rmax,
            "minPy": self.min_Py,
            "minQy": self.min_Qy,
            "minLambday": self.min_lambda_y,
            "huisken": self.huisken,
            "u0": self.u0,
        }


def sphere_area(n: int) -> float:
    """Area of the unit S^{n−1}."""
    return 2.0 * math.pi ** (n / 2.0) / float(special.gamma(n / 2.0))


def _window_min(values: FloatArray, y: FloatArray) -> float:
    if values.size < 3:
        return float("nan")
    d1, _ = nonuniform_second_derivative(values, y)
    return float(np.min(d1[1:-1])) if d1.size > 2 else float("nan")


def diagnostics(state: FlowState) -> FlowDiagnostics:
    """All diagnostics of a state; R, P, Q and λ₁ use the right half of the curve."""
    curve = state.curve
    n = curve.n
    kappa, lam = principal_curvatures(curve)
    H = kappa + (n - 1) * lam
    s = curve.arclength
    dbar = 0.5 * float(curve.y[-1] - curve.y[0])
    area = sphere_area(n) * float(integrate.trapezoid(curve.r ** (n - 1), s))

    centre = 0.5 * float(curve.y[-1] + curve.y[0])
    yc = curve.y - centre
    interior = np.arange(1, curve.y.size - 1)
    window = interior[np.abs(yc[interior]) <= GRAPH_WINDOW * dbar]
    Rmax = float(np.max(kappa[window] / lam[window])) if window.size else 1.0

    half = interior[(yc[interior] >= 0) & (yc[interior] <= GRAPH_WINDOW * dbar)]
    y_half = yc[half]
    r_half = curve.r[half]
    theta = curve.theta[half]
    P = -np.tan(theta) / r_half
    Q = np.sin(theta) ** 2 / r_half**2
    u0 = float(np.interp(0.0, yc, curve.r)) if yc[0] < 0 < yc[-1] else float("nan")

    return FlowDiagnostics(
        dbar=dbar,
        Hmax=float(np.max(H)),
        Htip=0.5 * float(H[0] + H[-1]),
        area=area,
        Rmax=Rmax,
        min_Py=_window_min(P, y_half),
        min_Qy=_window_min(Q, y_half),
        min_lambda_y=_window_min(lam[half], y_half),
        huisken=huisken_curve(curve.y, curve.r, n),
        u0=u0,
        argmax_at_tip=bool(max(H[0], H[-1]) >= (1.0 - 1e-9) * float(np.max(H))),
    )


def graph_samples(curve: ArcCurve, grid: Grid, symmetric: bool = False) -> FloatArray:
    """
    The curve as a graph r = u(y) sampled on `grid`, zero beyond the tips.

    Raises:
        InvalidStateError: if the curve is not a graph over the axis.
    """
    y = curve.y
    if np.any(np.diff(y) <= 0):
        raise InvalidStateError("curve is not a graph over the axis")
    nodes = grid.nodes
    u = np.zeros_like(nodes)
    inside = (nodes > y[0]) & (nodes < y[-1])
    u[inside] = np.clip(PchipInterpolator(y, curve.r)(nodes[inside]), 0.0, None)
    if symmetric:
        u = 0.5 * (u + u[::-1])
    return u


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


@dataclass
class FlowRun:
    """Recorded states of one run."""

    times: List[float] = field(default_factory=list)
    diagnostics: List[FlowDiagnostics] = field(default_factory=list)
    curves: List[ArcCurve] = field(default_factory=list)
    steps: int = 0
    rejected: int = 0

    def record(self, state: FlowState) -> None:
        self.times.append(state.time)
        self.diagnostics.append(diagnostics(state))
        self.curves.append(state.curve)

    @classmethod
    def from_curves(
        cls, times: List[float], curves: List[ArcCurve], rescaled: bool = True
    ) -> "FlowRun":
        """Rebuilds a run, diagnostics included, from saved snapshots."""
        if len(times) != len(curves):
            raise UsageError("need one time per curve")
        run = cls()
        for time, curve in zip(times, curves):
            run.record(FlowState(float(time), curve, rescaled=rescaled))
        return run


def evolve(
    state: FlowState,
    t_end: float,
    cfl: float = 0.2,
    record_every: float = 0.5,
    max_steps: Optional[int] = None,
    on_record: Optional[Callable[[FlowState], None]] = None,
) -> Tuple[FlowState, FlowRun]:
    """
    Advances a state to t_end with the largest stable steps, halving a step
    after each rejection.

    Args:
        state: Initial state (rescaled or not).
        t_end: Final time.
        cfl: Stability constant.
        record_every: Time between recorded states.
        max_steps: Optional cap on accepted steps.
        on_record: Called with every recorded state.

    Returns:
        (final state, run record).

    Raises:
        UsageError: if t_end precedes the state's time.
        StepRejected: if a step is still rejected after repeated halving.
    """
    if t_end < state.time:
        raise UsageError(f"t_end={t_end} precedes the current time {state.time}")
    run = FlowRun()
    step = step_rescaled if state.rescaled else step_unrescaled
    run.record(state)
    if on_record is not None:
        on_record(state)
    next_record = state.time + record_every
    while state.time < t_end - 1e-12:
        if max_steps is not None and run.steps >= max_steps:
            logger.warning("stopping after %d steps at time %.6g", run.steps, state.time)
            break
        dt = min(stable_step(state, cfl), t_end - state.time, max(next_record - state.time, 1e-15))
        for _ in range(_MAX_HALVINGS + 1):
            try:
                state = step(state, dt)
                break
            except StepRejected:
                run.rejected += 1
                dt *= 0.5
        else:
            raise StepRejected(f"step rejected {_MAX_HALVINGS} times at time {state.time:.6g}")
        run.steps += 1
        if state.time >= next_record - 1e-12 or state.time >= t_end - 1e-12:
            run.record(state)
            if on_record is not None:
                on_record(state)
            next_record += record_every
            logger.debug("time %.5g: %d steps", state.time, run.steps)
    if run.times[-1] != state.time:
        run.record(state)
    logger.info(
        "evolved to %.6g in %d steps (%d rejected)", state.time, run.steps, run.rejected
    )
    return state, run
