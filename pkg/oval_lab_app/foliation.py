"""
The shrinker foliation around the cylinder.

Caps Σ_a fill the inside of the cylinder r = √(2(n−1)) above the entry height
y0, trumpets Σ̃_b fill the outside below the cone r = b0·y. This module
assembles both families into an atlas, recovers the normal angle φ of the
leaf through any point, and checks the properties the comparison argument
relies on: leaves never cross, the calibration field e^{−|X|²/4}ν is
divergence free, the leaf-to-leaf normal variation is a positive Jacobi
field, and w is squeezed near 2 close to the cylinder.

Leaves are located by parameter rather than by shape: caps by t = 1/a² (so
the cylinder is the leaf t = 0 and the axis point (y, 0) is the leaf t = 1/y²),
trumpets by their slope b (the cylinder is b = 0). At a fixed height both
families are monotone in the parameter, which is what makes a monotone
cubic interpolant between neighbouring leaves the right tool.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import PchipInterpolator

from oval_lab_app.errors import DomainError, FoliationViolation, UsageError
from oval_lab_app.numerics_core import (
    check_dimension,
    cylinder_radius,
    nonuniform_second_derivative,
)
from oval_lab_app.shrinker_ode import (
    DEFAULT_B0,
    DEFAULT_CAP_EXTENT,
    TRUMPET_MIN_Y,
    ShrinkerLeaf,
    shoot_leaf,
    solve_trumpet,
    w_from_graph,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

_BISECTION_STEPS = 60


def default_a_grid(y0: float, a_max: float = 200.0, ratio: float = 1.05) -> FloatArray:
    """Geometric cap heights from y0 to a_max."""
    if not (y0 > 0 and a_max > y0 and ratio > 1):
        raise UsageError("need 0 < y0 < a_max and ratio > 1")
    count = int(math.floor(math.log(a_max / y0) / math.log(ratio))) + 1
    grid = y0 * ratio ** np.arange(count)
    if grid[-1] < a_max:
        grid = np.append(grid, a_max)
    return grid


def default_b_grid(b_min: float = 1e-3, b_max: float = DEFAULT_B0, count: int = 12) -> FloatArray:
    """Geometric trumpet slopes in [b_min, b_max]."""
    if not 0 < b_min < b_max or count < 2:
        raise UsageError("need 0 < b_min < b_max and at least two slopes")
    return np.geomspace(b_min, b_max, count)


@dataclass(frozen=True, eq=False)
class Foliation:
    """
    The leaf atlas.

    Attributes:
        n: Surface dimension.
        y0: Entry height; the foliation is asserted for y >= y0.
        caps: Cap leaves in increasing a.
        trumpets: Trumpet leaves in increasing b.
        b0: Largest admissible trumpet slope.
    """

    n: int
    y0: float
    caps: Tuple[ShrinkerLeaf, ...]
    trumpets: Tuple[ShrinkerLeaf, ...] = ()
    b0: float = DEFAULT_B0

    @property
    def cylinder_radius(self) -> float:
        return cylinder_radius(self.n)

    @property
    def a_grid(self) -> FloatArray:
        return np.array([leaf.parameter for leaf in self.caps])

    @property
    def b_grid(self) -> FloatArray:
        return np.array([leaf.parameter for leaf in self.trumpets])

    def manifest(self) -> Dict[str, Any]:
        """Summary of the atlas for the run store."""
        return {
            "n": self.n,
            "y0": self.y0,
            "cylinder_radius": self.cylinder_radius,
            "caps": [
                {
                    "a": leaf.parameter,
                    "y_star": leaf.y_star,
                    "turned": leaf.turned,
                    "y_Ma": leaf.y_Ma,
                    "sup_residual": leaf.sup_residual,
                }
                for leaf in self.caps
            ],
            "trumpets": [
                {
                    "b": leaf.parameter,
                    "u_at_y0": float(leaf.profile_at(self.y0)[0][0]),
                    "sup_residual": leaf.sup_residual,
                }
                for leaf in self.trumpets
            ],
        }


def _check_pair(lower: ShrinkerLeaf, upper: ShrinkerLeaf, y0: float) -> None:
    """Raises if the radial gap upper − lower changes sign on y >= y0."""
    top = min(lower.y_end, upper.y_end)
    y = lower.y[(lower.y >= y0) & (lower.y <= top)]
    if y.size == 0:
        return
    u_low, _ = lower.profile_at(y)
    u_up, _ = upper.profile_at(y)
    gap = u_up - u_low
    gap = gap[np.isfinite(gap)]
    if np.any(gap > 1e-12) and np.any(gap < -1e-12) or np.all(gap < -1e-12):
        pair = (lower.kind, lower.parameter, upper.parameter)
        raise FoliationViolation(
            f"{lower.kind} leaves {lower.parameter:.6g} and {upper.parameter:.6g} cross "
            f"(radial gap ranges over [{gap.min():.3e}, {gap.max():.3e}])",
            pair=pair,
        )


def _check_side(leaf: ShrinkerLeaf, y0: float, c: float) -> None:
    mask = (leaf.y >= y0) & (leaf.y <= leaf.y_end)
    u = leaf.u[mask]
    if leaf.kind == "cap":
        bad = u >= c
    else:
        bad = u <= c
    if np.any(bad):
        y_bad = float(leaf.y[mask][np.argmax(bad)])
        side = "inside" if leaf.kind == "cap" else "outside"
        raise FoliationViolation(
            f"{leaf.kind} {leaf.parameter:.6g} leaves the {side} of the cylinder at y={y_bad:.4g}",
            pair=(leaf.kind, leaf.parameter),
        )


def check_disjoint(foliation: Foliation) -> None:
    """
    Verifies that adjacent leaves do not cross on y >= y0 and that caps stay
    inside, trumpets outside the cylinder.

    Raises:
        FoliationViolation: naming the first offending pair.
    """
    c = foliation.cylinder_radius
    for leaf in foliation.caps + foliation.trumpets:
        _check_side(leaf, foliation.y0, c)
    for family in (foliation.caps, foliation.trumpets):
        for lower, upper in zip(family[:-1], family[1:]):
            _check_pair(lower, upper, foliation.y0)


def build(
    n: int,
    a_grid: ArrayLike,
    b_grid: ArrayLike,
    y0: float,
    h: float = 1e-2,
    cap_extent: float = DEFAULT_CAP_EXTENT,
    trumpet_Y: float = TRUMPET_MIN_Y,
    b0: float = DEFAULT_B0,
) -> Foliation:
    """
    Solves every leaf and assembles the atlas.

    Args:
        n: Surface dimension.
        a_grid: Increasing cap heights, all >= y0.
        b_grid: Increasing trumpet slopes in (0, b0].
        y0: Entry height.
        h: Arclength step for the caps.
        cap_extent: Tip-chart extent M.
        trumpet_Y: Seed height for the trumpets.

    Returns:
        A Foliation whose disjointness has been verified.

    Raises:
        UsageError: for unsorted or out-of-range grids.
        FoliationViolation: if two adjacent leaves cross.
    """
    n = check_dimension(n)
    a_grid = np.asarray(a_grid, dtype=np.float64)
    b_grid = np.asarray(b_grid, dtype=np.float64)
    if y0 <= 0:
        raise UsageError(f"y0 must be positive (got {y0})")
    if a_grid.size and (np.any(np.diff(a_grid) <= 0) or a_grid[0] < y0):
        raise UsageError("a_grid must be increasing with all heights >= y0")
    if b_grid.size and (np.any(np.diff(b_grid) <= 0) or b_grid[0] <= 0 or b_grid[-1] > b0):
        raise UsageError(f"b_grid must be increasing inside (0, {b0}]")

    caps = tuple(shoot_leaf(float(a), n, y_min=0.0, M=cap_extent, h=h) for a in a_grid)
    trumpets = tuple(
        solve_trumpet(float(b), n, (0.0, trumpet_Y), b0=b0) for b in b_grid
    )
    foliation = Foliation(n=n, y0=float(y0), caps=caps, trumpets=trumpets, b0=b0)
    check_disjoint(foliation)
    logger.info(
        "foliation n=%d: %d caps in [%.4g, %.4g], %d trumpets",
        n,
        len(caps),
        a_grid[0] if a_grid.size else float("nan"),
        a_grid[-1] if a_grid.size else float("nan"),
        len(trumpets),
    )
    return foliation


# ---------------------------------------------------------------------------
# Normal field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalSample:
    """The leaf through (y, r) and its normal angle φ, tan φ = u_y."""

    y: float
    r: float
    kind: str
    parameter: float
    phi: float

    @property
    def nu(self) -> Tuple[float, float]:
        return -math.sin(self.phi), math.cos(self.phi)


@dataclass(frozen=True)
class _Column:
    """One family at a fixed height: parameter, radius and angle per leaf."""

    params: FloatArray
    u: FloatArray
    phi: FloatArray

    def solve(self, r: FloatArray) -> FloatArray:
        """Parameters of the leaves through the radii r, by bisection."""
        radius = PchipInterpolator(self.params, self.u)
        sign = 1.0 if self.u[-1] > self.u[0] else -1.0
        lo = np.full_like(r, self.params[0])
        hi = np.full_like(r, self.params[-1])
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            past = sign * (radius(mid) - r) > 0
            hi = np.where(past, mid, hi)
            lo = np.where(past, lo, mid)
        return 0.5 * (lo + hi)

    def angle(self, params: FloatArray) -> FloatArray:
        return PchipInterpolator(self.params, self.phi)(params)


def _column(foliation: Foliation, y: float, kind: str) -> _Column:
    c = foliation.cylinder_radius
    params: List[float] = [0.0]
    radii: List[float] = [c]
    angles: List[float] = [0.0]
    if kind == "cap":
        for leaf in reversed(foliation.caps):
            if leaf.a <= y:
                continue
            u, uy = leaf.profile_at(y)
            if np.isfinite(u[0]) and np.isfinite(uy[0]):
                params.append(1.0 / leaf.a**2)
                radii.append(float(u[0]))
                angles.append(float(np.arctan(uy[0])))
        if foliation.caps and foliation.caps[0].a <= y:
            params.append(1.0 / y**2)
            radii.append(0.0)
            angles.append(-0.5 * math.pi)
    else:
        for leaf in foliation.trumpets:
            u, uy = leaf.profile_at(y)
            if np.isfinite(u[0]) and np.isfinite(uy[0]):
                params.append(leaf.parameter)
                radii.append(float(u[0]))
                angles.append(float(np.arctan(uy[0])))
    p = np.asarray(params)
    u = np.asarray(radii)
    steps = np.diff(u)
    if u.size > 1 and not (np.all(steps < 0) if kind == "cap" else np.all(steps > 0)):
        raise FoliationViolation(f"{kind} leaves are not ordered at y={y:.4g}")
    return _Column(p, u, np.asarray(angles))


def normal_field(
    foliation: Foliation, y: float, r: ArrayLike
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """
    Normal angles of the leaves through the points (y, r_k) of one column.

    Returns:
        (phi, parameter, side) with side −1 inside, +1 outside and 0 on the
        cylinder; the parameter is a for caps (inf on the cylinder) and b for
        trumpets.

    Raises:
        DomainError: for a point below y0, on the axis, or outside the
            sampled part of the foliation.
    """
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if y < foliation.y0:
        raise DomainError(f"y={y:.4g} is below the entry height {foliation.y0:.4g}")
    if np.any(r <= 0):
        raise DomainError("the foliation is not evaluated on the axis")
    c = foliation.cylinder_radius
    phi = np.zeros_like(r)
    param = np.zeros_like(r)
    side = np.sign(r - c)
    for kind, mask, sgn in (("cap", side < 0, -1.0), ("trumpet", side > 0, 1.0)):
        if not np.any(mask):
            continue
        col = _column(foliation, y, kind)
        lo, hi = float(np.min(col.u)), float(np.max(col.u))
        if col.u.size < 2 or np.any(r[mask] < lo) or np.any(r[mask] > hi):
            raise DomainError(
                f"points at y={y:.4g} lie outside the sampled {kind}s (radii {lo:.4g}..{hi:.4g})"
            )
        t = col.solve(r[mask])
        phi[mask] = col.angle(t)
        if kind == "cap":
            with np.errstate(divide="ignore"):
                param[mask] = 1.0 / np.sqrt(t)
        else:
            param[mask] = t
    param[side == 0] = np.inf
    return phi, param, side


def leaf_through(foliation: Foliation, point: Tuple[float, float]) -> NormalSample:
    """
    The leaf through a point and the normal angle there.

    Raises:
        DomainError: if the point is outside the foliated region.
    """
    y, r = float(point[0]), float(point[1])
    if r > foliation.b0 * y:
        raise DomainError(f"r={r:.4g} is beyond the cone r = {foliation.b0}·y")
    phi, param, side = normal_field(foliation, y, [r])
    kind = "cap" if side[0] < 0 else "trumpet" if side[0] > 0 else "cylinder"
    return NormalSample(y, r, kind, float(param[0]), float(phi[0]))


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CalibrationReport:
    """
    Divergence of e^{−Φ}ν, Φ = (y²+r²)/4, on a rectangular region.

    `max_divergence` is the raw maximum; `max_scaled` the maximum of
    e^{Φ}|div(e^{−Φ}ν)|, which removes the Gaussian size of the field.
    Divergence arrays hold NaN on the region boundary.
    """

    y: FloatArray
    r: FloatArray
    phi: FloatArray
    divergence: FloatArray
    max_divergence: float
    max_scaled: float

    def samples(self) -> Dict[str, FloatArray]:
        """Interior samples flattened into y,r,phi,div columns."""
        Y, R = np.meshgrid(self.y, self.r, indexing="ij")
        inner = (slice(1, -1), slice(1, -1))
        return {
            "y": Y[inner].ravel(),
            "r": R[inner].ravel(),
            "phi": self.phi[inner].ravel(),
            "div": self.divergence[inner].ravel(),
        }


def axisymmetric_divergence(
    y: FloatArray, r: FloatArray, phi: FloatArray, n: int
) -> FloatArray:
    """
    ∂_y(e^{−Φ}ν_y) + r^{1−n}∂_r(r^{n−1}e^{−Φ}ν_r) by central differences, with
    ν = (−sin φ, cos φ) and phi indexed [y, r] on uniform axes.
    """
    Y, R = np.meshgrid(y, r, indexing="ij")
    weight = np.exp(-0.25 * (Y * Y + R * R))
    fy = -weight * np.sin(phi)
    fr = R ** (n - 1) * weight * np.cos(phi)
    hy = y[1] - y[0]
    hr = r[1] - r[0]
    div = np.full_like(phi, np.nan)
    div[1:-1, 1:-1] = (fy[2:, 1:-1] - fy[:-2, 1:-1]) / (2.0 * hy) + (
        fr[1:-1, 2:] - fr[1:-1, :-2]
    ) / (2.0 * hr) / R[1:-1, 1:-1] ** (n - 1)
    return div


def calibration_divergence(
    foliation: Foliation,
    y_range: Tuple[float, float],
    r_range: Tuple[float, float],
    counts: Tuple[int, int] = (21, 21),
) -> CalibrationReport:
    """
    Finite-difference divergence of the calibration field on a region.

    Args:
        foliation: The atlas.
        y_range: (y_lo, y_hi) with y_lo >= y0.
        r_range: (r_lo, r_hi), r_lo > 0, not straddling the cylinder.
        counts: Grid nodes in y and r (at least 3 each).

    Raises:
        DomainError: for a region touching the axis, reaching within one
            grid cell of the cylinder, or leaving the atlas.
    """
    ny, nr = int(counts[0]), int(counts[1])
    if ny < 3 or nr < 3:
        raise UsageError("need at least 3 nodes per direction")
    y = np.linspace(float(y_range[0]), float(y_range[1]), ny)
    r = np.linspace(float(r_range[0]), float(r_range[1]), nr)
    if r[0] <= 0:
        raise DomainError("calibration region touches the axis")
    c = foliation.cylinder_radius
    hr = r[1] - r[0]
    if r[0] - hr <= c <= r[-1] + hr:
        raise DomainError("calibration region must stay one grid cell away from the cylinder")
    phi = np.vstack([normal_field(foliation, float(yk), r)[0] for yk in y])
    div = axisymmetric_divergence(y, r, phi, foliation.n)
    Y, R = np.meshgrid(y, r, indexing="ij")
    scaled = np.abs(div) * np.exp(0.25 * (Y * Y + R * R))
    report = CalibrationReport(
        y=y,
        r=r,
        phi=phi,
        divergence=div,
        max_divergence=float(np.nanmax(np.abs(div))),
        max_scaled=float(np.nanmax(scaled)),
    )
    logger.debug(
        "calibration on y∈[%.3g, %.3g], r∈[%.3g, %.3g]: max %.3e (scaled %.3e)",
        y[0], y[-1], r[0], r[-1], report.max_divergence, report.max_scaled,
    )
    return report


@dataclass(frozen=True)
class RefinementReport:
    """max |div(e^{−Φ}ν)| before and after halving every spacing."""

    coarse: float
    fine: float
    ratio: float
    counts: Tuple[int, int]
    caps: int
    trumpets: int


def refine_grid(grid: ArrayLike) -> FloatArray:
    """Inserts the geometric midpoint between neighbouring parameters."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 2:
        return grid
    mid = np.sqrt(grid[:-1] * grid[1:])
    return np.insert(grid, np.arange(1, grid.size), mid)


def refinement_study(
    foliation: Foliation,
    y_range: Tuple[float, float],
    r_range: Tuple[float, float],
    counts: Tuple[int, int] = (21, 21),
    h: float = 1e-2,
    cap_extent: float = DEFAULT_CAP_EXTENT,
    trumpet_Y: float = TRUMPET_MIN_Y,
) -> RefinementReport:
    """
    Calibration divergence on a region for the atlas as built (with step h)
    and for an atlas with midpoint-refined parameter grids, step h/2 and the
    region grid halved. The ratio coarse/fine is about 4 when the field is
    resolved.
    """
    coarse = calibration_divergence(foliation, y_range, r_range, counts)
    refined = build(
        foliation.n,
        refine_grid(foliation.a_grid),
        refine_grid(foliation.b_grid),
        foliation.y0,
        h=0.5 * h,
        cap_extent=cap_extent,
        trumpet_Y=trumpet_Y,
        b0=foliation.b0,
    )
    fine_counts = (2 * int(counts[0]) - 1, 2 * int(counts[1]) - 1)
    fine = calibration_divergence(refined, y_range, r_range, fine_counts)
    ratio = coarse.max_divergence / fine.max_divergence if fine.max_divergence > 0 else math.inf
    logger.info(
        "refinement: max |div| %.3e -> %.3e (ratio %.2f)",
        coarse.max_divergence, fine.max_divergence, ratio,
    )
    return RefinementReport(
        coarse=coarse.max_divergence,
        fine=fine.max_divergence,
        ratio=float(ratio),
        counts=fine_counts,
        caps=len(refined.caps),
        trumpets=len(refined.trumpets),
    )


# ---------------------------------------------------------------------------
# Normal variation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalVariation:
    """
    V = ν·∂X_a/∂a on Σ_a, sampled in increasing y from y0 to the tip.

    Attributes:
        a: Leaf parameter.
        da: Parameter increment used for the difference quotient.
        y: Sample heights.
        V: Normal variation at the samples.
        tip_value: V at the tip.
        jacobi_residual: max |ΔV − ∇Φ·∇V + (|A|²+½)V| over the interior of the
            graph portion.
    """

    a: float
    da: float
    y: FloatArray
    V: FloatArray
    tip_value: float
    jacobi_residual: float


def jacobi_operator(
    y: FloatArray, u: FloatArray, uy: FloatArray, uyy: FloatArray, V: FloatArray, n: int
) -> FloatArray:
    """
    The Jacobi operator of a shrinker applied to V, intrinsically on the
    surface of revolution r = u(y):

        V_ss + ((n−1) r_s/r − ½(y y_s + r r_s)) V_s + (|A|² + ½) V

    with s the arclength of the generating curve.
    """
    g = np.sqrt(1.0 + uy * uy)
    s = np.concatenate(([0.0], np.cumsum(np.hypot(np.diff(y), np.diff(u)))))
    y_s = 1.0 / g
    r_s = uy / g
    A2 = uyy * uyy / g**6 + (n - 1) / (u * u * g * g)
    Vs, Vss = nonuniform_second_derivative(V, s)
    return Vss + ((n - 1) * r_s / u - 0.5 * (y * y_s + u * r_s)) * Vs + (A2 + 0.5) * V


def normal_variation(
    foliation: Foliation, a: float, da: float, h: float = 1e-2
) -> NormalVariation:
    """
    Central difference quotient of the caps Σ_{a−da} and Σ_{a+da} along the
    normal of Σ_a.

    On the graph portion the gap is measured at fixed y and projected by
    cos φ; in the tip chart it is measured at fixed r and projected by
    −sin φ, so that at the tip V is exactly the tip displacement divided by
    2da. Refining h and da together, the residual falls at least linearly.

    Raises:
        UsageError: if a−da or a+da is outside the atlas, or da > a/100.
        FoliationViolation: if neighbouring leaves cross above y0.
    """
    a_grid = foliation.a_grid
    if a_grid.size == 0 or a - da < a_grid[0] or a + da > a_grid[-1]:
        raise UsageError(f"a={a} ± da must lie in the atlas range")
    if not 0 < da <= 1e-2 * a:
        raise UsageError(f"da must lie in (0, a/100] (got {da})")
    n = foliation.n
    y_min = max(0.0, foliation.y0 - 1.0)
    leaf = shoot_leaf(a, n, y_min=y_min, h=h)
    below = shoot_leaf(a - da, n, y_min=y_min, h=h)
    above = shoot_leaf(a + da, n, y_min=y_min, h=h)
    if leaf.tip is None or below.tip is None or above.tip is None:
        raise UsageError("normal variation needs cap leaves with tip charts")

    k = leaf.graph_count
    gy, gu, guy, guyy = leaf.y[:k], leaf.u[:k], leaf.uy[:k], leaf.uyy[:k]
    u_below, _ = below.profile_at(gy)
    u_above, _ = above.profile_at(gy)
    upper = gy >= foliation.y0
    if np.any(u_above[upper] <= gu[upper]) or np.any(gu[upper] <= u_below[upper]):
        raise FoliationViolation(
            f"caps around a={a:.6g} cross above y0", pair=("cap", a - da, a + da)
        )
    V_graph = (u_above - u_below) / np.sqrt(1.0 + guy * guy) / (2.0 * da)

    tip = leaf.tip
    rho = tip.rho[tip.rho * (a + da) / a <= above.tip.M]

    def tip_height(other: ShrinkerLeaf) -> FloatArray:
        b = other.parameter
        return b - other.tip.psi_at(rho * b / a) / b

    y_tip = a - tip.psi_at(rho) / a
    V_tip = (tip_height(above) - tip_height(below)) / np.sqrt(1.0 + tip.chi_at(rho) ** 2)
    V_tip = V_tip / (2.0 * da)

    interior = np.arange(1, k - 1)
    res = jacobi_operator(gy, gu, guy, guyy, V_graph, n)
    band = interior[gy[interior] >= foliation.y0]
    jacobi = float(np.max(np.abs(res[band]))) if band.size else float("nan")

    order = np.argsort(y_tip)
    y_all = np.concatenate((gy[upper], y_tip[order]))
    V_all = np.concatenate((V_graph[upper], V_tip[order]))
    keep = np.concatenate(([True], np.diff(y_all) > 0))
    return NormalVariation(
        a=float(a),
        da=float(da),
        y=y_all[keep],
        V=V_all[keep],
        tip_value=float(V_tip[0]),
        jacobi_residual=jacobi,
    )


# ---------------------------------------------------------------------------
# Squeeze and supersolution checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SqueezeReport:
    """w near the cylinder, within |u² − 2(n−1)| <= delta0."""

    delta0: float
    K: float
    samples: int
    min_w: float
    max_scaled_excess: float
    violations: int


def squeeze_check(
    foliation: Foliation, delta0: float = 0.05, K: Optional[float] = None, tol: float = 1e-2
) -> SqueezeReport:
    """
    Checks 2 − tol <= w <= 2 + K/y² + tol on the raw leaf samples with
    y >= y0 near the cylinder.

    K defaults to max(20(n−1), 16). `max_scaled_excess` is sup (w−2)y².
    """
    n = foliation.n
    K = max(20.0 * (n - 1), 16.0) if K is None else K
    c2 = 2.0 * (n - 1)
    ws: List[FloatArray] = []
    ys: List[FloatArray] = []
    for leaf in foliation.caps + foliation.trumpets:
        k = leaf.graph_count
        y, u, uy = leaf.y[:k], leaf.u[:k], leaf.uy[:k]
        mask = (y >= foliation.y0) & (np.abs(u * u - c2) <= delta0) & (u * u != c2)
        if np.any(mask):
            ws.append(w_from_graph(y[mask], u[mask], uy[mask], n))
            ys.append(y[mask])
    if not ws:
        return SqueezeReport(delta0, K, 0, float("nan"), float("nan"), 0)
    w = np.concatenate(ws)
    y = np.concatenate(ys)
    bad = (w < 2.0 - tol) | (w > 2.0 + K / (y * y) + tol)
    return SqueezeReport(
        delta0=delta0,
        K=K,
        samples=int(w.size),
        min_w=float(np.min(w)),
        max_scaled_excess=float(np.max((w - 2.0) * y * y)),
        violations=int(np.count_nonzero(bad)),
    )


def squeeze_field(
    foliation: Foliation,
    y_range: Tuple[float, float] = (10.0, 50.0),
    delta: float = 0.1,
    K: Optional[float] = None,
    tol: float = 1e-2,
    counts: Tuple[int, int] = (9, 10),
) -> SqueezeReport:
    """
    w = 2ry·tanφ/(r² − 2(n−1)) at interpolated points of the field, on a
    grid of heights in y_range and radii with 0 < |r² − 2(n−1)| <= delta.

    Checks 2 − tol <= w <= 2 + K/y²; K defaults to 2·max(20(n−1), 16).

    Raises:
        DomainError: if a point lies outside the foliated region.
    """
    n = foliation.n
    K = 2.0 * max(20.0 * (n - 1), 16.0) if K is None else K
    c2 = 2.0 * (n - 1)
    ny, nr = int(counts[0]), int(counts[1])
    if ny < 1 or nr < 2 or nr % 2:
        raise UsageError("need at least one height and an even number of radii")
    heights = np.linspace(float(y_range[0]), float(y_range[1]), ny)
    radii = np.sqrt(c2 + delta * np.linspace(-1.0, 1.0, nr))
    ys: List[float] = []
    ws: List[float] = []
    for y in heights:
        for r in radii:
            sample = leaf_through(foliation, (float(y), float(r)))
            ys.append(sample.y)
            ws.append(2.0 * sample.r * sample.y * math.tan(sample.phi) / (sample.r**2 - c2))
    w = np.asarray(ws)
    y = np.asarray(ys)
    bad = (w < 2.0 - tol) | (w > 2.0 + K / (y * y))
    return SqueezeReport(
        delta0=delta,
        K=K,
        samples=int(w.size),
        min_w=float(np.min(w)),
        max_scaled_excess=float(np.max((w - 2.0) * y * y)),
        violations=int(np.count_nonzero(bad)),
    )


def supersolution_margin(foliation: Foliation, a_from: Optional[float] = None) -> float:
    """
    max of (n+1)/4 + |A|² − |X|²/16 along the caps with a >= a_from on
    [y0, y_Ma]; non-positive when the upper barrier is a supersolution there.
    a_from defaults to 2·y0.
    """
    n = foliation.n
    a_from = 2.0 * foliation.y0 if a_from is None else a_from
    worst = -np.inf
    for leaf in foliation.caps:
        if leaf.a < a_from:
            continue
        k = leaf.graph_count
        y, u, uy, uyy = leaf.y[:k], leaf.u[:k], leaf.uy[:k], leaf.uyy[:k]
        mask = y >= foliation.y0
        if not np.any(mask):
            continue
        g2 = 1.0 + uy[mask] ** 2
        A2 = uyy[mask] ** 2 / g2**3 + (n - 1) / (u[mask] ** 2 * g2)
        q = (n + 1) / 4.0 + A2 - (y[mask] ** 2 + u[mask] ** 2) / 16.0
        worst = max(worst, float(np.max(q)))
    return float(worst)

