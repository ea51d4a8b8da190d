"""
Grids, Gaussian-weighted quadrature, finite differences and the profile and
curve types shared by every other Oval Lab module.

Rotationally symmetric hypersurfaces appear in two charts. A `RadialProfile`
is the graph r = u(y) sampled on a symmetric uniform `Grid`; it is the chart
the spectral and Huisken machinery works in. An `ArcCurve` is the generating
curve (y(s), r(s), θ(s)) of a closed convex surface, running from the left
tip over the top to the right tip; it is the chart the flow evolves, since the
graph chart degenerates where u_y blows up at the tips.

All objects are immutable after construction and every function is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from oval_lab_app.errors import InvalidStateError, UsageError

__all__ = [
    "ArcCurve",
    "Grid",
    "RadialProfile",
    "check_dimension",
    "concavity_report",
    "cylinder_radius",
    "diff",
    "gaussian_weight",
    "nonuniform_second_derivative",
    "richardson_extrapolate",
    "sphere_radius",
    "weighted_integral",
    "weighted_inner",
    "weighted_norm",
]

FloatArray = NDArray[np.float64]


def check_dimension(n: int) -> int:
    """Validates the surface dimension n of M ⊂ R^{n+1}."""
    if int(n) != n or n < 2:
        raise UsageError(f"dimension n must be an integer >= 2 (got {n})")
    return int(n)


def cylinder_radius(n: int) -> float:
    """Radius sqrt(2(n-1)) of the shrinking cylinder S^{n-1} x R."""
    return math.sqrt(2.0 * (check_dimension(n) - 1))


def sphere_radius(n: int) -> float:
    """Radius sqrt(2n) of the shrinking sphere."""
    return math.sqrt(2.0 * check_dimension(n))


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-half_length, half_length] with an odd node count."""

    half_length: float
    count: int

    def __post_init__(self) -> None:
        if not self.half_length > 0:
            raise UsageError(f"half_length must be positive (got {self.half_length})")
        if int(self.count) != self.count or self.count < 3 or self.count % 2 == 0:
            raise UsageError(f"count must be an odd integer >= 3 (got {self.count})")

    @classmethod
    def from_spacing(cls, half_length: float, h: float) -> "Grid":
        """Grid whose spacing is at most h."""
        if h <= 0:
            raise UsageError("spacing must be positive")
        intervals = 2 * math.ceil(half_length / h)
        return cls(half_length=half_length, count=intervals + 1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / (self.count - 1)

    @property
    def nodes(self) -> FloatArray:
        y = np.linspace(-self.half_length, self.half_length, self.count)
        # make the grid exactly symmetric and put y=0 on a node
        y = 0.5 * (y - y[::-1])
        y[self.count // 2] = 0.0
        return y

    def refined(self) -> "Grid":
        """Same interval, half the spacing."""
        return Grid(self.half_length, 2 * self.count - 1)

    def to_json(self) -> Dict[str, float]:
        return {"half_length": float(self.half_length), "count": int(self.count)}

    @classmethod
    def from_json(cls, data: Dict[str, float]) -> "Grid":
        try:
            return cls(float(data["half_length"]), int(data["count"]))
        except (KeyError, TypeError) as exc:
            raise UsageError(f"invalid grid document: {data!r}") from exc


def gaussian_weight(y: ArrayLike) -> FloatArray:
    """The weight e^{-y²/4}."""
    y = np.asarray(y, dtype=np.float64)
    return np.exp(-0.25 * y * y)


def _as_samples(f: ArrayLike, count: int, name: str) -> FloatArray:
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != count:
        raise UsageError(
            f"{name} has {arr.shape[0] if arr.ndim == 1 else arr.shape} samples, "
            f"grid has {count}"
        )
    return arr


def weighted_integral(values: ArrayLike, y: ArrayLike) -> float:
    """Composite Simpson quadrature of values·e^{-y²/4} over the samples y."""
    y = np.asarray(y, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != y.shape or y.ndim != 1 or y.size < 2:
        raise UsageError("values and abscissae must be matching 1-D arrays")
    return float(integrate.simpson(values * gaussian_weight(y), x=y))


def weighted_inner(f: ArrayLike, g: ArrayLike, grid: Grid) -> float:
    """
    Gaussian-weighted inner product ⟨f, g⟩ = ∫ f g e^{-y²/4} dy.

    Args:
        f: Samples of f on `grid`.
        g: Samples of g on `grid`.
        grid: The common grid.

    Returns:
        Composite Simpson approximation of the weighted integral.

    Raises:
        UsageError: if either sample array does not match the grid.
    """
    fa = _as_samples(f, grid.count, "f")
    ga = _as_samples(g, grid.count, "g")
    return weighted_integral(fa * ga, grid.nodes)


def weighted_norm(f: ArrayLike, grid: Grid) -> float:
    return math.sqrt(max(weighted_inner(f, f, grid), 0.0))


# Interior and boundary stencils. Boundary rows are second-order one-sided.
_FORWARD = {
    1: (np.array([-3.0, 4.0, -1.0]), 2.0),
    2: (np.array([2.0, -5.0, 4.0, -1.0]), 1.0),
    3: (np.array([-5.0, 18.0, -24.0, 14.0, -3.0]), 2.0),
}
# third derivative at the second node from nodes 0..4
_THIRD_NEAR_EDGE = (np.array([-3.0, 10.0, -12.0, 6.0, -1.0]), 2.0)


def diff(f: ArrayLike, grid: Grid, order: int = 1) -> FloatArray:
    """
    Finite-difference derivative of a sampled function.

    Central differences in the interior, second-order one-sided stencils at the
    boundary; the stencils are mirror images of each other, so the derivative
    of an even function on a symmetric grid is exactly odd (and vice versa).

    Args:
        f: Samples on `grid`.
        grid: Uniform grid.
        order: 1, 2 or 3.

    Raises:
        UsageError: for an unsupported order or a grid with fewer than
            order+2 nodes.
    """
    if order not in (1, 2, 3):
        raise UsageError(f"order must be 1, 2 or 3 (got {order})")
    if grid.count < order + 2:
        raise UsageError(f"order {order} needs at least {order + 2} nodes")
    fa = _as_samples(f, grid.count, "f")
    h = grid.spacing
    out = np.empty_like(fa)
    sign = -1.0 if order % 2 else 1.0
    coeffs, denom = _FORWARD[order]
    k = coeffs.size
    scale = denom * h**order
    if order == 1:
        out[1:-1] = (fa[2:] - fa[:-2]) / (2.0 * h)
        out[0] = coeffs @ fa[:k] / scale
        out[-1] = sign * (coeffs @ fa[::-1][:k]) / scale
    elif order == 2:
        out[1:-1] = (fa[2:] - 2.0 * fa[1:-1] + fa[:-2]) / h**2
        out[0] = coeffs @ fa[:k] / scale
        out[-1] = coeffs @ fa[::-1][:k] / scale
    else:
        out[2:-2] = (fa[4:] - 2.0 * fa[3:-1] + 2.0 * fa[1:-3] - fa[:-4]) / (2.0 * h**3)
        out[0] = coeffs @ fa[:k] / scale
        out[-1] = sign * (coeffs @ fa[::-1][:k]) / scale
        near, near_denom = _THIRD_NEAR_EDGE
        out[1] = near @ fa[:5] / (near_denom * h**3)
        out[-2] = sign * (near @ fa[::-1][:5]) / (near_denom * h**3)
    return out


def nonuniform_second_derivative(
    f: ArrayLike, x: ArrayLike
) -> Tuple[FloatArray, FloatArray]:
    """
    First and second derivatives on a strictly monotone non-uniform abscissa.

    Three-point Lagrange stencils in the interior; the end values repeat their
    neighbours. Returns (f_x, f_xx).
    """
    f = np.asarray(f, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if f.shape != x.shape or f.size < 3:
        raise UsageError("need matching arrays with at least 3 samples")
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)
    d1[1:-1] = (
        -hp / (hm * (hm + hp)) * f[:-2]
        + (hp - hm) / (hm * hp) * f[1:-1]
        + hm / (hp * (hm + hp)) * f[2:]
    )
    d2[1:-1] = 2.0 * (
        f[:-2] / (hm * (hm + hp)) - f[1:-1] / (hm * hp) + f[2:] / (hp * (hm + hp))
    )
    d1[0], d1[-1] = d1[1], d1[-2]
    d2[0], d2[-1] = d2[1], d2[-2]
    return d1, d2


def richardson_extrapolate(
    base_values: Sequence[float], p: int, r: float = 2.0
) -> float:
    """
    Richardson extrapolation of approximations whose step shrinks by `r`.

    The error is assumed to expand in powers h^p, h^{2p}, ...
    """
    if len(base_values) < 2:
        raise UsageError("richardson_extrapolate requires at least two values")
    vals = [float(v) for v in base_values]
    for j in range(1, len(vals)):
        factor = r ** (p * j)
        for k in range(len(vals) - 1, j - 1, -1):
            vals[k] = (factor * vals[k] - vals[k - 1]) / (factor - 1.0)
    return vals[-1]


@dataclass(frozen=True)
class RadialProfile:
    """
    Sampled graph r = u(y) of a rotationally symmetric hypersurface.

    Attributes:
        grid: Symmetric uniform grid.
        u: Radius values at the grid nodes.
        n: Surface dimension.
        symmetric: If set, u must be even in y.
        convex: If set, u must be concave (the surface is convex).
    """

    grid: Grid
    u: FloatArray
    n: int
    symmetric: bool = False
    convex: bool = False

    def __post_init__(self) -> None:
        check_dimension(self.n)
        u = _as_samples(self.u, self.grid.count, "u")
        object.__setattr__(self, "u", u)
        if not np.all(np.isfinite(u)):
            raise InvalidStateError("profile contains non-finite radii")
        if np.any(u[1:-1] <= 0):
            raise InvalidStateError("profile radius must be positive inside the interval")
        if self.symmetric:
            scale = max(1.0, float(np.max(np.abs(u))))
            if float(np.max(np.abs(u - u[::-1]))) > 1e-9 * scale:
                raise InvalidStateError("profile flagged symmetric is not even in y")
        if self.convex:
            max_uyy, ok = concavity_report(self)
            if not ok:
                raise InvalidStateError(
                    f"profile flagged convex has u_yy up to {max_uyy:.3e}"
                )

    @classmethod
    def from_function(
        cls,
        grid: Grid,
        func: Callable[[FloatArray], FloatArray],
        n: int,
        symmetric: bool = False,
        convex: bool = False,
    ) -> "RadialProfile":
        u = np.asarray(func(grid.nodes), dtype=np.float64)
        if u.ndim == 0:
            u = np.full(grid.count, float(u))
        return cls(grid, u, n, symmetric=symmetric, convex=convex)

    @property
    def y(self) -> FloatArray:
        return self.grid.nodes

    def derivative(self, order: int = 1) -> FloatArray:
        return diff(self.u, self.grid, order)

    def deviation(self) -> FloatArray:
        """v with u = sqrt(2(n-1))·(1 + v)."""
        return self.u / cylinder_radius(self.n) - 1.0


def concavity_report(profile: RadialProfile) -> Tuple[float, bool]:
    """
    Largest interior second difference of u and whether u is concave.

    The tolerance is 10·h²·max|u|.
    """
    h = profile.grid.spacing
    u = profile.u
    uyy = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    max_uyy = float(np.max(uyy))
    tol = 10.0 * h**2 * float(np.max(np.abs(u)))
    return max_uyy, bool(max_uyy <= tol)


@dataclass(frozen=True)
class ArcCurve:
    """
    Generating curve of a closed O(1)×O(n)-type surface of revolution.

    Nodes run from the left tip (θ = +π/2) over the top (θ = 0) to the right
    tip (θ = -π/2); T = (cos θ, sin θ) in the (y, r) half plane and the outward
    normal is N = (-sin θ, cos θ).
    """

    y: FloatArray
    r: FloatArray
    theta: FloatArray
    n: int

    def __post_init__(self) -> None:
        check_dimension(self.n)
        y = np.asarray(self.y, dtype=np.float64)
        r = np.asarray(self.r, dtype=np.float64)
        theta = np.asarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)
        if not (y.shape == r.shape == theta.shape) or y.ndim != 1 or y.size < 5:
            raise InvalidStateError("curve needs matching arrays of at least 5 nodes")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(r))):
            raise InvalidStateError("curve contains non-finite coordinates")
        scale = max(1.0, float(np.max(np.abs(y))), float(np.max(r)))
        if abs(r[0]) > 1e-9 * scale or abs(r[-1]) > 1e-9 * scale:
            raise InvalidStateError("curve endpoints must lie on the axis r = 0")
        if np.any(r[1:-1] <= 0):
            raise InvalidStateError("interior nodes must have r > 0")
        if abs(theta[0] - math.pi / 2) > 1e-9 or abs(theta[-1] + math.pi / 2) > 1e-9:
            raise InvalidStateError("tip tangents must be θ = +π/2 (left), -π/2 (right)")
        if np.any(np.hypot(np.diff(y), np.diff(r)) <= 0):
            raise InvalidStateError("arclength must be strictly increasing")

    @classmethod
    def from_points(cls, y: ArrayLike, r: ArrayLike, n: int) -> "ArcCurve":
        """Builds a curve from node positions; tangents from centred chords."""
        y = np.asarray(y, dtype=np.float64).copy()
        r = np.asarray(r, dtype=np.float64).copy()
        r[0] = 0.0
        r[-1] = 0.0
        theta = np.empty_like(y)
        theta[1:-1] = np.arctan2(r[2:] - r[:-2], y[2:] - y[:-2])
        theta[0] = math.pi / 2
        theta[-1] = -math.pi / 2
        return cls(y, r, theta, n)

    @property
    def arclength(self) -> FloatArray:
        seg = np.hypot(np.diff(self.y), np.diff(self.r))
        return np.concatenate(([0.0], np.cumsum(seg)))

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def spacing(self) -> float:
        """Mean node spacing in arclength."""
        return self.length / (self.y.size - 1)

    def reflected(self) -> "ArcCurve":
        """Mirror image under y ↦ -y (still left-to-right)."""
        return ArcCurve.from_points(-self.y[::-1], self.r[::-1], self.n)
