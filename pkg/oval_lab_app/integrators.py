"""
Fixed-step explicit Runge-Kutta integrators driven by a Butcher table.

The shrinker and bowl ODEs are smooth and non-stiff away from the axis, so a
classical fourth-order method with a fixed step is all they need; the flow
evolver uses the two-stage Heun method on the whole node array. Both are the
same class with different tables.
"""

from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from oval_lab_app.errors import IntegrationError, UsageError

logger = logging.getLogger(__name__)

RHS = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]
StopCondition = Callable[[float, NDArray[np.float64]], bool]


class ExplicitRungeKutta:
    """
    Explicit Runge-Kutta method defined by its Butcher table.

    Attributes:
        a: Strictly lower-triangular stage coefficients, one row per stage.
        b: Output weights.
        c: Stage times (fractions of the step).
        order: Convergence order of the scheme.
    """

    name = "explicit-rk"

    def __init__(
        self,
        a: Sequence[Sequence[float]],
        b: Sequence[float],
        c: Sequence[float],
        order: int,
    ):
        if not (len(a) == len(b) == len(c)):
            raise UsageError("Butcher table dimensions do not match")
        self.a = [list(row) for row in a]
        self.b = list(b)
        self.c = list(c)
        self.order = order
        self.stages = len(b)

    def step(self, f: RHS, t: float, x: NDArray[np.float64], h: float) -> NDArray[np.float64]:
        """Advances x from t to t+h."""
        k: List[NDArray[np.float64]] = []
        for i in range(self.stages):
            xi = x
            for j, aij in enumerate(self.a[i][:i]):
                if aij:
                    xi = xi + (h * aij) * k[j]
            k.append(np.asarray(f(t + self.c[i] * h, xi), dtype=np.float64))
        out = x
        for bi, ki in zip(self.b, k):
            if bi:
                out = out + (h * bi) * ki
        return out

    def integrate(
        self,
        f: RHS,
        t0: float,
        x0: Sequence[float],
        h: float,
        n_steps: int,
        stop: Optional[StopCondition] = None,
    ) -> Tuple[NDArray[np.float64], NDArray[np.float64], bool]:
        """
        Integrates with a fixed step.

        Args:
            f: Right-hand side f(t, x).
            t0: Initial time.
            x0: Initial state.
            h: Step (may be negative).
            n_steps: Maximum number of steps.
            stop: Optional predicate checked after every step; when it returns
                True the offending step is kept and integration ends.

        Returns:
            (t, x, stopped) with t of shape (m,), x of shape (m, dim).

        Raises:
            IntegrationError: if the state becomes non-finite.
        """
        if h == 0 or n_steps < 0:
            raise UsageError("need a nonzero step and a non-negative step count")
        x = np.asarray(x0, dtype=np.float64)
        ts = [float(t0)]
        xs = [x]
        t = float(t0)
        stopped = False
        for _ in range(n_steps):
            x = self.step(f, t, x, h)
            t = t + h
            if not np.all(np.isfinite(x)):
                raise IntegrationError(f"{self.name}: non-finite state at t={t:.6g}")
            ts.append(t)
            xs.append(x)
            if stop is not None and stop(t, x):
                stopped = True
                break
        return np.asarray(ts), np.vstack(xs), stopped


class RK4(ExplicitRungeKutta):
    """Classical four-stage, fourth-order Runge-Kutta method."""

    name = "rk4"

    def __init__(self) -> None:
        super().__init__(
            a=[[], [0.5], [0.0, 0.5], [0.0, 0.0, 1.0]],
            b=[1 / 6, 1 / 3, 1 / 3, 1 / 6],
            c=[0.0, 0.5, 0.5, 1.0],
            order=4,
        )


class Heun(ExplicitRungeKutta):
    """Two-stage, second-order Heun (explicit trapezoidal) method."""

    name = "heun"

    def __init__(self) -> None:
        super().__init__(a=[[], [1.0]], b=[0.5, 0.5], c=[0.0, 1.0], order=2)
