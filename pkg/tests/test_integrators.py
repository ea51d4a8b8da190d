import math

import numpy as np
import pytest

from oval_lab_app.errors import IntegrationError, UsageError
from oval_lab_app.integrators import RK4, ExplicitRungeKutta, Heun


def _growth(_t, x):
    return x


def test_rk4_and_heun_orders_on_exponential_growth():
    _, xs, stopped = RK4().integrate(_growth, 0.0, [1.0], 0.01, 100)
    assert not stopped
    assert abs(xs[-1, 0] - math.e) < 1e-9
    _, xs2, _ = Heun().integrate(_growth, 0.0, [1.0], 0.01, 100)
    assert 1e-6 < abs(xs2[-1, 0] - math.e) < 1e-4


def test_stop_condition_keeps_the_crossing_step():
    ts, xs, stopped = RK4().integrate(_growth, 0.0, [1.0], 0.1, 100, stop=lambda t, x: x[0] > 2.0)
    assert stopped
    assert xs[-1, 0] > 2.0
    assert xs[-2, 0] <= 2.0
    assert ts[-1] == pytest.approx(0.1 * (len(ts) - 1))


def test_negative_step_integrates_backwards():
    _, xs, _ = RK4().integrate(_growth, 1.0, [math.e], -0.01, 100)
    assert xs[-1, 0] == pytest.approx(1.0, abs=1e-9)


def test_non_finite_state_raises():
    with pytest.raises(IntegrationError):
        RK4().integrate(lambda t, x: np.full_like(x, np.nan), 0.0, [1.0], 0.1, 5)


def test_invalid_tables_and_steps():
    with pytest.raises(UsageError):
        ExplicitRungeKutta(a=[[]], b=[0.5, 0.5], c=[0.0], order=1)
    with pytest.raises(UsageError):
        RK4().integrate(_growth, 0.0, [1.0], 0.0, 10)
