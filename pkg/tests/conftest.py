import math

import pytest

from dodslab.core import DODSystem


def newton_lambert_omega():
    """Root of w * exp(w) = 1 by Newton; independent oracle for the
    exponential solution of the canonical constant-delay system."""
    w = 0.5
    for _ in range(100):
        f = w * math.exp(w) - 1.0
        df = math.exp(w) * (1.0 + w)
        step = f / df
        w -= step
        if abs(step) < 1e-16:
            break
    return w


OMEGA = newton_lambert_omega()


@pytest.fixture(scope="session")
def omega():
    return OMEGA


@pytest.fixture()
def const_delay_system():
    """ydot = y_, x_ = x - 1: the canonical constant-delay system."""
    return DODSystem(f="y_", g="x - 1", domain=(0.0, 6.0), label="const delay")


@pytest.fixture()
def chord_halving_system():
    """ydot = (y - y_)/(x - x_), x_ = x/2: solution-dependent chord system
    solved exactly by y = x."""
    return DODSystem(f="(y - y_)/(x - x_)", g="x/2", domain=(1.0, 16.0),
                     label="chord halving")
