import numpy as np
import pytest

from robusthedge import ParameterBox, ParameterPoint, TimeGrid


@pytest.fixture
def uncertainty_box():
    """The interval specification used throughout the simulated studies."""
    return ParameterBox(
        b0_range=(-0.2, 0.2),
        b1_range=(-0.1, 0.1),
        a0_range=(0.3, 0.7),
        a1_range=(0.4, 0.6),
        gamma_range=(0.5, 1.5),
    )


@pytest.fixture
def midpoint_theta():
    return ParameterPoint(0.0, 0.0, 0.5, 0.5, 1.0)


@pytest.fixture
def month_grid():
    return TimeGrid.uniform(30.0 / 365.0, 30)


def degenerate_box(b0, b1, a0, a1, gamma, state_space="RealLine"):
    return ParameterBox(
        b0_range=(b0, b0),
        b1_range=(b1, b1),
        a0_range=(a0, a0),
        a1_range=(a1, a1),
        gamma_range=(gamma, gamma),
        state_space=state_space,
    )
