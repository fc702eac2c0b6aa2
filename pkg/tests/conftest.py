import math

import numpy as np
import pytest

from radmonge.domain import make_preset
from radmonge.obstacle import Curve, solve_obstacle
from radmonge.raymaps import monotone_ray_map, original_map

K_EXACT = 9.0 * math.pi / 8.0


@pytest.fixture(scope="session")
def preset_small():
    """Workhorse preset: fine enough for sub-1e-6 closed forms downstream."""
    return make_preset("annulus-const", n_r=501, n_theta=65, n_lam=501)


@pytest.fixture(scope="session")
def obstacle_small(preset_small):
    d, t = preset_small
    return solve_obstacle(Curve(theta=d.theta, values=t.R1))


@pytest.fixture(scope="session")
def original_small(preset_small, obstacle_small):
    d, t = preset_small
    return original_map(d, t, obstacle_small.Phi)


@pytest.fixture(scope="session")
def monotone_small(preset_small):
    d, t = preset_small
    return monotone_ray_map(d, t)
