import math

import numpy as np
import pytest

from qfs.model import SystemConfig


def make_config(n_levels=3, gamma=(0.3, 0.3), delta=None, g0=0.2,
                delta0=50.0, phase_multiple_pi=2.0, field_speed=1.0,
                tau=None):
    """Config helper: tau defaults to phase_multiple_pi * pi / delta0 so that
    delta0 * tau is an exact multiple of pi."""
    if delta is None:
        delta = (0.0,) * (n_levels - 1)
    if tau is None:
        tau = phase_multiple_pi * math.pi / delta0
    return SystemConfig(n_levels=n_levels, gamma=tuple(gamma),
                        delta=tuple(delta), g0=g0, delta0=delta0, tau=tau,
                        field_speed=field_speed)


def random_config(rng, n_levels=None, resonant=False, resonant_phase=False):
    n = n_levels or int(rng.integers(2, 4))
    gamma = tuple(rng.uniform(0.1, 1.2, size=n - 1))
    delta = (0.0,) * (n - 1) if resonant else tuple(rng.uniform(-1.0, 1.0,
                                                                size=n - 1))
    delta0 = rng.uniform(20.0, 80.0)
    if resonant_phase:
        tau = 2.0 * math.pi * int(rng.integers(1, 4)) / delta0
    else:
        tau = rng.uniform(0.05, 0.4)
    g0 = rng.uniform(0.0, 0.6)
    return SystemConfig(n_levels=n, gamma=gamma, delta=delta, g0=g0,
                        delta0=delta0, tau=tau)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
