import numpy as np
import pytest

from waverate.spectral import DampingProfile, Grid, WaveState, make_operator


def random_state(grid, seed=0, smooth=False):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    s = WaveState.from_physical(grid, u, v)
    if smooth:
        damp = np.exp(-0.5 * grid.laplacian_multipliers)
        s = WaveState.from_modal(grid, s.u.modal * damp, s.v.modal * damp)
    return s


@pytest.fixture
def small_book():
    return make_operator(Grid.torus(2 * np.pi, 2 * np.pi, 8, 8), 1.0, DampingProfile.power_abs(2))


@pytest.fixture
def small_circle():
    return make_operator(Grid.circle(2 * np.pi, 16), 1.0, DampingProfile.indicator_strip(0, np.pi))
