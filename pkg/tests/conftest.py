import warnings

import numpy as np
import pytest

import afwave as aw
from afwave.field import compact_bump
from afwave.metric import MetricFamily

warnings.filterwarnings("ignore", message=".*TBB.*")


FLAT = aw.MetricSpec(family=MetricFamily.FLAT)
STATIC_BUMP = aw.MetricSpec(family=MetricFamily.STATIC_BUMP, epsilon=0.05)
MODULATED = aw.MetricSpec(family=MetricFamily.TIME_MODULATED_BUMP, epsilon=0.05)


def smooth_noise(grid, seed, amplitude=1.0, corr=2.0):
    """Filtered white noise, deterministic per seed."""
    from afwave.field import _frequency_magnitude

    rng = np.random.default_rng(seed)
    vh = np.fft.fftn(rng.standard_normal(grid.shape))
    vh *= np.exp(-(_frequency_magnitude(grid) * corr / 2.0) ** 2)
    out = np.fft.ifftn(vh).real
    return aw.ScalarField(grid, amplitude * out / np.max(np.abs(out)))


@pytest.fixture(scope="session")
def small_grid():
    return aw.Grid3(16, 0.5)


@pytest.fixture(scope="session")
def unit_grid():
    return aw.Grid3(32, 0.5)


@pytest.fixture(scope="session")
def dispersing_trajectory():
    """Nonlinear flat run of a compact pulse that has dispersed by t ~ 5.

    Shared by the norm, Morawetz and dispersive tests.
    """
    grid = aw.Grid3(64, 0.6)  # L = 19.2 >= 2 + 1.2 * 14
    state = aw.StateSlice(compact_bump(grid, 1.2, 2.0), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=14.0, snapshot_dt=0.25, nonlinear=True)
    return aw.evolve(state, FLAT, cfg), cfg


@pytest.fixture(scope="session")
def short_nonlinear_run():
    """Small nonlinear flat run for identity checks on a 32^3 grid."""
    grid = aw.Grid3(32, 0.5)
    state = aw.StateSlice(compact_bump(grid, 0.8, 2.0), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.2, t_end=3.0, snapshot_dt=0.1, nonlinear=True)
    return aw.evolve(state, FLAT, cfg), cfg
