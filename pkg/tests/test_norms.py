import math

import numpy as np
import pytest

import afwave as aw
from afwave.evolve import Trajectory
from afwave.norms import (
    BoundInputs,
    ZeroInitialEnergyError,
    theorem_bound,
    trajectory_energies,
)
from conftest import FLAT, STATIC_BUMP, smooth_noise


def make_static_trajectory(grid, u, ut, times):
    """Snapshots of a time-independent state (synthetic, no evolution)."""
    slices = [aw.StateSlice(u.copy(), ut.copy(), float(t)) for t in times]
    return Trajectory(slices=slices, times=np.asarray(times, dtype=float),
                      scalars={}, grid=grid, dt=float(times[1] - times[0]))


def test_energy_density_values(small_grid):
    grid = small_grid
    m = aw.sample_metric(FLAT, grid, 0.0)
    ones = aw.ScalarField(grid, np.ones(grid.shape))
    state = aw.StateSlice(aw.zero_field(grid), ones, 0.0)
    e = aw.energy_density(state, m)
    assert np.allclose(e.values, 0.5, atol=1e-15)
    # flat substitution: e = |grad u|^2/2 + u_t^2/2 + u^6/6
    f = smooth_noise(grid, 1)
    state2 = aw.StateSlice(f, ones, 0.0)
    gx, gy, gz = aw.gradient(f)
    expected = (
        0.5 * (gx.values ** 2 + gy.values ** 2 + gz.values ** 2)
        + 0.5
        + f.values ** 6 / 6.0
    )
    assert np.allclose(aw.energy_density(state2, m).values, expected, atol=1e-14)


def test_energy_density_perturbation_comparison(small_grid):
    # curved minus flat density is O(eps |grad u|^2)
    grid = small_grid
    f = smooth_noise(grid, 2)
    state = aw.StateSlice(f, aw.zero_field(grid), 0.0)
    e_flat = aw.energy_density(state, aw.sample_metric(FLAT, grid, 0.0)).values
    e_bump = aw.energy_density(state, aw.sample_metric(STATIC_BUMP, grid, 0.0)).values
    gx, gy, gz = aw.gradient(f)
    grad2 = gx.values ** 2 + gy.values ** 2 + gz.values ** 2
    eps = STATIC_BUMP.epsilon
    assert np.all(np.abs(e_bump - e_flat) <= 2.0 * eps * grad2 + 1e-14)


def test_total_energy_counts_nodes(small_grid):
    grid = small_grid
    m = aw.sample_metric(FLAT, grid, 0.0)
    vals = np.zeros(grid.shape)
    vals[:4, :3, :2] = 1.0  # 24 nodes of u_t = 1
    state = aw.StateSlice(aw.zero_field(grid), aw.ScalarField(grid, vals), 0.0)
    assert aw.total_energy(state, m) == pytest.approx(
        24 * grid.cell_volume / 2.0, rel=1e-14
    )
    zero = aw.StateSlice(aw.zero_field(grid), aw.zero_field(grid), 0.0)
    assert aw.total_energy(zero, m) == 0.0


def test_mixed_norm_constant_field(small_grid):
    grid = small_grid
    one = aw.ScalarField(grid, np.ones(grid.shape))
    traj = make_static_trajectory(grid, one, aw.zero_field(grid), [0.0, 1.0, 2.0])
    V = (2 * grid.half_extent) ** 3
    T = 2.0
    got = aw.mixed_norm(traj, aw.MixedNormSpec(8, 8))
    assert got == pytest.approx((T * V) ** (1.0 / 8.0), rel=1e-12)
    assert aw.mixed_norm(traj, aw.MixedNormSpec(np.inf, np.inf)) == 1.0
    assert aw.mixed_norm(traj, aw.MixedNormSpec(2, np.inf)) == pytest.approx(
        np.sqrt(T), rel=1e-12
    )


def holder_chain_checks(traj):
    l5_10 = aw.mixed_norm(traj, aw.MixedNormSpec(5, 10))
    l8 = aw.mixed_norm(traj, aw.MixedNormSpec(8, 8))
    l4_12 = aw.mixed_norm(traj, aw.MixedNormSpec(4, 12))
    assert l5_10 <= l8 ** 0.4 * l4_12 ** 0.6 * (1 + 1e-12)
    linf = aw.mixed_norm(traj, aw.MixedNormSpec(np.inf, np.inf))
    l4 = aw.mixed_norm(traj, aw.MixedNormSpec(4, 4))
    assert l8 <= math.sqrt(linf * l4) * (1 + 1e-12)


def test_holder_interpolation_synthetic(small_grid):
    grid = small_grid
    traj = make_static_trajectory(
        grid, smooth_noise(grid, 3), aw.zero_field(grid), [0.0, 0.5, 1.0, 1.5]
    )
    holder_chain_checks(traj)


def test_holder_interpolation_on_run(short_nonlinear_run):
    traj, _ = short_nonlinear_run
    holder_chain_checks(traj)


def test_le1_static_scaling(small_grid):
    grid = small_grid
    u = smooth_noise(grid, 4)
    ut = smooth_noise(grid, 5, 0.5)
    short = make_static_trajectory(grid, u, ut, np.linspace(0.0, 1.0, 5))
    long = make_static_trajectory(grid, u, ut, np.linspace(0.0, 4.0, 17))
    a = aw.le1_norm(short, 0.5)
    b = aw.le1_norm(long, 0.5)
    assert b ** 2 == pytest.approx(4.0 * a ** 2, rel=1e-12)
    zero = make_static_trajectory(grid, aw.zero_field(grid), aw.zero_field(grid), [0.0, 1.0])
    assert aw.le1_norm(zero, 0.5) == 0.0
    with pytest.raises(ValueError):
        aw.le1_norm(short, -0.5)


def test_le_star_values(small_grid):
    grid = small_grid
    zero = make_static_trajectory(grid, aw.zero_field(grid), aw.zero_field(grid), [0.0, 1.0])
    assert aw.le_star_norm(zero) == 0.0
    # F = 1 on nodes near the origin over duration T: norm^2 ~ T * vol (<r> ~ 1)
    vals = np.zeros(grid.shape)
    r = grid.radius()
    vals[r < 0.75] = 1.0
    ball = aw.ScalarField(grid, vals)
    T = 2.0
    traj = make_static_trajectory(grid, ball, aw.zero_field(grid), [0.0, 1.0, 2.0])
    expected = np.sum(grid.bracket_r()[r < 0.75]) * grid.cell_volume * T
    assert aw.le_star_norm(traj) ** 2 == pytest.approx(expected, rel=1e-12)
    assert aw.le_star_norm(traj) ** 2 == pytest.approx(
        T * vals.sum() * grid.cell_volume, rel=0.2
    )


def test_iled_ratio_conventions(small_grid):
    grid = small_grid
    zero = make_static_trajectory(grid, aw.zero_field(grid), aw.zero_field(grid), [0.0, 1.0])
    assert aw.iled_ratio(zero, FLAT, 0.5) == 0.0
    # nonzero u with zero initial energy cannot happen for a real evolution;
    # a synthetic one must raise
    u = smooth_noise(grid, 6)
    broken = Trajectory(
        slices=[
            aw.StateSlice(aw.zero_field(grid), aw.zero_field(grid), 0.0),
            aw.StateSlice(u, aw.zero_field(grid), 1.0),
        ],
        times=np.array([0.0, 1.0]),
        scalars={},
        grid=grid,
        dt=1.0,
    )
    with pytest.raises(ZeroInitialEnergyError):
        aw.iled_ratio(broken, FLAT, 0.5)


def test_high_order_energy_mode_conservation():
    grid = aw.Grid3(32, 0.5)
    L = 2 * grid.half_extent
    xi = 2 * np.pi / L
    x, _, _ = grid.coords()
    mode = np.cos(xi * np.broadcast_to(x, grid.shape))
    state = aw.StateSlice(aw.ScalarField(grid, mode), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.15, t_end=5.0, snapshot_dt=0.5, nonlinear=False,
                       enforce_wrap_exclusion=False)
    traj = aw.evolve(state, FLAT, cfg)
    for N in (0, 1, 2):
        rec = aw.high_order_energy(traj, FLAT, N)
        assert rec["ratio"] == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        aw.high_order_energy(traj, FLAT, 3)


def test_high_order_energy_bump_run(short_nonlinear_run):
    traj, _ = short_nonlinear_run
    rec = aw.high_order_energy(traj, FLAT, 1)
    assert np.all(rec["series"] > 0)
    assert rec["ratio"] <= 2.0


def test_partition_closed_form(small_grid):
    # ||v(t)||_{L^8_x}^8 == 1: choose the constant field c with c^8 V = 1
    grid = small_grid
    V = (2 * grid.half_extent) ** 3
    c = V ** (-1.0 / 8.0)
    const = aw.ScalarField(grid, np.full(grid.shape, c))
    times = np.linspace(0.0, 10.0, 41)
    traj = make_static_trajectory(grid, const, aw.zero_field(grid), times)
    eta = 2.5 ** (1.0 / 8.0)
    res = aw.partition_by_l8(traj, eta)
    assert res.M == 4
    assert np.allclose(res.endpoints, [2.5, 5.0, 7.5], atol=1e-9)
    assert np.all(res.per_interval_l8 <= eta * (1 + 1e-12))


def test_partition_count_formula(small_grid):
    grid = small_grid
    V = (2 * grid.half_extent) ** 3
    # total L^8 norm B = 2: constant field over duration scaled accordingly
    T = 5.0
    c = (2.0 ** 8 / (T * V)) ** (1.0 / 8.0)
    const = aw.ScalarField(grid, np.full(grid.shape, c))
    traj = make_static_trajectory(grid, const, aw.zero_field(grid), np.linspace(0, T, 21))
    res = aw.partition_by_l8(traj, 1.0)
    assert res.total_l8 == pytest.approx(2.0, rel=1e-12)
    assert res.M == 256
    # eta >= B collapses to a single interval
    res1 = aw.partition_by_l8(traj, 2.5)
    assert res1.M == 1 and res1.endpoints.size == 0


def test_partition_on_linear_run(dispersing_trajectory):
    traj, cfg = dispersing_trajectory
    eta = 0.5 * aw.mixed_norm(traj, aw.MixedNormSpec(8, 8))
    res = aw.partition_by_l8(traj, eta)
    assert np.all(res.per_interval_l8 <= 1.01 * eta)
    assert res.M <= math.ceil(res.total_l8 ** 8 / eta ** 8)


def test_theorem_bound_unit_point():
    res = theorem_bound(BoundInputs(E=1.0, A=1.0, C=1.0))
    assert res.value == pytest.approx(math.e, abs=1e-12)
    assert res.log_value == pytest.approx(1.0, abs=1e-14)
    assert not res.overflow


def test_theorem_bound_zero_energy_limit():
    res = theorem_bound(BoundInputs(E=0.0, A=1.0, C=1.0))
    assert res.value == 0.0


def test_theorem_bound_bigfloat_oracle():
    # independent arbitrary-precision evaluation of the log at (2, 1, 1)
    import mpmath as mp

    mp.mp.dps = 60
    log_oracle = (mp.mpf(4) / 7) * mp.log(2) + mp.power(2, mp.mpf(85) / 6 + mp.mpf(13) / 14)
    res = theorem_bound(BoundInputs(E=2.0, A=1.0, C=1.0))
    assert res.overflow  # the bound itself exceeds float64
    assert res.value == math.inf
    assert abs(res.log_value - float(log_oracle)) <= 1e-10 * float(log_oracle)
    # exponent bookkeeping cross-check: 85/6 + 13/14 == 634/42
    assert res.log_value_alt == pytest.approx(res.log_value, rel=1e-12)


def test_theorem_bound_monotone():
    import itertools

    base = theorem_bound(BoundInputs(E=0.9, A=1.0, C=1.0)).log_value
    for dE, dA, dC in itertools.product((0.0, 0.05), repeat=3):
        if dE == dA == dC == 0.0:
            continue
        bumped = theorem_bound(BoundInputs(E=0.9 + dE, A=1.0 + dA, C=1.0 + dC)).log_value
        assert bumped > base


def test_theorem_bound_input_validation():
    with pytest.raises(ValueError):
        BoundInputs(E=-1.0, A=1.0)
    with pytest.raises(ValueError):
        BoundInputs(E=1.0, A=0.0)


def test_trajectory_energies_match_scalars(short_nonlinear_run):
    traj, _ = short_nonlinear_run
    energies = trajectory_energies(traj, FLAT)
    assert np.allclose(energies, traj.scalars["energy"], rtol=1e-12)
