import numpy as np
import pytest

import afwave as aw
from afwave.evolve import (
    InstabilityError,
    WrapExclusionError,
    load_trajectory,
    save_trajectory,
)
from afwave.field import compact_bump
from conftest import FLAT, MODULATED, STATIC_BUMP, smooth_noise


def l2(grid, values):
    return float(np.sqrt(np.sum(values ** 2) * grid.cell_volume))


def test_rhs_zero_state(small_grid):
    state = aw.StateSlice(aw.zero_field(small_grid), aw.zero_field(small_grid), 0.0)
    m = aw.sample_metric(FLAT, small_grid, 0.0)
    for nl in (True, False):
        assert np.all(aw.rhs(state, m, nl).values == 0.0)


def test_rhs_flat_eigenfunction(unit_grid):
    grid = unit_grid
    L = 2 * grid.half_extent
    xi = 2 * np.pi / L
    x, _, _ = grid.coords()
    mode = np.sin(xi * np.broadcast_to(x, grid.shape))
    state = aw.StateSlice(aw.ScalarField(grid, mode), aw.zero_field(grid), 0.0)
    acc = aw.rhs(state, aw.sample_metric(FLAT, grid, 0.0), nonlinear=False)
    # u_tt = Delta u: continuum eigenvalue -xi^2 up to O(dx^2), discrete
    # symbol -sin(xi dx)^2 / dx^2 to rounding
    discrete = -(np.sin(xi * grid.dx) / grid.dx) ** 2
    assert np.allclose(acc.values, discrete * mode, atol=1e-12)
    assert abs(discrete + xi ** 2) <= 0.5 * xi ** 4 * grid.dx ** 2


def test_rhs_constant_quintic(small_grid):
    c = 0.7
    state = aw.StateSlice(
        aw.ScalarField(small_grid, np.full(small_grid.shape, c)),
        aw.zero_field(small_grid),
        0.0,
    )
    acc = aw.rhs(state, aw.sample_metric(FLAT, small_grid, 0.0), nonlinear=True)
    assert np.allclose(acc.values, -c ** 5, atol=1e-13)


def test_rhs_matches_numpy_reference(small_grid):
    # independent numpy evaluation of the conservative-form right-hand side
    from afwave.field import central_difference

    grid = small_grid
    state = aw.StateSlice(smooth_noise(grid, 1), smooth_noise(grid, 2, 0.5), 0.3)
    m = aw.sample_metric(STATIC_BUMP, grid, 0.3)
    acc = aw.rhs(state, m, nonlinear=True)

    u, ut = state.u.values, state.ut.values
    grads = [central_difference(u, ax, grid.dx) for ax in range(3)]
    g = m.gij_full()
    div = np.zeros(grid.shape)
    for i in range(3):
        flux = sum(g[i, j] * grads[j] for j in range(3))
        div += central_difference(flux, i, grid.dx)
    expected = (u ** 5 - div - m.dt_g00 * ut) / m.g00
    assert np.max(np.abs(acc.values - expected)) < 1e-13


def test_zero_data_zero_trajectory(small_grid):
    state = aw.StateSlice(aw.zero_field(small_grid), aw.zero_field(small_grid), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=1.0, snapshot_dt=0.5, nonlinear=True)
    traj = aw.evolve(state, FLAT, cfg)
    for s in traj.slices:
        assert np.all(s.u.values == 0.0) and np.all(s.ut.values == 0.0)
    assert np.all(traj.scalars["energy"] == 0.0)


def test_plane_wave_dispersion_oracle():
    # single Fourier mode oscillates at the discrete frequency
    grid = aw.Grid3(32, 0.5)
    L = 2 * grid.half_extent
    xi = 2 * np.pi / L * 2
    x, _, _ = grid.coords()
    mode = np.cos(xi * np.broadcast_to(x, grid.shape))
    state = aw.StateSlice(aw.ScalarField(grid, mode), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.2, t_end=5.0, snapshot_dt=1.0, nonlinear=False,
                       enforce_wrap_exclusion=False)
    traj = aw.evolve(state, FLAT, cfg)
    omega_h = np.sin(xi * grid.dx) / grid.dx
    for s, t in zip(traj.slices, traj.times):
        expected = np.cos(omega_h * t) * mode
        err = np.max(np.abs(s.u.values - expected))
        # semidiscrete evolution of an eigenmode is exact; RK4 leaves O(dt^4 t)
        assert err <= 10.0 * traj.dt ** 4 * (1 + t)
    # the continuum frequency |xi| is approached to O(dx^2)
    assert abs(omega_h - xi) <= 0.5 * xi ** 3 * grid.dx ** 2


def test_energy_conservation_small():
    grid = aw.Grid3(32, 0.5)
    state = aw.StateSlice(aw.gaussian_bump(grid, 0.8, 1.5), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.2, t_end=4.0, snapshot_dt=0.5, nonlinear=True,
                       enforce_wrap_exclusion=False)
    traj = aw.evolve(state, FLAT, cfg)
    e = traj.scalars["energy"]
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-4


def test_instability_reported():
    grid = aw.Grid3(16, 0.5)
    state = aw.StateSlice(
        aw.ScalarField(grid, np.full(grid.shape, 50.0)), aw.zero_field(grid), 0.0
    )
    # amplitude 50 quintic blows up quickly on a coarse grid
    cfg = aw.SimConfig(cfl=0.5, t_end=50.0, snapshot_dt=1.0, nonlinear=True,
                       enforce_wrap_exclusion=False)
    with pytest.raises(InstabilityError) as err:
        aw.evolve(state, FLAT, cfg)
    assert err.value.step >= 1


def test_wrap_exclusion_precondition():
    grid = aw.Grid3(16, 0.5)  # L = 4
    state = aw.StateSlice(compact_bump(grid, 1.0, 2.0), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=10.0, snapshot_dt=1.0, nonlinear=False)
    with pytest.raises(WrapExclusionError):
        aw.evolve(state, FLAT, cfg)


def test_propagator_identity_at_s(unit_grid):
    state = aw.StateSlice(smooth_noise(unit_grid, 4), smooth_noise(unit_grid, 5), 1.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=1.0, snapshot_dt=1.0, nonlinear=False)
    out = aw.propagate_linear(state, 1.0, 1.0, FLAT, cfg)
    assert np.array_equal(out.u.values, state.u.values)
    assert np.array_equal(out.ut.values, state.ut.values)


def test_propagator_group_property(unit_grid):
    grid = unit_grid
    state = aw.StateSlice(compact_bump(grid, 1.0, 2.0), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=4.0, snapshot_dt=1.0, nonlinear=False)
    for spec in (FLAT, MODULATED):
        dt = aw.timestep(spec, grid, cfg.cfl)
        t1, t2 = 16 * dt, 32 * dt  # step-aligned intermediate time
        two_leg = aw.propagate_linear(
            aw.propagate_linear(state, 0.0, t1, spec, cfg), t1, t2, spec, cfg
        )
        direct = aw.propagate_linear(state, 0.0, t2, spec, cfg)
        num = l2(grid, two_leg.u.values - direct.u.values)
        den = l2(grid, state.u.values)
        assert num <= 1e-8 * den


def test_propagator_linearity(unit_grid):
    grid = unit_grid
    f = aw.StateSlice(smooth_noise(grid, 6), smooth_noise(grid, 7, 0.3), 0.0)
    g = aw.StateSlice(smooth_noise(grid, 8, 0.5), smooth_noise(grid, 9), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=2.0, snapshot_dt=1.0, nonlinear=False)
    a, b = 2.0, -3.0
    combo = aw.StateSlice(
        aw.ScalarField(grid, a * f.u.values + b * g.u.values),
        aw.ScalarField(grid, a * f.ut.values + b * g.ut.values),
        0.0,
    )
    lhs = aw.propagate_linear(combo, 0.0, 2.0, STATIC_BUMP, cfg)
    rf = aw.propagate_linear(f, 0.0, 2.0, STATIC_BUMP, cfg)
    rg = aw.propagate_linear(g, 0.0, 2.0, STATIC_BUMP, cfg)
    resid = lhs.u.values - a * rf.u.values - b * rg.u.values
    assert l2(grid, resid) <= 1e-10 * l2(grid, lhs.u.values)


def test_finite_propagation_speed():
    grid = aw.Grid3(128, 0.1875)  # L = 12
    state = aw.StateSlice(compact_bump(grid, 1.0, 2.0), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=4.0, snapshot_dt=4.0, nonlinear=False)
    out = aw.propagate_linear(state, 0.0, 4.0, FLAT, cfg)
    r = grid.radius()
    # beyond the cone (3 units of front-width allowance at this resolution)
    beyond = np.abs(out.u.values)[r > 2.0 + 4.0 + 3.0]
    assert beyond.size > 0
    assert np.max(beyond) <= 1e-8


def test_duhamel_zero_source(short_nonlinear_run):
    traj, cfg = short_nonlinear_run
    grid = traj.grid
    zero_traj = aw.evolve(
        aw.StateSlice(aw.zero_field(grid), aw.zero_field(grid), 0.0), FLAT, cfg
    )
    out = aw.duhamel_integral(zero_traj, FLAT, (0.0, 2.0), [2.0, 2.5], cfg)
    for s in out.slices:
        assert np.all(s.u.values == 0.0)


def test_duhamel_identity_small(short_nonlinear_run):
    traj, cfg = short_nonlinear_run
    import dataclasses
    fine = dataclasses.replace(cfg, duhamel_tau_dt=cfg.snapshot_dt)
    grid = traj.grid
    tf = float(traj.times[-1])
    state0 = traj.slices[0]
    lin = aw.propagate_linear(state0, 0.0, tf, FLAT, fine)
    duh = aw.duhamel_integral(traj, FLAT, (0.0, tf), [tf], fine)
    resid = traj.slices[-1].u.values - lin.u.values - duh.slices[0].u.values
    assert l2(grid, resid) <= 2e-3 * l2(grid, traj.slices[-1].u.values)


def test_duhamel_propagator_identity(short_nonlinear_run):
    # S(t, t0) u[t0] = S(t, 0) u[0] + int_0^{t0} S(t, tau)(0, u^5) dtau
    traj, cfg = short_nonlinear_run
    import dataclasses
    fine = dataclasses.replace(cfg, duhamel_tau_dt=cfg.snapshot_dt)
    grid = traj.grid
    t_mid, t_fin = 1.5, 3.0
    lhs = aw.propagate_linear(traj.slice_at(t_mid), t_mid, t_fin, FLAT, fine)
    lin = aw.propagate_linear(traj.slices[0], 0.0, t_fin, FLAT, fine)
    duh = aw.duhamel_integral(traj, FLAT, (0.0, t_mid), [t_fin], fine)
    resid = lhs.u.values - lin.u.values - duh.slices[0].u.values
    assert l2(grid, resid) <= 2e-3 * l2(grid, lhs.u.values)


def test_evolution_deterministic(small_grid):
    state = aw.StateSlice(smooth_noise(small_grid, 10), smooth_noise(small_grid, 11), 0.0)
    cfg = aw.SimConfig(cfl=0.3, t_end=1.0, snapshot_dt=0.5, nonlinear=True,
                       enforce_wrap_exclusion=False)
    a = aw.evolve(state, STATIC_BUMP, cfg)
    b = aw.evolve(state, STATIC_BUMP, cfg)
    for sa, sb in zip(a.slices, b.slices):
        assert np.array_equal(sa.u.values, sb.u.values)
        assert np.array_equal(sa.ut.values, sb.ut.values)


def test_trajectory_roundtrip(tmp_path, short_nonlinear_run):
    traj, _ = short_nonlinear_run
    save_trajectory(traj, tmp_path / "run")
    back = load_trajectory(tmp_path / "run")
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.scalars["energy"], traj.scalars["energy"])
    for sa, sb in zip(back.slices, traj.slices):
        assert np.array_equal(sa.u.values, sb.u.values)


def test_modulated_metric_evolution_stable():
    grid = aw.Grid3(32, 0.5)
    state = aw.StateSlice(aw.gaussian_bump(grid, 0.5, 1.5), aw.zero_field(grid), 0.0)
    cfg = aw.SimConfig(cfl=0.25, t_end=3.0, snapshot_dt=0.5, nonlinear=True,
                       enforce_wrap_exclusion=False)
    traj = aw.evolve(state, MODULATED, cfg)
    assert np.all(np.isfinite(traj.scalars["energy"]))
