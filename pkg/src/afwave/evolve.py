"""Time evolution of d_a(g^{ab} d_b u) = u^5 and the linear propagator.

The second-order equation is rearranged (using g^{0j} = 0) to

    u_tt = [u^5 - d_i(g^{ij} d_j u) - (d_t g^{00}) u_t] / g^{00}

and integrated with classical RK4 on the first-order system (u, u_t),
the metric resampled at every stage time.  The spatial divergence is in
conservative form: central differences applied to the flux g^{ij} d_j u.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _stencil
from .field import (
    Grid3,
    ScalarField,
    StateSlice,
    read_state,
    support_radius,
    write_state,
    zero_field,
)
from .metric import MetricSample, MetricSpec, sample_metric, wave_speed_bound

NORM_CAP = 1.0e12
WRAP_SPEED_MARGIN = 1.2


class InstabilityError(RuntimeError):
    def __init__(self, step: int, t: float, amplitude: float):
        self.step = step
        self.t = t
        self.amplitude = amplitude
        super().__init__(
            f"field amplitude {amplitude:.3e} exceeded {NORM_CAP:.0e} "
            f"at step {step} (t={t:.6g})"
        )


class WrapExclusionError(ValueError):
    """The periodic box is too small for waves not to wrap before t_end."""


@dataclass(frozen=True)
class SimConfig:
    """Time-stepping parameters.

    cfl in (0, 0.5]; dt is cfl*dx divided by a global bound on the wave
    speed of the metric, then rounded down so snapshot_dt is an exact
    integer multiple of dt.  duhamel_tau_dt sets the source-time
    quadrature spacing of Duhamel integrals (default 10*dt if None).
    enforce_wrap_exclusion requires half_extent >= support radius +
    1.2*t_end; disable it only for measurements that are insensitive to
    periodic wrap (e.g. conserved-energy checks on the torus).
    """

    cfl: float = 0.25
    t_end: float = 10.0
    snapshot_dt: float = 0.5
    nonlinear: bool = True
    duhamel_tau_dt: float | None = None
    enforce_wrap_exclusion: bool = True

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        if self.t_end <= 0 or self.snapshot_dt <= 0:
            raise ValueError("t_end and snapshot_dt must be positive")


@dataclass
class Trajectory:
    """Ordered snapshots plus per-snapshot scalar diagnostics."""

    slices: list
    times: np.ndarray
    scalars: dict
    grid: Grid3
    dt: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def slice_at(self, t: float) -> StateSlice:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}; nearest is {self.times[idx]}")
        return self.slices[idx]


def timestep(spec: MetricSpec, grid: Grid3, cfl: float) -> float:
    """Raw CFL timestep cfl*dx / sqrt(max eig g^{ij} / |g^{00}|)."""
    return cfl * grid.dx / wave_speed_bound(spec, grid)


def _work_buffers(grid: Grid3):
    shape = grid.shape
    return {name: np.empty(shape) for name in
            ("F1", "F2", "F3", "acc", "stage_u", "stage_v", "sum_u", "sum_v")}


def _rhs_into(u: np.ndarray, ut: np.ndarray, m: MetricSample, nonlinear: bool,
              bufs: dict, out: np.ndarray) -> None:
    inv2dx = 1.0 / (2.0 * m.grid.dx)
    g = m.gij
    _stencil.flux(u, g[0], g[1], g[2], g[3], g[4], g[5], inv2dx,
                  bufs["F1"], bufs["F2"], bufs["F3"])
    _stencil.acceleration(bufs["F1"], bufs["F2"], bufs["F3"], u, ut,
                          m.g00, m.dt_g00, inv2dx, nonlinear, out)


def rhs(state: StateSlice, metric: MetricSample, nonlinear: bool) -> ScalarField:
    """Acceleration u_tt for the given state and metric sample."""
    bufs = _work_buffers(state.grid)
    out = np.empty(state.grid.shape)
    _rhs_into(state.u.values, state.ut.values, metric, nonlinear, bufs, out)
    return ScalarField(state.grid, out)


def _axpy(out: np.ndarray, a: float, x: np.ndarray, y: np.ndarray) -> None:
    """out = a*x + y without temporaries."""
    np.multiply(x, a, out=out)
    out += y


def _rk4_step(u, ut, t, dt, spec, grid, nonlinear, bufs):
    """One classical RK4 step in place on (u, ut)."""
    acc, su, sv = bufs["acc"], bufs["sum_u"], bufs["sum_v"]
    stu, stv = bufs["stage_u"], bufs["stage_v"]

    m1 = sample_metric(spec, grid, t)
    _rhs_into(u, ut, m1, nonlinear, bufs, acc)          # k1 = (ut, acc)
    su[:] = ut
    sv[:] = acc
    _axpy(stu, 0.5 * dt, ut, u)
    _axpy(stv, 0.5 * dt, acc, ut)

    m2 = sample_metric(spec, grid, t + 0.5 * dt)
    _rhs_into(stu, stv, m2, nonlinear, bufs, acc)       # k2 = (stv, acc)
    su += 2.0 * stv
    sv += 2.0 * acc
    _axpy(stu, 0.5 * dt, stv, u)                        # uses old stv, then
    _axpy(stv, 0.5 * dt, acc, ut)                       # stv is replaced

    _rhs_into(stu, stv, m2, nonlinear, bufs, acc)       # k3 (same stage time)
    su += 2.0 * stv
    sv += 2.0 * acc
    _axpy(stu, dt, stv, u)
    _axpy(stv, dt, acc, ut)

    m4 = sample_metric(spec, grid, t + dt)
    _rhs_into(stu, stv, m4, nonlinear, bufs, acc)       # k4
    su += stv
    sv += acc

    c = dt / 6.0
    u += c * su
    ut += c * sv


def _check_amplitude(u, ut, step, t):
    amp = max(abs(float(u.max())), abs(float(u.min())),
              abs(float(ut.max())), abs(float(ut.min())))
    if not amp < NORM_CAP:
        raise InstabilityError(step, t, amp)


def _snapshot_scalars(state: StateSlice, metric: MetricSample,
                      nonlinear: bool) -> dict:
    from . import norms  # local import; norms depends on this module

    v = state.u.values
    vol = state.grid.cell_volume
    energy = norms.total_energy(state, metric)
    if not nonlinear:
        # the linear flow conserves the quadratic part only
        energy -= float(np.sum(v ** 6) * vol) / 6.0
    return {
        "energy": energy,
        "l2": float(np.sqrt(np.sum(v * v) * vol)),
        "l6": float((np.sum(v ** 6) * vol) ** (1.0 / 6.0)),
        "linf": float(np.max(np.abs(v))),
    }


def check_wrap_exclusion(initial: StateSlice, config: SimConfig) -> None:
    if not (np.any(initial.u.values) or np.any(initial.ut.values)):
        return
    r_supp = support_radius(initial)
    needed = r_supp + WRAP_SPEED_MARGIN * config.t_end
    if initial.grid.half_extent < needed:
        raise WrapExclusionError(
            f"half extent {initial.grid.half_extent:.3g} < support radius "
            f"{r_supp:.3g} + {WRAP_SPEED_MARGIN}*t_end = {needed:.3g}; waves may wrap"
        )


def evolve(initial: StateSlice, spec: MetricSpec, config: SimConfig,
           step_origin: int = 0, t_origin: float | None = None) -> Trajectory:
    """Integrate from initial.t for config.t_end, storing snapshots.

    dt = snapshot_dt / ceil(snapshot_dt / dt_cfl), so snapshots land
    exactly on the step lattice.  Raises InstabilityError if any field
    amplitude passes 1e12 and WrapExclusionError per SimConfig.

    step_origin / t_origin let a resumed run reproduce the exact stage
    times of the original run: times are always computed as
    t_origin + (global step index) * dt, never accumulated.
    """
    grid = initial.grid
    if config.enforce_wrap_exclusion:
        check_wrap_exclusion(initial, config)
    dt_max = timestep(spec, grid, config.cfl)
    per_snap = max(1, math.ceil(config.snapshot_dt / dt_max - 1e-12))
    dt = config.snapshot_dt / per_snap
    n_snaps = math.ceil(config.t_end / config.snapshot_dt - 1e-9)
    if t_origin is None:
        t_origin = initial.t

    u = initial.u.values.copy()
    ut = initial.ut.values.copy()
    bufs = _work_buffers(grid)
    t0 = initial.t

    times = [t0]
    slices = [initial.copy()]
    scalars: dict[str, list] = {k: [] for k in ("energy", "l2", "l6", "linf")}
    first = _snapshot_scalars(initial, sample_metric(spec, grid, t0), config.nonlinear)
    for k, v in first.items():
        scalars[k].append(v)

    step = 0
    for j in range(n_snaps):
        for i in range(per_snap):
            t = t_origin + (step_origin + j * per_snap + i) * dt
            _rk4_step(u, ut, t, dt, spec, grid, config.nonlinear, bufs)
            step += 1
            _check_amplitude(u, ut, step, t + dt)
        t_snap = t_origin + (step_origin + (j + 1) * per_snap) * dt
        state = StateSlice(ScalarField(grid, u.copy()),
                           ScalarField(grid, ut.copy()), t_snap)
        times.append(t_snap)
        slices.append(state)
        for k, v in _snapshot_scalars(state, sample_metric(spec, grid, t_snap),
                                      config.nonlinear).items():
            scalars[k].append(v)

    return Trajectory(
        slices=slices,
        times=np.array(times),
        scalars={k: np.array(v) for k, v in scalars.items()},
        grid=grid,
        dt=dt,
    )


def propagate_linear(data: StateSlice, s: float, t: float, spec: MetricSpec,
                     config: SimConfig) -> StateSlice:
    """Apply the linear propagator from time s to time t.

    Steps on the fixed lattice s + k*dt with the raw CFL dt (so runs
    sharing a lattice compose bit-identically), plus one shorter final
    step when t - s is not a multiple of dt.
    """
    tol = 1e-9 * max(1.0, abs(s), abs(t))
    if t < s - tol:
        raise ValueError("propagate_linear needs t >= s")
    grid = data.grid
    u = data.u.values.copy()
    ut = data.ut.values.copy()
    duration = t - s
    if duration <= tol:
        return StateSlice(ScalarField(grid, u), ScalarField(grid, ut), t)
    dt = timestep(spec, grid, config.cfl)
    n_full = int(math.floor(duration / dt + 1e-12))
    remainder = duration - n_full * dt
    if remainder < 1e-10 * max(1.0, duration):
        remainder = 0.0

    bufs = _work_buffers(grid)
    for k in range(n_full):
        _rk4_step(u, ut, s + k * dt, dt, spec, grid, False, bufs)
        if k % 64 == 0:
            _check_amplitude(u, ut, k, s + k * dt)
    if remainder > 0.0:
        _rk4_step(u, ut, s + n_full * dt, remainder, spec, grid, False, bufs)
    _check_amplitude(u, ut, n_full, t)
    return StateSlice(ScalarField(grid, u), ScalarField(grid, ut), t)


def _tau_nodes(source: Trajectory, a: float, b: float, tau_dt: float) -> np.ndarray:
    """Quadrature nodes: source snapshot times in [a, b], thinned to ~tau_dt."""
    times = source.times
    inside = times[(times >= a - 1e-9) & (times <= b + 1e-9)]
    if inside.size < 2:
        raise ValueError(f"need at least two source snapshots inside [{a}, {b}]")
    cadence = float(np.min(np.diff(inside)))
    stride = max(1, int(round(tau_dt / cadence)))
    nodes = list(inside[::stride])
    if nodes[-1] != inside[-1]:
        nodes.append(inside[-1])
    return np.array(nodes)


def duhamel_integral(source_traj: Trajectory, spec: MetricSpec, tau_range,
                     eval_times, config: SimConfig) -> Trajectory:
    """Trapezoidal Duhamel sum  int S(t, tau)(0, u^5(tau)) dtau  at eval_times.

    Every tau node contributes one linear propagation of (0, u^5(tau))
    carried forward through all evaluation times; contributions are
    accumulated in fixed tau order.
    """
    a, b = tau_range
    if not (source_traj.t0 - 1e-9 <= a < b <= source_traj.t1 + 1e-9):
        raise ValueError(f"tau range [{a}, {b}] outside source trajectory")
    eval_times = np.asarray(sorted(eval_times), dtype=float)
    if eval_times[0] < b - 1e-9:
        raise ValueError("eval times must not precede the end of the tau range")

    tau_dt = config.duhamel_tau_dt
    if tau_dt is None:
        tau_dt = 10.0 * timestep(spec, source_traj.grid, config.cfl)
    taus = _tau_nodes(source_traj, a, b, tau_dt)

    # trapezoid weights on the (possibly non-uniform) tau nodes
    w = np.zeros_like(taus)
    w[:-1] += 0.5 * np.diff(taus)
    w[1:] += 0.5 * np.diff(taus)

    grid = source_traj.grid
    acc_u = [np.zeros(grid.shape) for _ in eval_times]
    acc_ut = [np.zeros(grid.shape) for _ in eval_times]
    for tau, weight in zip(taus, w):
        src = source_traj.slice_at(tau)
        # the quintic source enters the first-order system through the
        # momentum g^{00} u_t, so the injected velocity is u^5 / g^{00}
        # (-u^5 on the flat background)
        g00 = sample_metric(spec, grid, float(tau)).g00
        state = StateSlice(
            zero_field(grid),
            ScalarField(grid, src.u.values ** 5 / g00),
            tau,
        )
        prev_t = tau
        for i, te in enumerate(eval_times):
            state = propagate_linear(state, prev_t, te, spec, config)
            prev_t = te
            acc_u[i] += weight * state.u.values
            acc_ut[i] += weight * state.ut.values

    slices = [
        StateSlice(ScalarField(grid, au), ScalarField(grid, aut), te)
        for au, aut, te in zip(acc_u, acc_ut, eval_times)
    ]
    return Trajectory(
        slices=slices,
        times=eval_times,
        scalars={},
        grid=grid,
        dt=source_traj.dt,
    )


# ---------------------------------------------------------------------------
# trajectory persistence: snapshot directory + manifest.csv
# ---------------------------------------------------------------------------

MANIFEST_COLUMNS = ("step", "t", "energy", "l2", "l6", "linf")


def save_trajectory(traj: Trajectory, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    for i, state in enumerate(traj.slices):
        write_state(os.path.join(directory, f"snap_{i:05d}.bin"), state)
    with open(os.path.join(directory, "manifest.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for i, t in enumerate(traj.times):
            writer.writerow(
                [i, repr(float(t))]
                + [repr(float(traj.scalars[k][i])) for k in ("energy", "l2", "l6", "linf")]
            )


def load_trajectory(directory) -> Trajectory:
    names = sorted(
        f for f in os.listdir(directory) if f.startswith("snap_") and f.endswith(".bin")
    )
    if not names:
        raise FileNotFoundError(f"no snapshots found in {directory}")
    slices = [read_state(os.path.join(directory, f)) for f in names]
    times = np.array([s.t for s in slices])
    scalars: dict[str, np.ndarray] = {}
    manifest = os.path.join(directory, "manifest.csv")
    if os.path.exists(manifest):
        with open(manifest, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) == len(slices):
            for key in ("energy", "l2", "l6", "linf"):
                scalars[key] = np.array([float(r[key]) for r in rows])
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return Trajectory(slices=slices, times=times, scalars=scalars,
                      grid=slices[0].grid, dt=dt)
