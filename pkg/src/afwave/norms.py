"""Spacetime norms, energies, local-energy norms, partitioning and the bound.

All trajectory norms integrate snapshot values with the trapezoid rule in
time and node sums in space, so every Hoelder-type interpolation
inequality asserted here holds exactly for the discrete measures (up to
float rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolve import Trajectory, rhs
from .field import ScalarField, StateSlice, central_difference, gradient_arrays
from .metric import MetricSample, MetricSpec, sample_metric


class ZeroInitialEnergyError(ValueError):
    """The reference energy E(T1) vanishes but the numerator does not."""


class BoundOverflowError(OverflowError):
    pass


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

def energy_density(state: StateSlice, metric: MetricSample) -> ScalarField:
    """e = -g^{ij} d_i u d_j u / (2 g^{00}) + u_t^2 / 2 + u^6 / 6, per node."""
    gx, gy, gz = gradient_arrays(state.u.values, state.grid.dx)
    g11, g12, g13, g22, g23, g33 = metric.gij
    quad = (
        g11 * gx * gx + g22 * gy * gy + g33 * gz * gz
        + 2.0 * (g12 * gx * gy + g13 * gx * gz + g23 * gy * gz)
    )
    e = -quad / (2.0 * metric.g00) + 0.5 * state.ut.values ** 2 + state.u.values ** 6 / 6.0
    return ScalarField(state.grid, e)


def total_energy(state: StateSlice, metric: MetricSample) -> float:
    return float(np.sum(energy_density(state, metric).values) * state.grid.cell_volume)


def trajectory_energies(traj: Trajectory, spec: MetricSpec) -> np.ndarray:
    return np.array(
        [
            total_energy(s, sample_metric(spec, traj.grid, float(t)))
            for s, t in zip(traj.slices, traj.times)
        ]
    )


# ---------------------------------------------------------------------------
# mixed spacetime norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixedNormSpec:
    """L^q in time of L^r in space; either exponent may be inf."""

    q: float
    r: float

    def __post_init__(self):
        if (self.q < 1 and self.q != np.inf) or (self.r < 1 and self.r != np.inf):
            raise ValueError("mixed norm exponents must be >= 1 or inf")

    @property
    def name(self) -> str:
        fmt = lambda v: "inf" if v == np.inf else f"{v:g}"
        return f"L{fmt(self.q)}_t_L{fmt(self.r)}_x"


def _space_norms(traj: Trajectory, r: float) -> np.ndarray:
    vol = traj.grid.cell_volume
    if r == np.inf:
        return np.array([np.max(np.abs(s.u.values)) for s in traj.slices])
    return np.array(
        [(np.sum(np.abs(s.u.values) ** r) * vol) ** (1.0 / r) for s in traj.slices]
    )


def mixed_norm(traj: Trajectory, spec: MixedNormSpec) -> float:
    if len(traj.slices) < 2:
        raise ValueError("mixed norms need at least two snapshots")
    a = _space_norms(traj, spec.r)
    if spec.q == np.inf:
        return float(np.max(a))
    return float(np.trapezoid(a ** spec.q, traj.times) ** (1.0 / spec.q))


# ---------------------------------------------------------------------------
# local-energy norms
# ---------------------------------------------------------------------------

def le1_norm(traj: Trajectory, gamma: float, include_sextic: bool = False) -> float:
    """Weighted local-energy norm of the solution over the trajectory span.

    norm^2 = int_t sum_x [ |grad_{t,x} u|^2 / <r>^{1+gamma}
                           + u^2 / <r>^{3+gamma}
                           (+ u^6 / <r> if flagged) ] dx^3 dt
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    br = traj.grid.bracket_r()
    w_grad = br ** (-1.0 - gamma)
    w_u = br ** (-3.0 - gamma)
    w_sex = 1.0 / br
    vol = traj.grid.cell_volume
    densities = []
    for s in traj.slices:
        gx, gy, gz = gradient_arrays(s.u.values, traj.grid.dx)
        grad2 = s.ut.values ** 2 + gx * gx + gy * gy + gz * gz
        total = np.sum(grad2 * w_grad) + np.sum(s.u.values ** 2 * w_u)
        if include_sextic:
            total += np.sum(s.u.values ** 6 * w_sex)
        densities.append(total * vol)
    return float(math.sqrt(np.trapezoid(np.array(densities), traj.times)))


def le_star_norm(F_traj: Trajectory) -> float:
    """Dual-weight source norm: sqrt( int_t sum_x <r> F^2 dx^3 dt ),
    applied to the u component of the trajectory slices."""
    br = F_traj.grid.bracket_r()
    vol = F_traj.grid.cell_volume
    densities = [np.sum(br * s.u.values ** 2) * vol for s in F_traj.slices]
    return float(math.sqrt(np.trapezoid(np.array(densities), F_traj.times)))


def iled_ratio(traj: Trajectory, spec: MetricSpec, gamma: float) -> float:
    """(le1_norm^2 with the sextic term + E(T2)) / E(T1)."""
    energies = trajectory_energies(traj, spec)
    e1, e2 = float(energies[0]), float(energies[-1])
    numer = le1_norm(traj, gamma, include_sextic=True) ** 2 + e2
    if e1 == 0.0:
        if numer == 0.0:
            return 0.0
        raise ZeroInitialEnergyError("E(T1) = 0 but the trajectory is not zero")
    return numer / e1


# ---------------------------------------------------------------------------
# high-order energies
# ---------------------------------------------------------------------------

def _spatial_multi_indices(N: int):
    out = []
    for total in range(N + 1):
        for a in range(total + 1):
            for b in range(total + 1 - a):
                out.append((a, b, total - a - b))
    return out


def _apply_multi(values: np.ndarray, alpha, dx: float) -> np.ndarray:
    out = values
    for axis, count in enumerate(alpha):
        for _ in range(count):
            out = central_difference(out, axis, dx)
    return out


def high_order_energy(traj: Trajectory, spec: MetricSpec, N: int) -> dict:
    """E_N(t) = sum_{|alpha| <= N} 0.5 || grad_{t,x} d^alpha u(t) ||_{L^2}^2.

    alpha ranges over spatial multi-indices; the time component of the
    gradient is d_t d^alpha u = d^alpha u_t.  Returns the series and the
    ratio sup_t E_N(t) / E_N(T1).  N <= 2 at desk scale.
    """
    if N > 2:
        raise ValueError("high-order energies are computed for N <= 2")
    dx = traj.grid.dx
    vol = traj.grid.cell_volume
    series = []
    for s in traj.slices:
        total = 0.0
        for alpha in _spatial_multi_indices(N):
            du = _apply_multi(s.u.values, alpha, dx)
            dut = _apply_multi(s.ut.values, alpha, dx)
            gx, gy, gz = gradient_arrays(du, dx)
            total += 0.5 * float(
                np.sum(dut * dut + gx * gx + gy * gy + gz * gz) * vol
            )
        series.append(total)
    series = np.array(series)
    ratio = float(np.max(series) / series[0]) if series[0] > 0 else 0.0
    return {"times": traj.times.copy(), "series": series, "ratio": ratio}


# ---------------------------------------------------------------------------
# partition of the time axis by cumulative L^8 mass
# ---------------------------------------------------------------------------

@dataclass
class PartitionResult:
    endpoints: np.ndarray        # interior crossing times t_1 .. t_{M-1}
    per_interval_l8: np.ndarray  # L^8_{t,x} norm on each of the M intervals
    M: int
    total_l8: float
    eta: float


def partition_by_l8(linear_traj: Trajectory, eta: float) -> PartitionResult:
    """Split the trajectory span so each piece has L^8_{t,x} norm <= eta.

    The cumulative mass F(t) = int_{T0}^{t} ||v(s)||_{L^8_x}^8 ds is built
    on snapshot times (trapezoid) and cut at the levels k*eta^8; crossing
    times come from linear interpolation of the piecewise-linear F.
    M = ceil(B^8 / eta^8) with B the total norm.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    times = linear_traj.times
    a8 = _space_norms(linear_traj, 8.0) ** 8
    increments = 0.5 * (a8[1:] + a8[:-1]) * np.diff(times)
    F = np.concatenate([[0.0], np.cumsum(increments)])
    F_end = float(F[-1])
    B = F_end ** (1.0 / 8.0)
    eta8 = eta ** 8
    if F_end <= eta8:
        M = 1
        endpoints = np.array([])
    else:
        M = int(math.ceil(F_end / eta8 - 1e-12))
        levels = eta8 * np.arange(1, M)
        endpoints = np.interp(levels, F, times)
    cuts = np.concatenate([[times[0]], endpoints, [times[-1]]])
    cut_F = np.interp(cuts, times, F)
    per_interval = np.diff(cut_F) ** (1.0 / 8.0)
    return PartitionResult(
        endpoints=endpoints,
        per_interval_l8=per_interval,
        M=M,
        total_l8=B,
        eta=eta,
    )


# ---------------------------------------------------------------------------
# the explicit global bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundInputs:
    E: float
    A: float
    C: float = 1.0

    def __post_init__(self):
        if self.E < 0 or self.A <= 0 or self.C <= 0:
            raise ValueError("bound inputs need E >= 0 and A, C > 0")


@dataclass
class BoundResult:
    value: float
    log_value: float
    log_value_alt: float  # exponent sum evaluated as 634/42 for cross-checking
    overflow: bool


LOG_CAP = 700.0
_EXP_MAIN = 85.0 / 6.0 + 13.0 / 14.0
_EXP_ALT = 634.0 / 42.0


def theorem_bound(inputs: BoundInputs) -> BoundResult:
    """C * E^{4/7} * A * exp(C * E^{85/6} * E^{13/14} * A^{11}), in log space.

    The log of the bound is always reported; overflow is signalled (flag
    set, value = inf) when even the log exceeds 700, i.e. the bound is
    not representable in float64.
    """
    E, A, C = inputs.E, inputs.A, inputs.C
    if E == 0.0:
        return BoundResult(0.0, -math.inf, -math.inf, False)
    log_arg = math.log(C) + _EXP_MAIN * math.log(E) + 11.0 * math.log(A)
    log_arg_alt = math.log(C) + _EXP_ALT * math.log(E) + 11.0 * math.log(A)
    prefactor_log = math.log(C) + (4.0 / 7.0) * math.log(E) + math.log(A)
    log_value = prefactor_log + math.exp(log_arg) if log_arg <= LOG_CAP else math.inf
    log_alt = prefactor_log + math.exp(log_arg_alt) if log_arg_alt <= LOG_CAP else math.inf
    overflow = not log_value <= LOG_CAP
    value = math.inf if overflow else math.exp(log_value)
    return BoundResult(value, log_value, log_alt, overflow)


# ---------------------------------------------------------------------------
# time derivatives for norm consumers
# ---------------------------------------------------------------------------

def second_time_derivative(state: StateSlice, spec: MetricSpec,
                           nonlinear: bool) -> ScalarField:
    """u_tt from the equation of motion at the slice's own time."""
    metric = sample_metric(spec, state.grid, state.t)
    return rhs(state, metric, nonlinear)
