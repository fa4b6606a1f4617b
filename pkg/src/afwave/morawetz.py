"""Interaction functionals, their time-derivative ledger and the quiet-time
search.

The localized interaction potential at radius R is

    M_R(t) = int e(t,y) phi((x-y)/R) [ (x-y) . grad u(x) u_t(x)
                                       + u(x) u_t(x) ] dx dy,

with e the energy density.  Every double integral here has the pairing
form  int A(y) K(x-y) B(x) dx dy  and is evaluated spectrally:

    sum_x (A * K)(x) B(x) dx^6 = dx^6 / n^3 * sum_xi Re[A_hat K_hat conj(B_hat)],

using the circular convolution theorem (kernels vanish for |x-y| >= 2R,
which must fit inside the half extent, so wrap never aliases them).
Direct O(n^6) double-sum twins of each functional are provided for
small-grid cross-checks.

The flat-background time derivative of M_R splits exactly into an
interior part carried by the kernel phi and a boundary part carried by
phi', supported on the annulus R <= |x-y| <= 2R:

  interior  = int k(w) { e(y) [-(u_t^2 + |grad u|^2 + u^6)/2](x)
                         + (u_t grad u)(y) . (u_t grad u)(x) }
  boundary  = int phit(w) { e(y) [ -u_t^2/2 + |grad u|^2/2 + u^6/6
                                   - (what . grad u)^2 ](x)
                            + [(u_t grad u)(y) . what] [(what . grad u) u_t](x) }
            + int psi(w) { -e(y) [(what . grad u) u](x)
                           + [(u_t grad u)(y) . what] [u u_t](x) }

with k(w) = phi(|w|/R), phit(w) = phi'(|w|/R) |w|/R, psi(w) =
phi'(|w|/R)/R and what = w/|w|.  On a curved background the same
expressions are evaluated with the curved energy density; the leftover
in  dM/dt = interior + boundary + residual  then collects the
metric-induced error terms (zero for the flat metric up to
discretization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .evolve import SimConfig, Trajectory, duhamel_integral
from .field import Grid3, StateSlice, gradient_arrays
from .metric import MetricSample, MetricSpec, sample_metric
from .norms import MixedNormSpec, energy_density, mixed_norm, total_energy

SYM6 = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


class KernelTooLargeError(ValueError):
    """The cutoff support 2R does not fit inside the half extent."""


class DurationTooShortError(ValueError):
    """The trajectory is shorter than the averaging window e^J R0."""


@dataclass(frozen=True)
class MorawetzConfig:
    """Averaging and quiet-time parameters.

    R0 is the smallest averaging radius (>= 2 dx), J the number of
    e-folds averaged over, T the recent-past window length.  phi_profile
    names the cutoff bridge; only the documented "exp-bridge" exists.
    """

    R: float = 4.0
    R0: float = 1.0
    J: float = 2.0
    T: float = 2.0
    phi_profile: str = "exp-bridge"

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("averaging exponent J must be >= 1")
        if self.R <= 0 or self.R0 <= 0 or self.T <= 0:
            raise ValueError("R, R0 and T must be positive")
        if self.phi_profile != "exp-bridge":
            raise ValueError("only the exp-bridge cutoff profile is implemented")

    @property
    def averaging_span(self) -> float:
        return math.exp(self.J) * self.R0


# ---------------------------------------------------------------------------
# the cutoff and its radial derivative
# ---------------------------------------------------------------------------

def _cutoff_profile(s):
    """phi(s): 1 on |s| <= 1, exp(1 - 1/(1 - (|s|-1)^2)) on 1 < |s| < 2, 0 beyond."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.ones_like(s)
    out[s >= 2.0] = 0.0
    bridge = (s > 1.0) & (s < 2.0)
    w = s[bridge] - 1.0
    out[bridge] = np.exp(1.0 - 1.0 / (1.0 - w * w))
    return out


def _cutoff_derivative(s):
    """phi'(s) on the bridge: phi(s) * (-2 w) / (1 - w^2)^2 with w = |s| - 1."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    bridge = (s > 1.0) & (s < 2.0)
    w = s[bridge] - 1.0
    out[bridge] = np.exp(1.0 - 1.0 / (1.0 - w * w)) * (-2.0 * w) / (1.0 - w * w) ** 2
    return out


def cutoff(z, R: float) -> float:
    """phi(z / R) for a 3-vector z."""
    if R <= 0:
        raise ValueError("cutoff radius must be positive")
    z = np.asarray(z, dtype=float)
    return float(_cutoff_profile(np.linalg.norm(z) / R))


# ---------------------------------------------------------------------------
# kernels on the circular displacement lattice
# ---------------------------------------------------------------------------

def _check_kernel_fits(grid: Grid3, R: float) -> None:
    if 2.0 * R >= grid.half_extent:
        raise KernelTooLargeError(
            f"cutoff support 2R={2 * R} must stay below half extent {grid.half_extent}"
        )


@lru_cache(maxsize=4)
def _displacement(grid: Grid3):
    """Circular displacement coordinates (w1, w2, w3, |w|) on the grid."""
    idx = np.arange(grid.n)
    d = np.where(idx <= grid.n // 2, idx, idx - grid.n) * grid.dx
    w1, w2, w3 = np.meshgrid(d, d, d, indexing="ij", sparse=True)
    mag = np.sqrt(w1 * w1 + w2 * w2 + w3 * w3)
    return w1, w2, w3, mag


def _scalar_kernel(grid: Grid3, R: float) -> np.ndarray:
    _, _, _, mag = _displacement(grid)
    return _cutoff_profile(mag / R)


@lru_cache(maxsize=4)
def _scalar_kernel_hat(grid: Grid3, R: float) -> np.ndarray:
    """DFT of the even kernel phi(|w|/R); purely real."""
    _check_kernel_fits(grid, R)
    return np.fft.fftn(_scalar_kernel(grid, R)).real


@lru_cache(maxsize=4)
def _potential_kernel_hats(grid: Grid3, R: float):
    """(k_hat, [K_i imag parts]) for K_i(w) = phi(|w|/R) w_i (odd, imaginary DFT)."""
    _check_kernel_fits(grid, R)
    w1, w2, w3, mag = _displacement(grid)
    k = _cutoff_profile(mag / R)
    ki_im = [np.fft.fftn(k * np.broadcast_to(w, grid.shape)).imag for w in (w1, w2, w3)]
    return _scalar_kernel_hat(grid, R), ki_im


@lru_cache(maxsize=4)
def _boundary_kernel_hats(grid: Grid3, R: float):
    """DFT parts of phit, phit what_i what_j (SYM6) and psi what_i."""
    _check_kernel_fits(grid, R)
    w1, w2, w3, mag = _displacement(grid)
    dphi = _cutoff_derivative(mag / R)
    safe = np.where(mag > 0, mag, 1.0)
    phit = dphi * mag / R
    psi = dphi / R
    phit_hat = np.fft.fftn(phit).real
    tij_hat = []
    for (i, j) in SYM6:
        wi = (w1, w2, w3)[i]
        wj = (w1, w2, w3)[j]
        tij_hat.append(np.fft.fftn(phit * wi * wj / safe ** 2).real)
    vi_im = [
        np.fft.fftn(psi * np.broadcast_to(w, grid.shape) / safe).imag
        for w in (w1, w2, w3)
    ]
    return phit_hat, tij_hat, vi_im


def _pair(a_hat, b_hat, k_re=None, k_im=None, grid: Grid3 | None = None) -> float:
    """dx^6 / n^3 * sum_xi Re[(k_re + i k_im) * A_hat * conj(B_hat)]."""
    cross = a_hat * np.conj(b_hat)
    total = 0.0
    if k_re is not None:
        total += float(np.sum(k_re * cross.real))
    if k_im is not None:
        total -= float(np.sum(k_im * cross.imag))
    return total * grid.cell_volume ** 2 / grid.n ** 3


# ---------------------------------------------------------------------------
# the interaction functionals
# ---------------------------------------------------------------------------

def _state_fields(state: StateSlice, metric: MetricSample):
    u = state.u.values
    ut = state.ut.values
    gx, gy, gz = gradient_arrays(u, state.grid.dx)
    e = energy_density(state, metric).values
    return u, ut, (gx, gy, gz), e


def morawetz_potential(state: StateSlice, metric: MetricSample, R: float) -> float:
    """M_R(t) via spectral pairing; raises KernelTooLargeError if 2R >= L."""
    grid = state.grid
    k_hat, ki_im = _potential_kernel_hats(grid, R)
    u, ut, (gx, gy, gz), e = _state_fields(state, metric)
    e_hat = np.fft.fftn(e)
    total = _pair(e_hat, np.fft.fftn(u * ut), k_re=k_hat, grid=grid)
    for g, k_im in zip((gx, gy, gz), ki_im):
        total += _pair(e_hat, np.fft.fftn(ut * g), k_im=k_im, grid=grid)
    return total


def main_density(state: StateSlice, metric: MetricSample, R: float) -> float:
    """int e(y) phi((x-y)/R) [ (|u_t| - |grad u|)^2 / 2 + u^6 / 6 ](x) dx dy.

    Non-negative by construction (both factors are pointwise >= 0)."""
    grid = state.grid
    k_hat = _scalar_kernel_hat(grid, R)
    u, ut, (gx, gy, gz), e = _state_fields(state, metric)
    gmag = np.sqrt(gx * gx + gy * gy + gz * gz)
    q = 0.5 * (np.abs(ut) - gmag) ** 2 + u ** 6 / 6.0
    return _pair(np.fft.fftn(e), np.fft.fftn(q), k_re=k_hat, grid=grid)


def _ledger_terms(state: StateSlice, metric: MetricSample, R: float):
    """(M_R, interior, boundary, positive_density) at one snapshot."""
    grid = state.grid
    k_hat, ki_im = _potential_kernel_hats(grid, R)
    phit_hat, tij_hat, vi_im = _boundary_kernel_hats(grid, R)
    u, ut, grads, e = _state_fields(state, metric)
    gx, gy, gz = grads

    e_hat = np.fft.fftn(e)
    p_hat = [np.fft.fftn(ut * g) for g in grads]
    uut_hat = np.fft.fftn(u * ut)

    m_r = _pair(e_hat, uut_hat, k_re=k_hat, grid=grid)
    for ph, k_im in zip(p_hat, ki_im):
        m_r += _pair(e_hat, ph, k_im=k_im, grid=grid)

    grad2 = gx * gx + gy * gy + gz * gz
    u6 = u ** 6
    interior = _pair(
        e_hat, np.fft.fftn(-0.5 * (ut * ut + grad2 + u6)), k_re=k_hat, grid=grid
    )
    for ph in p_hat:
        interior += _pair(ph, ph, k_re=k_hat, grid=grid)

    b1_hat = np.fft.fftn(-0.5 * ut * ut + 0.5 * grad2 + u6 / 6.0)
    boundary = _pair(e_hat, b1_hat, k_re=phit_hat, grid=grid)
    for m, (i, j) in enumerate(SYM6):
        mult = 1.0 if i == j else 2.0
        gij_hat = np.fft.fftn(grads[i] * grads[j])
        boundary -= mult * _pair(e_hat, gij_hat, k_re=tij_hat[m], grid=grid)
        boundary += mult * _pair(p_hat[i], p_hat[j], k_re=tij_hat[m], grid=grid)
    for i in range(3):
        boundary -= _pair(e_hat, np.fft.fftn(grads[i] * u), k_im=vi_im[i], grid=grid)
        boundary += _pair(p_hat[i], uut_hat, k_im=vi_im[i], grid=grid)

    gmag = np.sqrt(grad2)
    q = 0.5 * (np.abs(ut) - gmag) ** 2 + u6 / 6.0
    positive = _pair(e_hat, np.fft.fftn(q), k_re=k_hat, grid=grid)
    return m_r, interior, boundary, positive


# ---------------------------------------------------------------------------
# direct O(n^6) twins for small-grid cross-checks
# ---------------------------------------------------------------------------

def _direct_pair(A: np.ndarray, kernel_lattice: np.ndarray, B: np.ndarray,
                 grid: Grid3) -> float:
    """sum_{x,y} A(y) K(x-y) B(x) dx^6 by an explicit loop over y nodes."""
    n = grid.n
    total = 0.0
    for a in range(n):
        for b in range(n):
            for c in range(n):
                if A[a, b, c] == 0.0:
                    continue
                k = np.roll(kernel_lattice, (a, b, c), axis=(0, 1, 2))
                total += A[a, b, c] * float(np.sum(k * B))
    return total * grid.cell_volume ** 2


def morawetz_potential_direct(state: StateSlice, metric: MetricSample,
                              R: float) -> float:
    """Brute-force double-sum version of morawetz_potential (small grids)."""
    grid = state.grid
    _check_kernel_fits(grid, R)
    w1, w2, w3, mag = _displacement(grid)
    k = _cutoff_profile(mag / R)
    u, ut, (gx, gy, gz), e = _state_fields(state, metric)
    total = _direct_pair(e, k, u * ut, grid)
    for w, g in zip((w1, w2, w3), (gx, gy, gz)):
        total += _direct_pair(e, k * np.broadcast_to(w, grid.shape), ut * g, grid)
    return total


def main_density_direct(state: StateSlice, metric: MetricSample, R: float) -> float:
    grid = state.grid
    _check_kernel_fits(grid, R)
    _, _, _, mag = _displacement(grid)
    k = _cutoff_profile(mag / R)
    u, ut, (gx, gy, gz), e = _state_fields(state, metric)
    gmag = np.sqrt(gx * gx + gy * gy + gz * gz)
    q = 0.5 * (np.abs(ut) - gmag) ** 2 + u ** 6 / 6.0
    return _direct_pair(e, k, q, grid)


# ---------------------------------------------------------------------------
# potential bound, averaging, ledger
# ---------------------------------------------------------------------------

def potential_bound(ledger_or_series, E: float, R: float) -> float:
    """max_t |M_R(t)| / (E^2 R), the fitted constant of |M_R| <= c E^2 R."""
    series = getattr(ledger_or_series, "m_r", ledger_or_series)
    peak = float(np.max(np.abs(np.asarray(series)))) if np.size(series) else 0.0
    if peak == 0.0:
        return 0.0
    return peak / (E ** 2 * R)


def averaged_morawetz(traj: Trajectory, spec: MetricSpec,
                      config: MorawetzConfig, nodes_per_efold: int = 8) -> dict:
    """Log-averaged positive interaction mass over R in [R0, e^J R0].

    lhs = (1/J) int_t int main_density(t, R) dR/R dt over a window of
    length span = e^J R0; rhs_fit = lhs * J / (span * E^2) is the fitted
    constant of  lhs <~ (span / J) E^2.
    """
    grid = traj.grid
    if config.R0 < 2.0 * grid.dx:
        raise ValueError("R0 must be at least 2 dx")
    span = config.averaging_span
    if span > grid.half_extent:
        raise KernelTooLargeError(
            f"averaging span e^J R0 = {span:.3g} exceeds half extent {grid.half_extent:.3g}"
        )
    _check_kernel_fits(grid, span)  # largest radius must still fit
    if traj.t1 - traj.t0 < span - 1e-9:
        raise DurationTooShortError(
            f"trajectory duration {traj.t1 - traj.t0:.3g} < averaging window {span:.3g}"
        )

    n_nodes = max(2, int(math.ceil(nodes_per_efold * config.J)) + 1)
    log_r = np.linspace(math.log(config.R0), math.log(config.R0) + config.J, n_nodes)
    w_r = np.zeros(n_nodes)
    w_r[:-1] += 0.5 * np.diff(log_r)
    w_r[1:] += 0.5 * np.diff(log_r)

    # sum_R w_R k_hat_R, accumulated to keep one array in memory
    k_bar = np.zeros(grid.shape)
    _, _, _, mag = _displacement(grid)
    for lr, w in zip(log_r, w_r):
        k_bar += w * np.fft.fftn(_cutoff_profile(mag / math.exp(lr))).real

    in_window = (traj.times >= traj.t0 - 1e-9) & (traj.times <= traj.t0 + span + 1e-9)
    idx = np.nonzero(in_window)[0]
    times = traj.times[idx]
    w_t = np.zeros(times.size)
    w_t[:-1] += 0.5 * np.diff(times)
    w_t[1:] += 0.5 * np.diff(times)

    p_bar = np.zeros(grid.shape)
    for i, wt in zip(idx, w_t):
        state = traj.slices[i]
        metric = sample_metric(spec, grid, float(traj.times[i]))
        u, ut, (gx, gy, gz), e = _state_fields(state, metric)
        gmag = np.sqrt(gx * gx + gy * gy + gz * gz)
        q = 0.5 * (np.abs(ut) - gmag) ** 2 + u ** 6 / 6.0
        cross = np.fft.fftn(e) * np.conj(np.fft.fftn(q))
        p_bar += wt * cross.real

    lhs = float(np.sum(k_bar * p_bar)) * grid.cell_volume ** 2 / (config.J * grid.n ** 3)
    E = total_energy(traj.slices[idx[0]], sample_metric(spec, grid, float(times[0])))
    rhs_fit = lhs * config.J / (span * E ** 2) if E > 0 else 0.0
    return {"lhs": lhs, "rhs_fit": rhs_fit, "span": span, "energy": E,
            "n_r_nodes": n_nodes, "window": (float(times[0]), float(times[-1]))}


@dataclass
class MorawetzLedger:
    """Time series of M_R and its derivative decomposition.

    residual = dm_numeric - main_term - boundary_term collects the
    metric-induced error terms plus discretization; positive_density is
    the non-negative averaged integrand, reported alongside.
    residual_constant = |int residual dt| / (E^2 R).
    """

    times: np.ndarray
    m_r: np.ndarray
    dm_numeric: np.ndarray
    main_term: np.ndarray
    boundary_term: np.ndarray
    positive_density: np.ndarray
    residual: np.ndarray
    R: float
    energy: float
    residual_constant: float


def ledger(traj: Trajectory, spec: MetricSpec, R: float) -> MorawetzLedger:
    """Evaluate M_R, its centred time derivative and the exact flat-form
    interior/boundary terms on every snapshot."""
    grid = traj.grid
    m_r = np.empty(traj.times.size)
    main = np.empty_like(m_r)
    boundary = np.empty_like(m_r)
    positive = np.empty_like(m_r)
    for i, (state, t) in enumerate(zip(traj.slices, traj.times)):
        metric = sample_metric(spec, grid, float(t))
        m_r[i], main[i], boundary[i], positive[i] = _ledger_terms(state, metric, R)
    dm = np.gradient(m_r, traj.times)
    residual = dm - main - boundary
    E = total_energy(traj.slices[0], sample_metric(spec, grid, float(traj.times[0])))
    integral = float(np.trapezoid(residual, traj.times))
    const = abs(integral) / (E ** 2 * R) if E > 0 else 0.0
    return MorawetzLedger(
        times=traj.times.copy(),
        m_r=m_r,
        dm_numeric=dm,
        main_term=main,
        boundary_term=boundary,
        positive_density=positive,
        residual=residual,
        R=R,
        energy=E,
        residual_constant=const,
    )


# ---------------------------------------------------------------------------
# quiet-time search
# ---------------------------------------------------------------------------

def quiet_time_search(traj: Trajectory, spec: MetricSpec, T: float, interval,
                      config: SimConfig, eval_window: float | None = None,
                      stride: float | None = None) -> dict:
    """Scan candidate times t0 in the interval and measure the recent-past
    Duhamel term  int_{t0-T}^{t0} S(., tau)(0, u^5(tau)) dtau  in L^8_{t,x}
    over [t0, t0 + W].  Returns the minimising candidate.

    W defaults to 2 T; the candidate stride defaults to
    max(snapshot_dt, T / 10).
    """
    lo, hi = interval
    if not (traj.t0 - 1e-9 <= lo < hi <= traj.t1 + 1e-9):
        raise ValueError("search interval must lie inside the trajectory range")
    if hi - lo <= T:
        raise ValueError("search interval must be longer than the window T")
    snapshot_dt = float(np.min(np.diff(traj.times)))
    if eval_window is None:
        eval_window = 2.0 * T
    if stride is None:
        stride = max(snapshot_dt, T / 10.0)

    times = traj.times
    cand_lo = max(lo, traj.t0 + T)
    candidates = []
    t_next = cand_lo
    while t_next <= hi + 1e-9:
        snapped = float(times[np.argmin(np.abs(times - t_next))])
        if (snapped >= cand_lo - 1e-9 and snapped <= hi + 1e-9
                and (not candidates or snapped > candidates[-1] + 1e-9)):
            candidates.append(snapped)
        t_next += stride
    if not candidates:
        raise ValueError("no snapshot-aligned candidates inside the interval")

    n_eval = max(2, int(round(eval_window / snapshot_dt)) + 1)
    values = []
    l8 = MixedNormSpec(8.0, 8.0)
    for t0 in candidates:
        eval_times = t0 + snapshot_dt * np.arange(n_eval)
        piece = duhamel_integral(traj, spec, (t0 - T, t0), eval_times, config)
        values.append(mixed_norm(piece, l8))
    values = np.array(values)
    best = int(np.argmin(values))
    return {
        "t0": candidates[best],
        "duhamel_l8": float(values[best]),
        "candidate_times": np.array(candidates),
        "candidate_values": values,
    }
