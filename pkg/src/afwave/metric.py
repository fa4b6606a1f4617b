"""Asymptotically flat metric perturbation families and their validation.

The inverse metric is g^{ab} = m^{ab} + h^{ab} with Minkowski m =
diag(-1, 1, 1, 1) and a perturbation h with h^{0j} = 0 exactly.  The
built-in families are isotropic:

    h^{00}(t, x) = eps * s(t) * p(r),      h^{ij}(t, x) = delta^{ij} * h^{00},

with the spatial profile p(r) = (1 + r^2/rho^2)^{-q/2}, q = 3 + delta by
default, and the time factor s(t) = 1 (static) or (1 + cos(omega t))/2.
All derivative fields are evaluated from the closed forms, never by
finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from enum import Enum
from functools import lru_cache

import numpy as np

from .field import Grid3, bracket

SYM6 = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_DIAG6 = (0, 3, 5)


class NonLorentzianError(ValueError):
    """The sampled metric lost its Lorentzian signature somewhere."""


class DegeneratePointError(ValueError):
    """The incoming null direction is undefined at the spatial origin."""


class MetricFamily(Enum):
    FLAT = "flat"
    STATIC_BUMP = "static_bump"
    TIME_MODULATED_BUMP = "time_modulated_bump"


@dataclass(frozen=True)
class MetricSpec:
    """Parameters of one perturbation family.

    profile_decay overrides the profile exponent q (default 3 + delta);
    it exists so a deliberately under-decaying profile can be built as a
    negative control without violating delta > 0.
    """

    family: MetricFamily = MetricFamily.FLAT
    epsilon: float = 0.05
    gamma: float = 0.5
    delta: float = 0.1
    bump_radius: float = 2.0
    modulation_freq: float = 0.5
    profile_decay: float | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.gamma <= 0 or self.delta <= 0:
            raise ValueError("gamma and delta must be positive")
        if self.bump_radius <= 0:
            raise ValueError("bump_radius must be positive")

    @property
    def decay_power(self) -> float:
        return self.profile_decay if self.profile_decay is not None else 3.0 + self.delta

    def time_factor(self, t: float) -> float:
        if self.family is MetricFamily.TIME_MODULATED_BUMP:
            return 0.5 * (1.0 + math.cos(self.modulation_freq * t))
        return 1.0

    def time_factor_rate(self, t: float) -> float:
        if self.family is MetricFamily.TIME_MODULATED_BUMP:
            return -0.5 * self.modulation_freq * math.sin(self.modulation_freq * t)
        return 0.0


def _profile(spec: MetricSpec, r2):
    """Spatial profile p = (1 + r^2/rho^2)^{-q/2}; p(0) = 1."""
    return (1.0 + r2 / spec.bump_radius ** 2) ** (-0.5 * spec.decay_power)


def _profile_gradient(spec: MetricSpec, r2, coords):
    """d_k p = -q x_k / rho^2 * (1 + r^2/rho^2)^{-q/2 - 1}."""
    q = spec.decay_power
    base = (1.0 + r2 / spec.bump_radius ** 2) ** (-0.5 * q - 1.0)
    factor = -q / spec.bump_radius ** 2
    return [factor * c * base for c in coords]


@dataclass
class MetricSample:
    """Inverse-metric fields on a grid at one time.

    gij holds the 6 independent components of g^{ij} ordered as SYM6 =
    (11, 12, 13, 22, 23, 33); component arrays may share storage.  The
    18 first-derivative fields d_k g^{ij} are produced lazily by the
    dk_gij property (closed-form, shape (3, 6) nested lists).
    """

    grid: Grid3
    t: float
    spec: MetricSpec
    g00: np.ndarray
    dt_g00: np.ndarray
    gij: list  # 6 arrays, SYM6 order
    _dk_gij: list | None = dfield(default=None, repr=False)

    @property
    def dk_gij(self) -> list:
        if self._dk_gij is None:
            self._dk_gij = _sample_derivatives(self.spec, self.grid, self.t)
        return self._dk_gij

    def gij_full(self) -> np.ndarray:
        """Dense symmetric (3, 3, n, n, n) view of g^{ij} (for checks)."""
        out = np.empty((3, 3) + self.grid.shape)
        for m, (i, j) in enumerate(SYM6):
            out[i, j] = self.gij[m]
            out[j, i] = self.gij[m]
        return out


def _sample_derivatives(spec: MetricSpec, grid: Grid3, t: float) -> list:
    if spec.family is MetricFamily.FLAT or spec.epsilon == 0.0:
        zero = _shared_zeros(grid)
        return [[zero] * 6 for _ in range(3)]
    x, y, z = grid.coords()
    r2 = np.broadcast_to(grid.radius() ** 2, grid.shape)
    scale = spec.epsilon * spec.time_factor(t)
    gp = _profile_gradient(spec, r2, (x, y, z))
    zero = _shared_zeros(grid)
    out = []
    for k in range(3):
        dk = np.ascontiguousarray(np.broadcast_to(scale * gp[k], grid.shape))
        row = []
        for m, (i, j) in enumerate(SYM6):
            row.append(dk if i == j else zero)
        out.append(row)
    return out


@lru_cache(maxsize=8)
def _shared_zeros(grid: Grid3) -> np.ndarray:
    z = np.zeros(grid.shape)
    z.setflags(write=False)
    return z


@lru_cache(maxsize=8)
def _shared_constant_cache(key):
    grid, value = key
    a = np.full(grid.shape, value)
    a.setflags(write=False)
    return a


def _shared_constant(grid: Grid3, value: float) -> np.ndarray:
    return _shared_constant_cache((grid, value))


@lru_cache(maxsize=8)
def _spatial_profile(spec: MetricSpec, grid: Grid3) -> np.ndarray:
    p = _profile(spec, grid.radius() ** 2)
    p.setflags(write=False)
    return p


def _assemble(spec: MetricSpec, grid: Grid3, t: float) -> "MetricSample":
    if spec.family is MetricFamily.FLAT or spec.epsilon == 0.0:
        g00 = _shared_constant(grid, -1.0)
        one = _shared_constant(grid, 1.0)
        zero = _shared_zeros(grid)
        gij = [one if i == j else zero for (i, j) in SYM6]
        return MetricSample(grid, t, spec, g00, zero, gij)

    h = spec.epsilon * spec.time_factor(t) * _spatial_profile(spec, grid)
    g00 = -1.0 + h
    diag = 1.0 + h
    dt_g00 = spec.epsilon * spec.time_factor_rate(t) * _spatial_profile(spec, grid)
    if spec.family is MetricFamily.STATIC_BUMP:
        dt_g00 = _shared_zeros(grid)
    zero = _shared_zeros(grid)
    gij = [diag if i == j else zero for (i, j) in SYM6]
    return MetricSample(grid, t, spec, g00, np.asarray(dt_g00), gij)


def _check_lorentzian(sample: MetricSample) -> None:
    if np.any(sample.g00 >= 0.0):
        raise NonLorentzianError("g^{00} >= 0 at some node")
    # Sylvester criterion on the symmetric 3x3 spatial block, vectorised.
    g11, g12, g13, g22, g23, g33 = sample.gij
    det2 = g11 * g22 - g12 * g12
    det3 = (
        g11 * (g22 * g33 - g23 * g23)
        - g12 * (g12 * g33 - g23 * g13)
        + g13 * (g12 * g23 - g22 * g13)
    )
    if np.any(g11 <= 0.0) or np.any(det2 <= 0.0) or np.any(det3 <= 0.0):
        raise NonLorentzianError("g^{ij} is not positive definite at some node")


@lru_cache(maxsize=32)
def _static_sample(spec: MetricSpec, grid: Grid3) -> MetricSample:
    sample = _assemble(spec, grid, 0.0)
    _check_lorentzian(sample)
    return sample


def sample_metric(spec: MetricSpec, grid: Grid3, t: float) -> MetricSample:
    """Evaluate g^{00}, d_t g^{00} and g^{ij} (plus lazy d_k g^{ij}) on the grid.

    Static families are cached per (spec, grid); the time-modulated family
    is assembled per call from a cached spatial profile.
    """
    if spec.family is not MetricFamily.TIME_MODULATED_BUMP:
        cached = _static_sample(spec, grid)
        if t == cached.t:
            return cached
        return MetricSample(grid, t, spec, cached.g00, cached.dt_g00,
                            cached.gij, cached._dk_gij)
    sample = _assemble(spec, grid, t)
    _check_lorentzian(sample)
    return sample


def wave_speed_bound(spec: MetricSpec, grid: Grid3) -> float:
    """Upper bound on sqrt(max eig g^{ij} / |g^{00}|) over the run.

    The modulated family peaks at time factor 1 (t = 0), so sampling at
    t = 0 bounds all times for every built-in family.  Gershgorin row sums
    bound the largest eigenvalue of the spatial block.
    """
    sample = sample_metric(spec, grid, 0.0)
    g = sample.gij
    rows = [
        np.abs(g[0]) + np.abs(g[1]) + np.abs(g[2]),
        np.abs(g[1]) + np.abs(g[3]) + np.abs(g[4]),
        np.abs(g[2]) + np.abs(g[4]) + np.abs(g[5]),
    ]
    eig_max = max(float(np.max(r)) for r in rows)
    g00_min = float(np.min(np.abs(sample.g00)))
    return math.sqrt(eig_max / g00_min)


# ---------------------------------------------------------------------------
# pointwise evaluation and the null contraction
# ---------------------------------------------------------------------------

def perturbation_at(spec: MetricSpec, t: float, x) -> tuple[float, np.ndarray]:
    """(h^{00}, h^{ij}) at one spacetime point, from the closed forms."""
    x = np.asarray(x, dtype=float)
    r2 = float(np.dot(x, x))
    h = spec.epsilon * spec.time_factor(t) * float(_profile(spec, r2))
    if spec.family is MetricFamily.FLAT:
        h = 0.0
    return h, h * np.eye(3)


def incoming_null_contraction(spec: MetricSpec, t: float, x) -> float:
    """h^{ab} Lbar_a Lbar_b with Lbar = (x^i/|x|) d_i - d_t.

    With h^{0j} = 0 this reduces to h^{00} + (x_i x_j / |x|^2) h^{ij};
    the time component enters squared so its sign drops out.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise DegeneratePointError("the incoming null direction needs |x| > 0")
    h00, hij = perturbation_at(spec, t, x)
    nhat = x / r
    return float(h00 + nhat @ hij @ nhat)


# ---------------------------------------------------------------------------
# validation of the decay hypotheses
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    """Worst measured/allowed ratios for the four decay conditions.

    amplitude:        |h| <= eps <t-r>^{1/2} / (<x>^gamma <t+r>^{1/2})
    null_contraction: |h^{LL}| <= eps <t-r> / (<x>^gamma <t+r>)
    derivatives:      |d^J h| <= eps <x>^{-1-gamma} for 1 <= |J| <= 5
    short_range:      |h| <= <x>^{-3-delta}
    """

    amplitude: float
    null_contraction: float
    derivatives: float
    short_range: float
    n_samples: int
    rng_seed: int
    box_extent: float
    passed: bool

    def ratios(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "null_contraction": self.null_contraction,
            "derivatives": self.derivatives,
            "short_range": self.short_range,
        }


def _multi_indices_4d(order_max: int):
    out = []
    for total in range(1, order_max + 1):
        for a in range(total + 1):
            for b in range(total + 1 - a):
                for c in range(total + 1 - a - b):
                    d = total - a - b - c
                    out.append((a, b, c, d))
    return out


@lru_cache(maxsize=8)
def _derivative_evaluator(family: MetricFamily, order_max: int):
    """Lambdified analytic derivatives d^J h00 for all 1 <= |J| <= order_max.

    The scalar h00 = eps*s(t)*(1 + r^2/rho^2)^{-q/2} generates every
    component of the isotropic families, so its derivatives bound all
    |d^J h^{mu nu}|.  Parameters stay symbolic so one compilation serves
    every spec of the family.
    """
    import sympy as sp

    t, x, y, z = sp.symbols("t x y z", real=True)
    eps, rho, q, omega = sp.symbols("eps rho q omega", positive=True)
    if family is MetricFamily.FLAT:
        expr = sp.Integer(0)
    else:
        s_t = (1 + sp.cos(omega * t)) / 2 if family is MetricFamily.TIME_MODULATED_BUMP else 1
        expr = eps * s_t * (1 + (x ** 2 + y ** 2 + z ** 2) / rho ** 2) ** (-q / 2)
    variables = (t, x, y, z)
    exprs = []
    for J in _multi_indices_4d(order_max):
        d = expr
        for var, count in zip(variables, J):
            if count:
                d = sp.diff(d, var, count)
        exprs.append(d)
    return sp.lambdify((t, x, y, z, eps, rho, q, omega), exprs, modules="numpy")


def _multiscale_samples(n_samples: int, rng_seed: int, extent: float):
    """Quasi-random spacetime samples over the box |t|,|x_i| <= extent.

    Sobol points in [0,1]^4 are mapped per coordinate through
    sign(w) * extent * (10^{3|w|} - 1) / 999 with w = 2u - 1, spreading
    samples across three decades so both near and far behaviour is probed.
    """
    from scipy.stats import qmc

    m = max(10, math.ceil(math.log2(n_samples)))
    sobol = qmc.Sobol(d=4, scramble=True, seed=rng_seed)
    u = sobol.random_base2(m)
    w = 2.0 * u - 1.0
    pts = np.sign(w) * extent * (10.0 ** (3.0 * np.abs(w)) - 1.0) / 999.0
    return pts[:, 0], pts[:, 1:4]


def validate_assumptions(spec: MetricSpec, n_samples: int = 4096,
                         rng_seed: int = 0) -> ValidationReport:
    """Sample the four decay conditions quasi-randomly over the spacetime box.

    Derivative conditions are checked for every mixed (t, x) multi-index
    1 <= |J| <= 5 using analytic derivatives of the closed form.  The
    report carries failures; it never raises.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples for a meaningful report")
    extent = 1.0e3
    ts, xs = _multiscale_samples(n_samples, rng_seed, extent)
    n_actual = ts.size
    r = np.linalg.norm(xs, axis=1)
    keep = r > 1e-9  # the null contraction needs |x| > 0
    ts, xs, r = ts[keep], xs[keep], r[keep]

    eps, gam, dlt = spec.epsilon, spec.gamma, spec.delta
    rho, q, omega = spec.bump_radius, spec.decay_power, spec.modulation_freq

    s_t = np.array([spec.time_factor(t) for t in ts])
    prof = _profile(spec, r ** 2)
    habs = np.zeros_like(r) if spec.family is MetricFamily.FLAT else eps * s_t * prof
    hll = 2.0 * habs  # isotropic families: h^{LL} = h00 + (x.x/r^2) h00 = 2 h00

    br_x = bracket(r)
    br_tm = bracket(ts - r)
    br_tp = bracket(ts + r)

    def worst(num, den):
        ratio = np.where(den > 0, num / den, np.inf)
        return float(np.max(ratio)) if ratio.size else 0.0

    rhs_a = eps * np.sqrt(br_tm) / (br_x ** gam * np.sqrt(br_tp))
    rhs_b = eps * br_tm / (br_x ** gam * br_tp)
    rhs_d = br_x ** (-3.0 - dlt)
    worst_a = worst(habs, rhs_a) if eps > 0 else 0.0
    worst_b = worst(hll, rhs_b) if eps > 0 else 0.0
    worst_d = worst(habs, rhs_d)

    if spec.family is MetricFamily.FLAT or eps == 0.0:
        worst_c = 0.0
    else:
        evaluator = _derivative_evaluator(spec.family, 5)
        derivs = evaluator(ts, xs[:, 0], xs[:, 1], xs[:, 2], eps, rho, q, omega)
        rhs_c = eps * br_x ** (-1.0 - gam)
        worst_c = 0.0
        for d in derivs:
            d = np.broadcast_to(np.asarray(d, dtype=float), r.shape)
            worst_c = max(worst_c, worst(np.abs(d), rhs_c))

    passed = all(w <= 1.0 for w in (worst_a, worst_b, worst_c, worst_d))
    return ValidationReport(
        amplitude=worst_a,
        null_contraction=worst_b,
        derivatives=worst_c,
        short_range=worst_d,
        n_samples=n_actual,
        rng_seed=rng_seed,
        box_extent=extent,
        passed=passed,
    )
