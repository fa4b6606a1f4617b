"""Grids, scalar fields, discrete differential operators and single-time norms.

Conventions used throughout the package:

* the domain is the periodic cube [-L, L)^3 with L = n*dx/2 and nodes
  x_k = -L + k*dx, stored C-ordered as values[ix, iy, iz];
* all spatial derivatives are 2nd-order central differences with periodic
  wrap, all quadratures are plain node sums (midpoint rule, O(dx^2));
* reductions use numpy's pairwise summation, so repeated runs on one
  machine are bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SNAPSHOT_MAGIC = b"AFWL"
SNAPSHOT_VERSION = 1


class AnnulusOutOfDomainError(ValueError):
    """The requested annulus does not fit inside the grid."""


class ChecksumMismatchError(IOError):
    """A snapshot file failed header or size validation."""


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid on [-L, L)^3 with n nodes per axis."""

    n: int
    dx: float

    def __post_init__(self):
        if self.n < 16 or self.n % 2 != 0:
            raise ValueError(f"grid needs n >= 16 and even, got n={self.n}")
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got dx={self.dx}")

    @property
    def half_extent(self) -> float:
        return 0.5 * self.n * self.dx

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    def axis(self) -> np.ndarray:
        """1D node coordinates, shared by all three axes."""
        return -self.half_extent + self.dx * np.arange(self.n)

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sparse broadcastable (X, Y, Z) coordinate arrays."""
        ax = self.axis()
        return np.meshgrid(ax, ax, ax, indexing="ij", sparse=True)

    def radius(self) -> np.ndarray:
        return _radius(self)

    def bracket_r(self) -> np.ndarray:
        """Japanese bracket of the node radius, <r> = sqrt(1 + r^2)."""
        return _bracket_r(self)


@lru_cache(maxsize=8)
def _radius(grid: Grid3) -> np.ndarray:
    x, y, z = grid.coords()
    r = np.sqrt(x * x + y * y + z * z)
    r.setflags(write=False)
    return r


@lru_cache(maxsize=8)
def _bracket_r(grid: Grid3) -> np.ndarray:
    b = np.sqrt(1.0 + _radius(grid) ** 2)
    b.setflags(write=False)
    return b


def bracket(v) -> np.ndarray:
    """<v> = sqrt(1 + v^2), elementwise."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + v * v)


@dataclass
class ScalarField:
    """A 64-bit scalar field sampled on a Grid3 (values[ix, iy, iz])."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class StateSlice:
    """Cauchy data (u, u_t) on one grid at a fixed time."""

    u: ScalarField
    ut: ScalarField
    t: float

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise ValueError("u and ut must live on the same grid")

    @property
    def grid(self) -> Grid3:
        return self.u.grid

    def copy(self) -> "StateSlice":
        return StateSlice(self.u.copy(), self.ut.copy(), self.t)


# ---------------------------------------------------------------------------
# discrete calculus
# ---------------------------------------------------------------------------

def central_difference(values: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """2nd-order central difference along one axis with periodic wrap."""
    return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * dx)


def gradient(f: ScalarField) -> tuple[ScalarField, ScalarField, ScalarField]:
    """Central-difference gradient (periodic). Exact on linear interior data."""
    dx = f.grid.dx
    return tuple(
        ScalarField(f.grid, central_difference(f.values, ax, dx)) for ax in range(3)
    )


def gradient_arrays(values: np.ndarray, dx: float) -> list[np.ndarray]:
    return [central_difference(values, ax, dx) for ax in range(3)]


def lebesgue_norm(f: ScalarField, p: float) -> float:
    """L^p norm with node-sum quadrature; p = inf gives the max norm."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1 or inf, got {p}")
    return float(
        (np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p)
    )


@lru_cache(maxsize=16)
def _frequency_magnitude(grid: Grid3) -> np.ndarray:
    """|xi| on the DFT lattice, xi = 2*pi*k/(n*dx) per axis."""
    xi = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)
    kx, ky, kz = np.meshgrid(xi, xi, xi, indexing="ij", sparse=True)
    mag = np.sqrt(kx * kx + ky * ky + kz * kz)
    mag.setflags(write=False)
    return mag


def sobolev_norm(f: ScalarField, s: float) -> float:
    """Homogeneous Sobolev norm || |xi|^s f_hat ||_{L^2} via the DFT.

    The mean is subtracted first and the zero frequency is excluded, so
    sobolev_norm(f, 0) equals the L^2 norm of the mean-free part (Parseval).
    Valid for -1 <= s <= 5.
    """
    if not -1.0 <= s <= 5.0:
        raise ValueError(f"Sobolev order must lie in [-1, 5], got {s}")
    vals = f.values - f.values.mean()
    fhat = np.fft.fftn(vals)
    mag = _frequency_magnitude(f.grid)
    weight = np.zeros(f.grid.shape)
    nz = mag > 0
    weight[nz] = mag[nz] ** (2.0 * s)
    total = np.sum(weight * (fhat.real ** 2 + fhat.imag ** 2))
    return float(np.sqrt(total * f.grid.cell_volume / f.grid.n ** 3))


def rotation_derivative(f: ScalarField, axis: int) -> ScalarField:
    """Angular derivative (x cross grad)_axis f, axis in {1, 2, 3}."""
    if axis not in (1, 2, 3):
        raise ValueError(f"rotation axis must be 1, 2 or 3, got {axis}")
    x, y, z = f.grid.coords()
    gx, gy, gz = gradient_arrays(f.values, f.grid.dx)
    if axis == 1:
        out = y * gz - z * gy
    elif axis == 2:
        out = z * gx - x * gz
    else:
        out = x * gy - y * gx
    return ScalarField(f.grid, out)


def radial_derivative(f: ScalarField) -> ScalarField:
    """(x/|x|) . grad f, with the origin node set to zero."""
    x, y, z = f.grid.coords()
    r = f.grid.radius()
    gx, gy, gz = gradient_arrays(f.values, f.grid.dx)
    out = np.zeros(f.grid.shape)
    mask = r > 0
    np.divide(x * gx + y * gy + z * gz, r, out=out, where=mask)
    return ScalarField(f.grid, out)


def _rotation_multi_indices(max_order: int):
    """Rotation multi-indices alpha in N^3 with |alpha| <= max_order."""
    out = []
    for a1 in range(max_order + 1):
        for a2 in range(max_order + 1 - a1):
            for a3 in range(max_order + 1 - a1 - a2):
                out.append((a1, a2, a3))
    return out


def annulus_norms(f: ScalarField, R: float) -> dict:
    """Sup of |f| on the shell R < |x| < R+1 and the weighted L^2 budget.

    The L^2 budget is the sum over j in {0,1} and rotation multi-indices
    |alpha| <= 2 of || d_r^j Omega^alpha f ||_{L^2(R-1 < |x| < R+2)}, the
    right-hand side of the annulus Sobolev inequality
        sup_{R<|x|<R+1} |f|  <=  C / R * (L^2 budget).
    The fitted constant sup * R / budget is returned for the record.
    """
    grid = f.grid
    if not R + 2 < grid.half_extent:
        raise AnnulusOutOfDomainError(
            f"annulus R+2={R + 2} does not fit inside half extent {grid.half_extent}"
        )
    r = grid.radius()
    sup_mask = (r > R) & (r < R + 1)
    l2_mask = (r > R - 1) & (r < R + 2)
    if not sup_mask.any() or not l2_mask.any():
        raise AnnulusOutOfDomainError(f"no grid nodes in the annulus at R={R}")
    sup = float(np.max(np.abs(f.values[sup_mask])))

    vol = grid.cell_volume
    total = 0.0
    for alpha in _rotation_multi_indices(2):
        g = f
        for axis, count in enumerate(alpha, start=1):
            for _ in range(count):
                g = rotation_derivative(g, axis)
        total += float(np.sqrt(np.sum(g.values[l2_mask] ** 2) * vol))
        dr = radial_derivative(g)
        total += float(np.sqrt(np.sum(dr.values[l2_mask] ** 2) * vol))

    fitted = sup * R / total if total > 0 else 0.0
    return {
        "sup_on_annulus": sup,
        "sum_l2_terms": total,
        "fitted_constant": fitted,
    }


# ---------------------------------------------------------------------------
# initial data families
# ---------------------------------------------------------------------------

def zero_field(grid: Grid3) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def gaussian_bump(grid: Grid3, amplitude: float, radius: float,
                  center=(0.0, 0.0, 0.0)) -> ScalarField:
    """amplitude * exp(-|x - center|^2 / radius^2); effectively compact."""
    x, y, z = grid.coords()
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return ScalarField(grid, amplitude * np.exp(-r2 / radius ** 2))


def power_tail(grid: Grid3, amplitude: float, core_radius: float) -> ScalarField:
    """amplitude * (1 + r^2/w^2)^{-1}; inverse-square tail, in L^2."""
    r = grid.radius()
    return ScalarField(grid, amplitude / (1.0 + (r / core_radius) ** 2))


def compact_bump(grid: Grid3, amplitude: float, radius: float) -> ScalarField:
    """Smooth bump with exact support |x| <= radius:
    amplitude * exp(-r^2 / (radius^2 - r^2)) inside, 0 outside."""
    r = grid.radius()
    out = np.zeros(grid.shape)
    inside = r < radius
    r2 = r[inside] ** 2
    out[inside] = amplitude * np.exp(-r2 / (radius ** 2 - r2))
    return ScalarField(grid, out)


def support_radius(state: StateSlice, rel_tol: float = 1e-10) -> float:
    """Radius of the smallest origin-centred ball holding all values above
    rel_tol times the max amplitude.  Used by the wrap-exclusion check."""
    amp = max(np.max(np.abs(state.u.values)), np.max(np.abs(state.ut.values)))
    if amp == 0.0:
        return 0.0
    r = state.grid.radius()
    mask = (np.abs(state.u.values) > rel_tol * amp) | (
        np.abs(state.ut.values) > rel_tol * amp
    )
    return float(np.max(r[mask])) if mask.any() else 0.0


# ---------------------------------------------------------------------------
# binary snapshot format
# ---------------------------------------------------------------------------
#
# Header: magic "AFWL" (4 bytes), version u32, n u32, dx f64, t f64,
# all little-endian, followed by one (field) or two (state) blocks of
# n^3 float64 values in C (row-major) order.

_HEADER = struct.Struct("<4sIIdd")


def _write_header(fh, n: int, dx: float, t: float) -> None:
    fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, n, dx, t))


def _read_header(fh):
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ChecksumMismatchError("snapshot file truncated before header end")
    magic, version, n, dx, t = _HEADER.unpack(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ChecksumMismatchError(f"bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
    if version != SNAPSHOT_VERSION:
        raise ChecksumMismatchError(f"unsupported snapshot version {version}")
    return n, dx, t


def write_state(path, state: StateSlice) -> None:
    with open(path, "wb") as fh:
        _write_header(fh, state.grid.n, state.grid.dx, state.t)
        fh.write(state.u.values.astype("<f8").tobytes())
        fh.write(state.ut.values.astype("<f8").tobytes())


def read_state(path) -> StateSlice:
    with open(path, "rb") as fh:
        n, dx, t = _read_header(fh)
        payload = fh.read()
    expected = 2 * n ** 3 * 8
    if len(payload) != expected:
        raise ChecksumMismatchError(
            f"state payload is {len(payload)} bytes, expected {expected}"
        )
    grid = Grid3(n, dx)
    arr = np.frombuffer(payload, dtype="<f8")
    u = arr[: n ** 3].reshape(grid.shape).copy()
    ut = arr[n ** 3:].reshape(grid.shape).copy()
    if not (np.isfinite(u).all() and np.isfinite(ut).all()):
        raise ChecksumMismatchError("state payload contains non-finite values")
    return StateSlice(ScalarField(grid, u), ScalarField(grid, ut), t)


def write_field(path, f: ScalarField, t: float = 0.0) -> None:
    with open(path, "wb") as fh:
        _write_header(fh, f.grid.n, f.grid.dx, t)
        fh.write(f.values.astype("<f8").tobytes())


def read_field(path) -> tuple[ScalarField, float]:
    with open(path, "rb") as fh:
        n, dx, t = _read_header(fh)
        payload = fh.read()
    expected = n ** 3 * 8
    if len(payload) != expected:
        raise ChecksumMismatchError(
            f"field payload is {len(payload)} bytes, expected {expected}"
        )
    grid = Grid3(n, dx)
    arr = np.frombuffer(payload, dtype="<f8")[: n ** 3].reshape(grid.shape).copy()
    return ScalarField(grid, arr), t
