"""Fused periodic stencil kernels for the time stepper.

Two passes per right-hand-side evaluation: flux F_a = g^{aj} d_j u, then
conservative divergence plus sources.  Both kernels are pointwise over
disjoint output slabs, so parallel execution is deterministic regardless
of thread count.
"""

from numba import njit, prange


@njit(parallel=True, cache=True)
def flux(u, g11, g12, g13, g22, g23, g33, inv2dx, F1, F2, F3):
    n0, n1, n2 = u.shape
    for i in prange(n0):
        im = i - 1 if i > 0 else n0 - 1
        ip = i + 1 if i < n0 - 1 else 0
        for j in range(n1):
            jm = j - 1 if j > 0 else n1 - 1
            jp = j + 1 if j < n1 - 1 else 0
            for k in range(n2):
                km = k - 1 if k > 0 else n2 - 1
                kp = k + 1 if k < n2 - 1 else 0
                dux = (u[ip, j, k] - u[im, j, k]) * inv2dx
                duy = (u[i, jp, k] - u[i, jm, k]) * inv2dx
                duz = (u[i, j, kp] - u[i, j, km]) * inv2dx
                F1[i, j, k] = g11[i, j, k] * dux + g12[i, j, k] * duy + g13[i, j, k] * duz
                F2[i, j, k] = g12[i, j, k] * dux + g22[i, j, k] * duy + g23[i, j, k] * duz
                F3[i, j, k] = g13[i, j, k] * dux + g23[i, j, k] * duy + g33[i, j, k] * duz


@njit(parallel=True, cache=True)
def acceleration(F1, F2, F3, u, ut, g00, dtg00, inv2dx, quintic, out):
    """out = (u^5 - d_a F_a - dtg00 * ut) / g00, central divergence."""
    n0, n1, n2 = u.shape
    for i in prange(n0):
        im = i - 1 if i > 0 else n0 - 1
        ip = i + 1 if i < n0 - 1 else 0
        for j in range(n1):
            jm = j - 1 if j > 0 else n1 - 1
            jp = j + 1 if j < n1 - 1 else 0
            for k in range(n2):
                km = k - 1 if k > 0 else n2 - 1
                kp = k + 1 if k < n2 - 1 else 0
                div = (
                    (F1[ip, j, k] - F1[im, j, k])
                    + (F2[i, jp, k] - F2[i, jm, k])
                    + (F3[i, j, kp] - F3[i, j, km])
                ) * inv2dx
                src = 0.0
                if quintic:
                    uu = u[i, j, k]
                    src = uu * uu * uu * uu * uu
                out[i, j, k] = (src - div - dtg00[i, j, k] * ut[i, j, k]) / g00[i, j, k]
