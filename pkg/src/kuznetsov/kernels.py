"""Hot stencil kernels.

Every kernel exists twice: an explicit-loop version that numba compiles, and
a vectorised numpy version.  The module-level names (``gradient``,
``second_pure``, ...) point at the compiled loops unless numba is missing or
``KUZNETSOV_NUMBA=0``; both variants stay importable so they can be checked
against each other and benchmarked.

Neighbour tables have shape ``(n_nodes, dim, 4)`` and hold the node index at
grid offsets ``-2, -1, +1, +2`` along each axis, or ``-1`` when that grid
point is not part of the domain.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

M2, M1, P1, P2 = 0, 1, 2, 3


# ---------------------------------------------------------------- loops

def _gradient_loops(u, nbr, h):
    n, dim = nbr.shape[0], nbr.shape[1]
    out = np.zeros((n, dim))
    for i in range(n):
        u0 = u[i]
        for d in range(dim):
            m2 = nbr[i, d, 0]
            m1 = nbr[i, d, 1]
            p1 = nbr[i, d, 2]
            p2 = nbr[i, d, 3]
            hd = h[d]
            if m1 >= 0 and p1 >= 0:
                out[i, d] = (u[p1] - u[m1]) / (2.0 * hd)
            elif p1 >= 0 and p2 >= 0:
                out[i, d] = (-3.0 * u0 + 4.0 * u[p1] - u[p2]) / (2.0 * hd)
            elif m1 >= 0 and m2 >= 0:
                out[i, d] = (3.0 * u0 - 4.0 * u[m1] + u[m2]) / (2.0 * hd)
            elif p1 >= 0:
                out[i, d] = (u[p1] - u0) / hd
            elif m1 >= 0:
                out[i, d] = (u0 - u[m1]) / hd
    return out


def _second_pure_loops(u, nbr, h):
    n, dim = nbr.shape[0], nbr.shape[1]
    out = np.zeros((n, dim))
    for i in range(n):
        u0 = u[i]
        for d in range(dim):
            m2 = nbr[i, d, 0]
            m1 = nbr[i, d, 1]
            p1 = nbr[i, d, 2]
            p2 = nbr[i, d, 3]
            h2 = h[d] * h[d]
            if m1 >= 0 and p1 >= 0:
                out[i, d] = (u[m1] - 2.0 * u0 + u[p1]) / h2
            elif p1 >= 0 and p2 >= 0:
                out[i, d] = (u0 - 2.0 * u[p1] + u[p2]) / h2
            elif m1 >= 0 and m2 >= 0:
                out[i, d] = (u0 - 2.0 * u[m1] + u[m2]) / h2
    return out


def _lp_sum_loops(values, weights, p):
    n, m = values.shape
    acc = 0.0
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += abs(values[i, j]) ** p
        acc += weights[i] * s
    return acc


def _quadratic_source_loops(w, grad_u, grad_w, v, k, inv_rho, sign):
    n, dim = grad_u.shape
    out = np.empty(n)
    for i in range(n):
        gu2 = 0.0
        vgw = 0.0
        for d in range(dim):
            gu2 += grad_u[i, d] * grad_u[i, d]
            vgw += v[i, d] * grad_w[i, d]
        out[i] = 2.0 * k * w[i] * w[i] + 2.0 * inv_rho * gu2 - 2.0 * sign * vgw
    return out


def _disk_cell_fraction_loops(coords, h, radius, nsub):
    n = coords.shape[0]
    out = np.empty(n)
    r2 = radius * radius
    for i in range(n):
        cnt = 0
        for a in range(nsub):
            x = coords[i, 0] + ((a + 0.5) / nsub - 0.5) * h
            for b in range(nsub):
                y = coords[i, 1] + ((b + 0.5) / nsub - 0.5) * h
                if x * x + y * y < r2:
                    cnt += 1
        out[i] = cnt / (nsub * nsub)
    return out


# ---------------------------------------------------------------- numpy

def _take(u, idx):
    # index -1 wraps in numpy; callers mask those entries out
    return u[idx]


def _gradient_numpy(u, nbr, h):
    u = np.asarray(u, dtype=float)
    n, dim = nbr.shape[0], nbr.shape[1]
    out = np.zeros((n, dim))
    for d in range(dim):
        m2, m1, p1, p2 = (nbr[:, d, j] for j in range(4))
        hd = h[d]
        um2, um1, up1, up2 = (_take(u, j) for j in (m2, m1, p1, p2))
        central = (m1 >= 0) & (p1 >= 0)
        fwd2 = ~central & (p1 >= 0) & (p2 >= 0)
        bwd2 = ~central & ~fwd2 & (m1 >= 0) & (m2 >= 0)
        fwd1 = ~central & ~fwd2 & ~bwd2 & (p1 >= 0)
        bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & (m1 >= 0)
        col = np.zeros(n)
        col = np.where(central, (up1 - um1) / (2.0 * hd), col)
        col = np.where(fwd2, (-3.0 * u + 4.0 * up1 - up2) / (2.0 * hd), col)
        col = np.where(bwd2, (3.0 * u - 4.0 * um1 + um2) / (2.0 * hd), col)
        col = np.where(fwd1, (up1 - u) / hd, col)
        col = np.where(bwd1, (u - um1) / hd, col)
        out[:, d] = col
    return out


def _second_pure_numpy(u, nbr, h):
    u = np.asarray(u, dtype=float)
    n, dim = nbr.shape[0], nbr.shape[1]
    out = np.zeros((n, dim))
    for d in range(dim):
        m2, m1, p1, p2 = (nbr[:, d, j] for j in range(4))
        h2 = h[d] * h[d]
        um2, um1, up1, up2 = (_take(u, j) for j in (m2, m1, p1, p2))
        central = (m1 >= 0) & (p1 >= 0)
        fwd = ~central & (p1 >= 0) & (p2 >= 0)
        bwd = ~central & ~fwd & (m1 >= 0) & (m2 >= 0)
        col = np.zeros(n)
        col = np.where(central, (um1 - 2.0 * u + up1) / h2, col)
        col = np.where(fwd, (u - 2.0 * up1 + up2) / h2, col)
        col = np.where(bwd, (u - 2.0 * um1 + um2) / h2, col)
        out[:, d] = col
    return out


def _lp_sum_numpy(values, weights, p):
    return float(weights @ np.sum(np.abs(values) ** p, axis=1))


def _quadratic_source_numpy(w, grad_u, grad_w, v, k, inv_rho, sign):
    return (2.0 * k * w * w
            + 2.0 * inv_rho * np.sum(grad_u * grad_u, axis=1)
            - 2.0 * sign * np.sum(v * grad_w, axis=1))


def _disk_cell_fraction_numpy(coords, h, radius, nsub):
    offs = ((np.arange(nsub) + 0.5) / nsub - 0.5) * h
    x = coords[:, 0, None, None] + offs[None, :, None]
    y = coords[:, 1, None, None] + offs[None, None, :]
    inside = (x * x + y * y) < radius * radius
    return inside.reshape(len(coords), -1).mean(axis=1)


# ---------------------------------------------------------------- dispatch

gradient_numpy = _gradient_numpy
second_pure_numpy = _second_pure_numpy
lp_sum_numpy = _lp_sum_numpy
quadratic_source_numpy = _quadratic_source_numpy
disk_cell_fraction_numpy = _disk_cell_fraction_numpy

if USE_NUMBA:
    gradient_loops = njit(cache=True)(_gradient_loops)
    second_pure_loops = njit(cache=True)(_second_pure_loops)
    lp_sum_loops = njit(cache=True)(_lp_sum_loops)
    quadratic_source_loops = njit(cache=True)(_quadratic_source_loops)
    disk_cell_fraction_loops = njit(cache=True)(_disk_cell_fraction_loops)

    def gradient(u, nbr, h):
        return gradient_loops(np.ascontiguousarray(u, dtype=np.float64), nbr, h)

    def second_pure(u, nbr, h):
        return second_pure_loops(np.ascontiguousarray(u, dtype=np.float64), nbr, h)

    def lp_sum(values, weights, p):
        return float(lp_sum_loops(np.ascontiguousarray(values, dtype=np.float64),
                                  weights, float(p)))

    def quadratic_source(w, grad_u, grad_w, v, k, inv_rho, sign):
        return quadratic_source_loops(
            np.ascontiguousarray(w, dtype=np.float64),
            np.ascontiguousarray(grad_u, dtype=np.float64),
            np.ascontiguousarray(grad_w, dtype=np.float64),
            np.ascontiguousarray(v, dtype=np.float64),
            float(k), float(inv_rho), float(sign))

    def disk_cell_fraction(coords, h, radius, nsub=8):
        return disk_cell_fraction_loops(coords, float(h), float(radius), int(nsub))
else:
    gradient_loops = _gradient_loops
    second_pure_loops = _second_pure_loops
    lp_sum_loops = _lp_sum_loops
    quadratic_source_loops = _quadratic_source_loops
    disk_cell_fraction_loops = _disk_cell_fraction_loops

    gradient = _gradient_numpy
    second_pure = _second_pure_numpy

    def lp_sum(values, weights, p):
        return _lp_sum_numpy(np.asarray(values, dtype=float), weights, p)

    quadratic_source = _quadratic_source_numpy

    def disk_cell_fraction(coords, h, radius, nsub=8):
        return _disk_cell_fraction_numpy(coords, h, radius, nsub)
