"""Compiled per-trajectory evolution loops.

SU(2) elements are carried as the pair ``(alpha, beta)`` of
``[[alpha, -conj(beta)], [beta, conj(alpha)]]``. Each trajectory is handled
independently, so results do not depend on the thread count.
"""

import numpy as np
from numba import config, njit, prange

# the bundled TBB is too old for numba; try OpenMP first
config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

SMALL_ANGLE = 1e-8


@njit(cache=True, inline="always")
def _step(a, eta, d):
    omega = np.sqrt(a * a + eta * eta)
    if omega * d < SMALL_ANGLE:
        return complex(1.0, -0.5 * eta * d), complex(0.0, -0.5 * a * d)
    theta = 0.5 * omega * d
    s = np.sin(theta) / omega
    return complex(np.cos(theta), -eta * s), complex(0.0, -a * s)


@njit(cache=True, inline="always")
def _mul(a1, b1, a2, b2):
    # (1) @ (2)
    return a1 * a2 - np.conj(b1) * b2, b1 * a2 + np.conj(a1) * b2


@njit(cache=True, inline="always")
def _interval(a, delta, t0, t1, sign, ptr, end, jumps):
    al = complex(1.0, 0.0)
    be = complex(0.0, 0.0)
    t = t0
    while ptr < end and jumps[ptr] < t1:
        sa, sb = _step(a, sign * delta, jumps[ptr] - t)
        al, be = _mul(sa, sb, al, be)
        t = jumps[ptr]
        sign = -sign
        ptr += 1
    sa, sb = _step(a, sign * delta, t1 - t)
    al, be = _mul(sa, sb, al, be)
    return al, be, sign, ptr


@njit(cache=True, parallel=True)
def evolve_totals(edges, amps, delta, signs, offsets, jumps):
    """Full propagator of every trajectory."""
    n_traj = signs.size
    alpha = np.empty(n_traj, dtype=np.complex128)
    beta = np.empty(n_traj, dtype=np.complex128)
    for k in prange(n_traj):
        ptr = offsets[k]
        end = offsets[k + 1]
        sign = float(signs[k])
        while ptr < end and jumps[ptr] <= edges[0]:
            sign = -sign
            ptr += 1
        al = complex(1.0, 0.0)
        be = complex(0.0, 0.0)
        for m in range(amps.size):
            ia, ib, sign, ptr = _interval(amps[m], delta, edges[m], edges[m + 1], sign, ptr, end, jumps)
            al, be = _mul(ia, ib, al, be)
        alpha[k] = al
        beta[k] = be
    return alpha, beta


@njit(cache=True, parallel=True)
def evolve_intervals(edges, amps, delta, signs, offsets, jumps):
    """Propagator of every control interval of every trajectory, shape (N, n)."""
    n_traj = signs.size
    n = amps.size
    alpha = np.empty((n_traj, n), dtype=np.complex128)
    beta = np.empty((n_traj, n), dtype=np.complex128)
    for k in prange(n_traj):
        ptr = offsets[k]
        end = offsets[k + 1]
        sign = float(signs[k])
        while ptr < end and jumps[ptr] <= edges[0]:
            sign = -sign
            ptr += 1
        for m in range(n):
            ia, ib, sign, ptr = _interval(amps[m], delta, edges[m], edges[m + 1], sign, ptr, end, jumps)
            alpha[k, m] = ia
            beta[k, m] = ib
    return alpha, beta


def to_matrices(alpha, beta):
    """Stack ``(alpha, beta)`` arrays into full ``(..., 2, 2)`` matrices."""
    out = np.empty(alpha.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = alpha
    out[..., 0, 1] = -np.conj(beta)
    out[..., 1, 0] = beta
    out[..., 1, 1] = np.conj(alpha)
    return out


@njit(cache=True, inline="always")
def _fill(M, al, be):
    M[0, 0] = al
    M[0, 1] = -np.conj(be)
    M[1, 0] = be
    M[1, 1] = np.conj(al)


@njit(cache=True, inline="always")
def _sandwich(U, A, out):
    # out = U A U^dagger
    for i in range(2):
        for j in range(2):
            acc = 0j
            for p in range(2):
                for q in range(2):
                    acc += U[i, p] * A[p, q] * np.conj(U[j, q])
            out[i, j] = acc


@njit(cache=True, inline="always")
def _sandwich_dagger(U, A, out):
    # out = U^dagger A U
    for i in range(2):
        for j in range(2):
            acc = 0j
            for p in range(2):
                for q in range(2):
                    acc += np.conj(U[p, i]) * A[p, q] * U[q, j]
            out[i, j] = acc


@njit(cache=True, parallel=True)
def gradient_traces(edges, amps, delta, signs, offsets, jumps, rho0s, rhofs):
    """``sum_p tr(lambda_m^dagger [X, rho_m])`` for every trajectory and interval."""
    n_traj = signs.size
    n = amps.size
    out = np.zeros((n_traj, n), dtype=np.complex128)
    for k in prange(n_traj):
        steps = np.empty((n, 2, 2), dtype=np.complex128)
        ptr = offsets[k]
        end = offsets[k + 1]
        sign = float(signs[k])
        while ptr < end and jumps[ptr] <= edges[0]:
            sign = -sign
            ptr += 1
        for m in range(n):
            ia, ib, sign, ptr = _interval(amps[m], delta, edges[m], edges[m + 1], sign, ptr, end, jumps)
            _fill(steps[m], ia, ib)
        rhos = np.empty((n, 2, 2), dtype=np.complex128)
        cur = np.empty((2, 2), dtype=np.complex128)
        nxt = np.empty((2, 2), dtype=np.complex128)
        for p in range(rho0s.shape[0]):
            cur[:, :] = rho0s[p]
            for m in range(n):
                _sandwich(steps[m], cur, rhos[m])
                cur[:, :] = rhos[m]
            cur[:, :] = rhofs[p]
            for m in range(n - 1, -1, -1):
                r = rhos[m]
                # [X, r] = X r - r X with X = [[0, 1], [1, 0]]
                c00 = r[1, 0] - r[0, 1]
                c01 = r[1, 1] - r[0, 0]
                c10 = r[0, 0] - r[1, 1]
                c11 = r[0, 1] - r[1, 0]
                out[k, m] += (
                    np.conj(cur[0, 0]) * c00
                    + np.conj(cur[0, 1]) * c01
                    + np.conj(cur[1, 0]) * c10
                    + np.conj(cur[1, 1]) * c11
                )
                _sandwich_dagger(steps[m], cur, nxt)
                cur[:, :] = nxt
    return out
