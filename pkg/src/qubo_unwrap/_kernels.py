"""Numba kernels for the QUBO solvers.

All kernels work on the symmetric CSR adjacency of a :class:`QuboProblem`
(offset excluded) and keep, per chain, the local field
``h_i = lin_i + sum_j b_ij x_j`` so that flipping ``x_i`` changes the energy
by ``(1 - 2 x_i) * h_i``.
"""

import math

import numpy as np
from numba import njit

_NJIT = dict(nogil=True, cache=True)

# proposals with beta * delta above this are rejected without drawing a random number
MAX_UPHILL = 40.0


@njit(**_NJIT)
def init_fields(lin, indptr, indices, data, x, h):
    n = lin.shape[0]
    energy = 0.0
    for i in range(n):
        acc = lin[i]
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        h[i] = acc
    for i in range(n):
        if x[i]:
            # each pair is counted from both ends
            half = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                half += data[p] * x[indices[p]]
            energy += lin[i] + 0.5 * half
    return energy


@njit(**_NJIT)
def flip(indptr, indices, data, x, h, i):
    """Flip bit ``i`` and return the energy change."""
    delta = h[i] if x[i] == 0 else -h[i]
    sign = 1.0 if x[i] == 0 else -1.0
    x[i] = 1 - x[i]
    for p in range(indptr[i], indptr[i + 1]):
        h[indices[p]] += sign * data[p]
    return delta


@njit(**_NJIT)
def metropolis_sweep(indptr, indices, data, x, h, beta, energy, rng):
    n = x.shape[0]
    for i in range(n):
        delta = h[i] if x[i] == 0 else -h[i]
        if delta <= 0.0:
            energy += flip(indptr, indices, data, x, h, i)
        else:
            cost = beta * delta
            if cost < MAX_UPHILL and rng.random() < math.exp(-cost):
                energy += flip(indptr, indices, data, x, h, i)
    return energy


@njit(**_NJIT)
def swap_log_acceptance(beta_a, beta_b, e_a, e_b):
    return (beta_a - beta_b) * (e_a - e_b)


@njit(**_NJIT)
def sa_run(lin, indptr, indices, data, betas, restarts, rng, trace):
    n = lin.shape[0]
    sweeps = betas.shape[0]
    x = np.zeros(n, dtype=np.int8)
    h = np.zeros(n)
    best_x = np.zeros(n, dtype=np.int8)
    best_e = np.inf
    step = 0
    for _ in range(restarts):
        for i in range(n):
            x[i] = 1 if rng.random() < 0.5 else 0
        energy = init_fields(lin, indptr, indices, data, x, h)
        if energy < best_e:
            best_e = energy
            best_x[:] = x
        for sweep in range(sweeps):
            energy = metropolis_sweep(indptr, indices, data, x, h, betas[sweep], energy, rng)
            if energy < best_e:
                best_e = energy
                best_x[:] = x
            trace[step] = best_e
            step += 1
    return best_x, best_e


@njit(**_NJIT)
def icm_exchange(indptr, indices, data, xa, ha, xb, hb, start):
    """Swap the connected cluster of disagreeing bits containing ``start``
    between two replicas. Returns ``(delta_a, delta_b, cluster_size)``."""
    n = xa.shape[0]
    if xa[start] == xb[start]:
        return 0.0, 0.0, 0
    in_cluster = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    top = 0
    count = 0
    stack[top] = start
    top += 1
    in_cluster[start] = True
    while top > 0:
        top -= 1
        i = stack[top]
        members[count] = i
        count += 1
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if not in_cluster[j] and xa[j] != xb[j]:
                in_cluster[j] = True
                stack[top] = j
                top += 1
    delta_a = 0.0
    delta_b = 0.0
    for m in range(count):
        i = members[m]
        delta_a += flip(indptr, indices, data, xa, ha, i)
    for m in range(count):
        i = members[m]
        delta_b += flip(indptr, indices, data, xb, hb, i)
    return delta_a, delta_b, count


@njit(**_NJIT)
def pt_run(lin, indptr, indices, data, betas, replicas, sweeps, icm_mask, icm_enabled, rng, trace):
    n = lin.shape[0]
    n_temps = betas.shape[0]
    chains = n_temps * replicas
    X = np.zeros((chains, n), dtype=np.int8)
    H = np.zeros((chains, n))
    E = np.zeros(chains)
    # slot[t, r] -> chain currently sitting at temperature t, replica r
    slot = np.empty((n_temps, replicas), dtype=np.int64)
    for c in range(chains):
        for i in range(n):
            X[c, i] = 1 if rng.random() < 0.5 else 0
        E[c] = init_fields(lin, indptr, indices, data, X[c], H[c])
    for t in range(n_temps):
        for r in range(replicas):
            slot[t, r] = t * replicas + r

    best_x = np.zeros(n, dtype=np.int8)
    best_e = np.inf
    for c in range(chains):
        if E[c] < best_e:
            best_e = E[c]
            best_x[:] = X[c]

    disagree = np.empty(n, dtype=np.int64)
    for sweep in range(sweeps):
        for t in range(n_temps):
            for r in range(replicas):
                c = slot[t, r]
                E[c] = metropolis_sweep(indptr, indices, data, X[c], H[c], betas[t], E[c], rng)

        if icm_enabled:
            for t in range(n_temps):
                if not icm_mask[t]:
                    continue
                for r in range(0, replicas - 1, 2):
                    a = slot[t, r]
                    b = slot[t, r + 1]
                    nd = 0
                    for i in range(n):
                        if X[a, i] != X[b, i]:
                            disagree[nd] = i
                            nd += 1
                    if nd == 0:
                        continue
                    start = disagree[int(rng.random() * nd)]
                    da, db, _ = icm_exchange(indptr, indices, data, X[a], H[a], X[b], H[b], start)
                    E[a] += da
                    E[b] += db

        for c in range(chains):
            if E[c] < best_e:
                best_e = E[c]
                best_x[:] = X[c]

        for r in range(replicas):
            for t in range(n_temps - 1):
                a = slot[t, r]
                b = slot[t + 1, r]
                log_acc = swap_log_acceptance(betas[t], betas[t + 1], E[a], E[b])
                if log_acc >= 0.0 or rng.random() < math.exp(log_acc):
                    slot[t, r] = b
                    slot[t + 1, r] = a
        trace[sweep] = best_e
    return best_x, best_e


@njit(**_NJIT)
def exhaustive_run(lin, indptr, indices, data, tol):
    """Gray-code enumeration of all 2**n assignments.

    Ties within ``tol`` go to the assignment with the smaller integer value
    ``sum_i x_i 2**i``.
    """
    n = lin.shape[0]
    x = np.zeros(n, dtype=np.int8)
    h = lin.copy()
    energy = 0.0
    best_e = 0.0
    best_code = 0
    code = 0
    total = 1 << n
    for g in range(1, total):
        # bit to flip: lowest set bit of g
        i = 0
        v = g
        while (v & 1) == 0:
            v >>= 1
            i += 1
        energy += flip(indptr, indices, data, x, h, i)
        code ^= 1 << i
        if energy < best_e - tol:
            best_e = energy
            best_code = code
        elif energy <= best_e + tol and code < best_code:
            best_code = code
            if energy < best_e:
                best_e = energy
    best_x = np.zeros(n, dtype=np.int8)
    for i in range(n):
        best_x[i] = (best_code >> i) & 1
    return best_x, best_e
