"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The module-level names ``argmin_first`` and ``rollout_batch`` dispatch to the
numba versions when numba is importable and not disabled via
``STMDP_DISABLE_NUMBA``; ``lookahead_q`` always uses numpy. Both variants are always importable under their
``_nb`` / ``_np`` names so they can be compared directly.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

# Candidates within this absolute distance of the minimum count as ties.
TIE_ATOL = 1e-9


def argmin_first_np(q, atol=TIE_ATOL):
    """Column-wise minimum of ``q`` (K x N) and the first row index within ``atol`` of it."""
    best = q.min(axis=0)
    idx = np.argmax(q <= best + atol, axis=0)
    return best, idx


@njit(cache=True)
def argmin_first_nb(q, atol=TIE_ATOL):
    k, n = q.shape
    best = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    for x in range(n):
        m = q[0, x]
        for i in range(1, k):
            if q[i, x] < m:
                m = q[i, x]
        best[x] = m
        for i in range(k):
            if q[i, x] <= m + atol:
                idx[x] = i
                break
    return best, idx


def lookahead_q_np(skip, ccost_t, disc, w):
    """Candidate values ``ccost + disc[dt] * skip[dt, a] @ w`` with shape (T, M, N)."""
    return ccost_t + disc[:, None, None] * (skip @ w)


@njit(cache=True)
def lookahead_q_nb(skip, ccost_t, disc, w):
    t_bar, m, n, _ = skip.shape
    out = np.empty((t_bar, m, n))
    for dt in range(t_bar):
        for a in range(m):
            for x in range(n):
                acc = 0.0
                for y in range(n):
                    acc += skip[dt, a, x, y] * w[y]
                out[dt, a, x] = ccost_t[dt, a, x] + disc[dt] * acc
    return out


def rollout_batch_np(cum, costs, tau, pi, start, uniforms, disc, penalty):
    """Simulate many held-action episodes at once, vectorised over episodes.

    ``cum[a, x]`` is the cumulative transition row of ``P_a[x]`` with its tail
    pinned to exactly 1. ``uniforms`` has shape (E, H); one draw per step.
    """
    n_ep, horizon = uniforms.shape
    states = np.empty((n_ep, horizon + 1), dtype=np.int64)
    actions = np.empty((n_ep, horizon), dtype=np.int64)
    triggered = np.zeros((n_ep, horizon), dtype=np.bool_)
    cost = np.zeros(n_ep)
    pen = np.zeros(n_ep)
    x = np.full(n_ep, start, dtype=np.int64)
    a = np.zeros(n_ep, dtype=np.int64)
    nxt = np.zeros(n_ep, dtype=np.int64)
    states[:, 0] = x
    for t in range(horizon):
        fire = nxt == t
        a = np.where(fire, pi[x], a)
        nxt = np.where(fire, t + tau[x], nxt)
        triggered[:, t] = fire
        if t > 0:
            pen = pen + np.where(fire, disc[t] * penalty, 0.0)
        cost = cost + disc[t] * costs[x, a]
        actions[:, t] = a
        rows = cum[a, x]
        x = np.minimum((rows <= uniforms[:, t, None]).sum(axis=1), cum.shape[2] - 1)
        states[:, t + 1] = x
    return states, actions, triggered, cost, pen


@njit(cache=True)
def rollout_batch_nb(cum, costs, tau, pi, start, uniforms, disc, penalty):
    n_ep, horizon = uniforms.shape
    n = cum.shape[2]
    states = np.empty((n_ep, horizon + 1), dtype=np.int64)
    actions = np.empty((n_ep, horizon), dtype=np.int64)
    triggered = np.zeros((n_ep, horizon), dtype=np.bool_)
    cost = np.zeros(n_ep)
    pen = np.zeros(n_ep)
    for e in range(n_ep):
        x = start
        a = 0
        nxt = 0
        states[e, 0] = x
        c_acc = 0.0
        p_acc = 0.0
        for t in range(horizon):
            if nxt == t:
                a = pi[x]
                nxt = t + tau[x]
                triggered[e, t] = True
                if t > 0:
                    p_acc = p_acc + disc[t] * penalty
            c_acc = c_acc + disc[t] * costs[x, a]
            actions[e, t] = a
            u = uniforms[e, t]
            k = 0
            for y in range(n):
                if cum[a, x, y] <= u:
                    k += 1
            if k > n - 1:
                k = n - 1
            x = k
            states[e, t + 1] = x
        cost[e] = c_acc
        pen[e] = p_acc
    return states, actions, triggered, cost, pen


# The backup is a batched mat-vec; BLAS beats the compiled loop beyond a few
# dozen states (see benchmarks/bench_kernels.py), so it always takes numpy.
lookahead_q = lookahead_q_np
if HAS_NUMBA:
    argmin_first = argmin_first_nb
    rollout_batch = rollout_batch_nb
else:
    argmin_first = argmin_first_np
    rollout_batch = rollout_batch_np
