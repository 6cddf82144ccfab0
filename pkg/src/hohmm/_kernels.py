"""Compiled lattice recursions shared by all model orders.

A history of the ``r`` most recent states ``(q_{t-r+1}, ..., q_t)`` is
encoded base-``N`` with the oldest state as the most significant digit, so
there are ``S = N**r`` lattice cells per time step and ``suffix = N**(r-1)``.
Appending state ``w`` to history ``s`` gives ``(s % suffix) * N + w``; the
predecessors of history ``s2`` are ``i * suffix + s2 // N`` for ``i < N``.
The top-order log transition tensor is passed flattened to shape (S, N).
"""

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def forward_pass(alpha0, log_trans, log_b, n):
    S = alpha0.shape[0]
    suffix = S // n
    T = log_b.shape[0]
    alpha = np.empty((T, S))
    alpha[0, :] = alpha0
    for t in range(1, T):
        for s2 in range(S):
            base = s2 // n
            w = s2 - base * n
            m = NEG_INF
            for i in range(n):
                s = i * suffix + base
                v = alpha[t - 1, s] + log_trans[s, w]
                if v > m:
                    m = v
            if m == NEG_INF:
                alpha[t, s2] = NEG_INF
                continue
            acc = 0.0
            for i in range(n):
                s = i * suffix + base
                acc += math.exp(alpha[t - 1, s] + log_trans[s, w] - m)
            alpha[t, s2] = m + math.log(acc) + log_b[t, w]
    return alpha


@njit(cache=True)
def backward_pass(log_trans, log_b, n):
    S = log_trans.shape[0]
    suffix = S // n
    T = log_b.shape[0]
    beta = np.empty((T, S))
    beta[T - 1, :] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S):
            nxt = (s % suffix) * n
            m = NEG_INF
            for w in range(n):
                v = log_trans[s, w] + log_b[t + 1, w] + beta[t + 1, nxt + w]
                if v > m:
                    m = v
            if m == NEG_INF:
                beta[t, s] = NEG_INF
                continue
            acc = 0.0
            for w in range(n):
                acc += math.exp(log_trans[s, w] + log_b[t + 1, w] + beta[t + 1, nxt + w] - m)
            beta[t, s] = m + math.log(acc)
    return beta


@njit(cache=True)
def viterbi_pass(delta0, log_trans, log_b, n):
    S = delta0.shape[0]
    suffix = S // n
    T = log_b.shape[0]
    delta = np.empty((T, S))
    back = np.zeros((T, S), dtype=np.int64)
    delta[0, :] = delta0
    for t in range(1, T):
        for s2 in range(S):
            base = s2 // n
            w = s2 - base * n
            best = NEG_INF
            arg = 0
            for i in range(n):
                s = i * suffix + base
                v = delta[t - 1, s] + log_trans[s, w]
                if v > best:
                    best = v
                    arg = i
            delta[t, s2] = best + log_b[t, w]
            back[t, s2] = arg
    return delta, back


@njit(cache=True)
def transition_posteriors(alpha, beta, log_trans, log_b, log_total, n):
    """Expected counts ``sum_t P(history_t = s, q_{t+1} = w | O)``."""
    T, S = alpha.shape
    suffix = S // n
    counts = np.zeros((S, n))
    for t in range(T - 1):
        for s in range(S):
            a = alpha[t, s]
            if a == NEG_INF:
                continue
            nxt = (s % suffix) * n
            for w in range(n):
                v = a + log_trans[s, w] + log_b[t + 1, w] + beta[t + 1, nxt + w] - log_total
                if v > NEG_INF:
                    counts[s, w] += math.exp(v)
    return counts
