"""Compiled inner loops for HMM and CRF lattices.

Sequences are passed flattened: `obs` holds every symbol back to back and
`offsets[k]:offsets[k + 1]` slices sequence k.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def hmm_forward(pi, A, B, obs, alpha, scale):
    """Scaled forward pass; rows of `alpha` sum to 1 and log P = sum(log(scale))."""
    n = A.shape[0]
    T = obs.shape[0]
    s = 0.0
    for i in range(n):
        alpha[0, i] = pi[i] * B[i, obs[0]]
        s += alpha[0, i]
    scale[0] = s
    if s > 0:
        for i in range(n):
            alpha[0, i] /= s
    for t in range(1, T):
        s = 0.0
        o = obs[t]
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += alpha[t - 1, i] * A[i, j]
            alpha[t, j] = acc * B[j, o]
            s += alpha[t, j]
        scale[t] = s
        if s > 0:
            for j in range(n):
                alpha[t, j] /= s
    ll = 0.0
    for t in range(T):
        ll += np.log(scale[t])
    return ll


@njit(cache=True)
def hmm_backward(A, B, obs, scale, beta):
    n = A.shape[0]
    T = obs.shape[0]
    for i in range(n):
        beta[T - 1, i] = 1.0
    for t in range(T - 2, -1, -1):
        o = obs[t + 1]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * B[j, o] * beta[t + 1, j]
            beta[t, i] = acc / scale[t + 1]


@njit(cache=True)
def hmm_expected_counts(pi, A, B, obs, offsets, c_pi, c_A, c_B):
    """E-step over a batch of sequences; adds expected counts in place and returns the summed log-likelihood."""
    n = A.shape[0]
    total = 0.0
    for k in range(offsets.shape[0] - 1):
        seq = obs[offsets[k]:offsets[k + 1]]
        T = seq.shape[0]
        if T == 0:
            continue
        alpha = np.empty((T, n))
        beta = np.empty((T, n))
        scale = np.empty(T)
        total += hmm_forward(pi, A, B, seq, alpha, scale)
        hmm_backward(A, B, seq, scale, beta)
        for t in range(T):
            g = 0.0
            for i in range(n):
                g += alpha[t, i] * beta[t, i]
            for i in range(n):
                gi = alpha[t, i] * beta[t, i] / g
                c_B[i, seq[t]] += gi
                if t == 0:
                    c_pi[i] += gi
        for t in range(T - 1):
            o = seq[t + 1]
            for i in range(n):
                a = alpha[t, i] / scale[t + 1]
                for j in range(n):
                    c_A[i, j] += a * A[i, j] * B[j, o] * beta[t + 1, j]
    return total


@njit(cache=True)
def _logsumexp(v):
    m = -np.inf
    for x in v:
        if x > m:
            m = x
    if m == -np.inf:
        return m
    s = 0.0
    for x in v:
        s += np.exp(x - m)
    return m + np.log(s)


@njit(cache=True)
def crf_forward(trans, state, obs, log_alpha):
    """Log-space forward pass over the label lattice; returns log Z."""
    L = trans.shape[0]
    T = obs.shape[0]
    tmp = np.empty(L)
    for y in range(L):
        log_alpha[0, y] = state[y, obs[0]]
    for t in range(1, T):
        o = obs[t]
        for y in range(L):
            for yp in range(L):
                tmp[yp] = log_alpha[t - 1, yp] + trans[yp, y]
            log_alpha[t, y] = _logsumexp(tmp) + state[y, o]
    return _logsumexp(log_alpha[T - 1])


@njit(cache=True)
def crf_backward(trans, state, obs, log_beta):
    L = trans.shape[0]
    T = obs.shape[0]
    tmp = np.empty(L)
    for y in range(L):
        log_beta[T - 1, y] = 0.0
    for t in range(T - 2, -1, -1):
        o = obs[t + 1]
        for y in range(L):
            for yn in range(L):
                tmp[yn] = trans[y, yn] + state[yn, o] + log_beta[t + 1, yn]
            log_beta[t, y] = _logsumexp(tmp)


@njit(cache=True)
def crf_objective(trans, state, obs, labels, offsets, g_trans, g_state):
    """Unpenalized conditional log-likelihood of a labeled batch.

    Adds (empirical - expected) feature counts into `g_trans` / `g_state`.
    Uses scaled recursions on max-shifted potentials, so no exp() runs in
    the inner loops.
    """
    L = trans.shape[0]
    M = state.shape[1]
    t_max = trans.max()
    e_trans = np.exp(trans - t_max)
    s_max = np.empty(M)
    e_state = np.empty((L, M))
    for o in range(M):
        s_max[o] = state[:, o].max()
        for y in range(L):
            e_state[y, o] = np.exp(state[y, o] - s_max[o])
    total = 0.0
    for k in range(offsets.shape[0] - 1):
        a, b = offsets[k], offsets[k + 1]
        seq = obs[a:b]
        lab = labels[a:b]
        T = seq.shape[0]
        if T == 0:
            continue
        alpha = np.empty((T, L))
        beta = np.empty((T, L))
        scale = np.empty(T)
        s = 0.0
        for y in range(L):
            alpha[0, y] = e_state[y, seq[0]]
            s += alpha[0, y]
        scale[0] = s
        for y in range(L):
            alpha[0, y] /= s
        for t in range(1, T):
            o = seq[t]
            s = 0.0
            for y in range(L):
                acc = 0.0
                for yp in range(L):
                    acc += alpha[t - 1, yp] * e_trans[yp, y]
                alpha[t, y] = acc * e_state[y, o]
                s += alpha[t, y]
            scale[t] = s
            for y in range(L):
                alpha[t, y] /= s
        for y in range(L):
            beta[T - 1, y] = 1.0
        for t in range(T - 2, -1, -1):
            o = seq[t + 1]
            for y in range(L):
                acc = 0.0
                for yn in range(L):
                    acc += e_trans[y, yn] * e_state[yn, o] * beta[t + 1, yn]
                beta[t, y] = acc / scale[t + 1]
        log_z = (T - 1) * t_max
        for t in range(T):
            log_z += np.log(scale[t]) + s_max[seq[t]]

        score = state[lab[0], seq[0]]
        g_state[lab[0], seq[0]] += 1.0
        for t in range(1, T):
            score += trans[lab[t - 1], lab[t]] + state[lab[t], seq[t]]
            g_trans[lab[t - 1], lab[t]] += 1.0
            g_state[lab[t], seq[t]] += 1.0
        total += score - log_z

        for t in range(T):
            for y in range(L):
                g_state[y, seq[t]] -= alpha[t, y] * beta[t, y]
        for t in range(1, T):
            o = seq[t]
            for yp in range(L):
                a_s = alpha[t - 1, yp] / scale[t]
                for y in range(L):
                    g_trans[yp, y] -= a_s * e_trans[yp, y] * e_state[y, o] * beta[t, y]
    return total
