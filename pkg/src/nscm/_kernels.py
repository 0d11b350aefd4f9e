"""Numba kernels for the sample-rate inner loops (LMS FFE, Viterbi)."""

import numpy as np
from numba import njit

INF = 1e300


@njit(cache=True)
def lms_ffe(x, ntaps, mu, train, n_sym, points, w_init):
    """T/2-spaced complex LMS; window for symbol k is x[2k : 2k+ntaps].

    Training-directed for the first len(train) symbols, min-distance
    decision-directed afterwards. Returns (y, taps, errors).
    """
    w = w_init.copy()
    y = np.empty(n_sym, np.complex128)
    err = np.empty(n_sym, np.complex128)
    n_train = train.shape[0]
    n_pts = points.shape[0]
    for k in range(n_sym):
        base = 2 * k
        acc = 0.0 + 0.0j
        for i in range(ntaps):
            acc += w[i] * x[base + i]
        y[k] = acc
        if k < n_train:
            d = train[k]
        else:
            best = 0
            bd = INF
            for p in range(n_pts):
                dr = acc.real - points[p].real
                di = acc.imag - points[p].imag
                dist = dr * dr + di * di
                if dist < bd:
                    bd = dist
                    best = p
            d = points[best]
        e = d - acc
        err[k] = e
        scale = mu * e
        for i in range(ntaps):
            w[i] += scale * np.conj(x[base + i])
    return y, w, err


@njit(cache=True)
def viterbi_memory1(zr, zi, mur, mui, nlp, inv2s2, known_first, fmur, fmui):
    """Exact Viterbi over a memory-1 trellis, states = previous symbol.

    mur/mui hold x[s'] + alpha*x[s] per (s, s'). With ``known_first`` the
    first step uses fmur/fmui (previous symbol known); otherwise the
    start state is free (zero initial metrics, ordinary first step).
    Ties break to the lowest state index. Returns (path, cost).
    """
    t_len = zr.shape[0]
    s_len = nlp.shape[0]
    bp = np.empty((t_len, s_len), np.int16)
    metric = np.empty(s_len, np.float64)
    new = np.empty(s_len, np.float64)

    if known_first:
        for sp in range(s_len):
            dr = zr[0] - fmur[sp]
            di = zi[0] - fmui[sp]
            metric[sp] = (dr * dr + di * di) * inv2s2 + nlp[sp]
            bp[0, sp] = -1
    else:
        for sp in range(s_len):
            best = INF
            bi = 0
            for s in range(s_len):
                dr = zr[0] - mur[s, sp]
                di = zi[0] - mui[s, sp]
                c = (dr * dr + di * di) * inv2s2
                if c < best:
                    best = c
                    bi = s
            metric[sp] = best + nlp[sp]
            bp[0, sp] = bi

    for t in range(1, t_len):
        for sp in range(s_len):
            best = INF
            bi = 0
            for s in range(s_len):
                dr = zr[t] - mur[s, sp]
                di = zi[t] - mui[s, sp]
                c = metric[s] + (dr * dr + di * di) * inv2s2
                if c < best:
                    best = c
                    bi = s
            new[sp] = best + nlp[sp]
            bp[t, sp] = bi
        for sp in range(s_len):
            metric[sp] = new[sp]

    end = 0
    best = INF
    for s in range(s_len):
        if metric[s] < best:
            best = metric[s]
            end = s
    path = np.empty(t_len, np.int64)
    cur = end
    for t in range(t_len - 1, -1, -1):
        path[t] = cur
        cur = bp[t, cur]
    return path, best


@njit(cache=True)
def viterbi_pam_memory1(z, levels, alpha, nlp, inv2s2, known_first, prev_level):
    """One-dimensional (PAM) memory-1 Viterbi; used per quadrature when the
    QAM trellis factorizes. Same conventions as viterbi_memory1."""
    t_len = z.shape[0]
    s_len = levels.shape[0]
    bp = np.empty((t_len, s_len), np.int16)
    metric = np.empty(s_len, np.float64)
    new = np.empty(s_len, np.float64)

    if known_first:
        for sp in range(s_len):
            d = z[0] - (levels[sp] + alpha * prev_level)
            metric[sp] = d * d * inv2s2 + nlp[sp]
            bp[0, sp] = -1
    else:
        for sp in range(s_len):
            best = INF
            bi = 0
            for s in range(s_len):
                d = z[0] - (levels[sp] + alpha * levels[s])
                c = d * d * inv2s2
                if c < best:
                    best = c
                    bi = s
            metric[sp] = best + nlp[sp]
            bp[0, sp] = bi

    for t in range(1, t_len):
        for sp in range(s_len):
            mean0 = levels[sp]
            best = INF
            bi = 0
            for s in range(s_len):
                d = z[t] - (mean0 + alpha * levels[s])
                c = metric[s] + d * d * inv2s2
                if c < best:
                    best = c
                    bi = s
            new[sp] = best + nlp[sp]
            bp[t, sp] = bi
        for sp in range(s_len):
            metric[sp] = new[sp]

    end = 0
    best = INF
    for s in range(s_len):
        if metric[s] < best:
            best = metric[s]
            end = s
    path = np.empty(t_len, np.int64)
    cur = end
    for t in range(t_len - 1, -1, -1):
        path[t] = cur
        cur = bp[t, cur]
    return path, best
