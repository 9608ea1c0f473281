"""numba-compiled kernels; same contracts as the numpy versions in ``_numpy``."""

import math

import numpy as np
from numba import njit

GAIN_TIE_TOL = 1e-12


@njit(cache=True)
def ml_detect_batch(y, g, constellation):
    b_count, s_count, r_count = g.shape
    m_count = constellation.shape[0]
    combo = np.zeros(b_count, dtype=np.int64)
    qam = np.zeros(b_count, dtype=np.int64)
    for b in range(b_count):
        best = np.inf
        for s in range(s_count):
            for m in range(m_count):
                sym = constellation[m]
                acc = 0.0
                for r in range(r_count):
                    d = y[b, r] - sym * g[b, s, r]
                    acc += d.real * d.real + d.imag * d.imag
                if acc < best:
                    best = acc
                    combo[b] = s
                    qam[b] = m
    return combo, qam


@njit(cache=True)
def evm_batch(g_true, g_rx, symbols, noise, sigma):
    b_count, k_count, s_count, r_count = g_true.shape
    p_count = symbols.shape[2]
    out = np.zeros((b_count, k_count))
    gain = np.empty(s_count, dtype=np.complex128)
    scale = np.empty(s_count)
    for b in range(b_count):
        for k in range(k_count):
            for s in range(s_count):
                energy = 0.0
                cross = 0j
                for r in range(r_count):
                    a = g_rx[b, k, s, r]
                    energy += a.real * a.real + a.imag * a.imag
                    cross += a.conjugate() * g_true[b, k, s, r]
                if energy > 0:
                    gain[s] = cross / energy
                    scale[s] = sigma / math.sqrt(energy)
                else:
                    gain[s] = 0j
                    scale[s] = 0.0
            acc = 0.0
            for p in range(p_count):
                s = p % s_count
                e = symbols[b, k, p] * (gain[s] - 1.0) + noise[b, k, p] * scale[s]
                acc += e.real * e.real + e.imag * e.imag
            out[b, k] = acc / p_count
    return out


@njit(cache=True)
def tree_predict_batch(x, feature, threshold, left, right, leaf_class):
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_class[node]
    return out


@njit(cache=True)
def _entropy(counts, total):
    if total <= 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


@njit(cache=True)
def _best_split(x, y, n_classes):
    n, q = x.shape
    parent = np.zeros(n_classes)
    for i in range(n):
        parent[y[i]] += 1.0
    h_parent = _entropy(parent, n)
    gains = np.full((q, n - 1), -np.inf)
    mids = np.zeros((q, n - 1))
    left = np.zeros(n_classes)
    right = np.zeros(n_classes)
    for f in range(q):
        col = x[:, f]
        order = np.argsort(col, kind="mergesort")
        left[:] = 0.0
        right[:] = parent
        for i in range(n - 1):
            c = y[order[i]]
            left[c] += 1.0
            right[c] -= 1.0
            lo = col[order[i]]
            hi = col[order[i + 1]]
            if hi > lo:
                nl = i + 1.0
                nr = n - nl
                gains[f, i] = (h_parent - (nl / n) * _entropy(left, nl)
                               - (nr / n) * _entropy(right, nr))
                mids[f, i] = 0.5 * (hi + lo)
    best = -np.inf
    for f in range(q):
        for i in range(n - 1):
            if gains[f, i] > best:
                best = gains[f, i]
    if best == -np.inf:
        return -1, 0.0, 0.0
    for f in range(q):
        for i in range(n - 1):
            if gains[f, i] >= best - GAIN_TIE_TOL:
                return f, mids[f, i], gains[f, i]
    return -1, 0.0, 0.0


def best_split(x, y, n_classes):
    if x.shape[0] < 2:
        return -1, 0.0, 0.0
    f, t, g = _best_split(np.ascontiguousarray(x, dtype=np.float64),
                          np.ascontiguousarray(y, dtype=np.int64), int(n_classes))
    return int(f), float(t), float(g)
