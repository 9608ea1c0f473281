"""Vectorised numpy implementations of the hot kernels (reference/fallback path)."""

import numpy as np

GAIN_TIE_TOL = 1e-12


def ml_detect_batch(y, g, constellation):
    """Argmin of ||y - s g_c||^2 over combinations c and points s, per row.

    y: (B, R) received vectors; g: (B, S, R) effective channels;
    constellation: (M,).  Returns (combo, qam) int64 arrays; the flat
    hypothesis order is combo-major so argmin's first hit is the lowest pair.
    """
    hyp = g[:, :, None, :] * constellation[None, None, :, None]
    d = hyp - y[:, None, None, :]
    metric = (d.real**2 + d.imag**2).sum(axis=-1)
    flat = metric.reshape(metric.shape[0], -1).argmin(axis=1)
    m = constellation.shape[0]
    return flat // m, flat % m


def evm_batch(g_true, g_rx, symbols, noise, sigma):
    """Mean squared pilot error after single-stream equalisation.

    g_true, g_rx: (B, K, S, R) true and receiver-side effective channels.
    symbols, noise: (B, K, P) pilot points and CN(0,1) draws; pilot p uses
    combination p % S.  The projected noise of a matched equaliser on an
    isotropic noise vector is a scalar CN(0, sigma^2/||g_rx||^2), which is
    what ``noise`` feeds.  Returns (B, K) mean error power.
    """
    s = g_true.shape[2]
    p = symbols.shape[2]
    energy = (g_rx.real**2 + g_rx.imag**2).sum(axis=-1)
    cross = (np.conj(g_rx) * g_true).sum(axis=-1)
    ok = energy > 0
    safe = np.where(ok, energy, 1.0)
    gain = np.where(ok, cross / safe, 0.0)
    scale = np.where(ok, sigma / np.sqrt(safe), 0.0)
    idx = np.arange(p) % s
    err = symbols * (gain[:, :, idx] - 1.0) + noise * scale[:, :, idx]
    return (err.real**2 + err.imag**2).mean(axis=-1)


def tree_predict_batch(x, feature, threshold, left, right, leaf_class):
    node = np.zeros(x.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        n = node[rows]
        go_left = x[rows, feature[n]] <= threshold[n]
        node[rows] = np.where(go_left, left[n], right[n])
        active[rows] = feature[node[rows]] >= 0
    return leaf_class[node]


def _entropy_rows(counts, totals):
    p = counts / np.maximum(totals, 1)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -t.sum(axis=-1)


def best_split(x, y, n_classes):
    """Best binary threshold split by information gain.

    Candidates are midpoints between consecutive distinct sorted values.
    Returns (feature, threshold, gain); feature is -1 when no candidate
    exists.  Gains within GAIN_TIE_TOL of the best count as ties, resolved
    to the lowest feature and then the lowest threshold.
    """
    n, q = x.shape
    if n < 2:
        return -1, 0.0, 0.0
    parent = np.bincount(y, minlength=n_classes).astype(float)
    h_parent = _entropy_rows(parent[None], np.array([n]))[0]
    sizes = np.arange(1, n, dtype=float)
    block = max(1, int(2_000_000 // max(n * n_classes, 1)))
    all_gain = np.full((q, n - 1), -np.inf)
    mids = np.empty((q, n - 1))
    classes = np.arange(n_classes)
    for q0 in range(0, q, block):
        xs_block = x[:, q0:q0 + block]
        order = np.argsort(xs_block, axis=0, kind="stable")
        xs = np.take_along_axis(xs_block, order, axis=0)
        ys = y[order]
        left = (ys[..., None] == classes).cumsum(axis=0)[:-1].astype(float)
        right = parent - left
        hl = _entropy_rows(left, sizes[:, None])
        hr = _entropy_rows(right, (n - sizes)[:, None])
        gain = h_parent - (sizes[:, None] / n) * hl - ((n - sizes)[:, None] / n) * hr
        valid = xs[1:] > xs[:-1]
        all_gain[q0:q0 + block] = np.where(valid, gain, -np.inf).T
        mids[q0:q0 + block] = (0.5 * (xs[1:] + xs[:-1])).T
    best = all_gain.max()
    if not np.isfinite(best):
        return -1, 0.0, 0.0
    flat = np.flatnonzero(all_gain.ravel() >= best - GAIN_TIE_TOL)[0]
    f, i = divmod(int(flat), n - 1)
    return f, float(mids[f, i]), float(all_gain[f, i])
