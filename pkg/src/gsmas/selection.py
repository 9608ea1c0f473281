"""Antenna subset formation and Euclidean-distance subset selection (EDAS)."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gsm import effective_channels


@dataclass(frozen=True)
class SubsetPartition:
    """K disjoint groups of 2**spatial_bits combinations.

    masks: (K, S, n_tx) activation masks; indices: (K, S) positions in the
    lexicographic combination list; unused: count of left-over combinations.
    """

    masks: np.ndarray
    indices: np.ndarray
    unused: int

    @property
    def n_subsets(self):
        return self.masks.shape[0]

    @property
    def subset_size(self):
        return self.masks.shape[1]


def partition_subsets(cluster, spatial_bits):
    """Consecutive lexicographic blocks of ``2**spatial_bits`` combinations."""
    cluster = np.asarray(cluster)
    size = 1 << spatial_bits
    c = cluster.shape[0]
    if c < 2 * size:
        raise ConfigError(
            f"{c} combinations cannot form two subsets of {size}; antenna selection needs K >= 2"
        )
    k = c // size
    idx = np.arange(k * size).reshape(k, size)
    return SubsetPartition(masks=cluster[idx], indices=idx, unused=c - k * size)


def min_distance_sq(constellation):
    """min |s1 - s2|^2 over distinct constellation points."""
    d = constellation[:, None] - constellation[None, :]
    dist = d.real**2 + d.imag**2
    return float(dist[~np.eye(len(constellation), dtype=bool)].min())


def _combo_gain(g, metric):
    if metric == "as_printed":
        s = g.sum(axis=-1)
        return s.real**2 + s.imag**2
    if metric == "per_rx_norm":
        return (g.real**2 + g.imag**2).sum(axis=-1)
    raise ConfigError(f"unknown EDAS metric {metric!r}")


def edas_subset_metric(h, combo, constellation, metric="per_rx_norm"):
    """Minimum received distance of one combination.

    ``as_printed`` takes the modulus of the receive-antenna sum,
    |(s1 - s2) sum_i h_i I^C|^2; ``per_rx_norm`` sums the per-antenna
    squared moduli, sum_i |(s1 - s2) h_i I^C|^2.
    """
    g = effective_channels(np.asarray(h), np.asarray(combo)[None], normalize=False)[..., 0, :]
    return min_distance_sq(constellation) * _combo_gain(g, metric)


def subset_scores(h, partition, constellation, metric="per_rx_norm"):
    """Worst-member metric per subset; h (..., n_rx, n_tx) -> (..., K)."""
    g = effective_channels(np.asarray(h)[..., None, :, :], partition.masks, normalize=False)
    return min_distance_sq(constellation) * _combo_gain(g, metric).min(axis=-1)


def edas_select(h, partition, constellation, metric="per_rx_norm"):
    """Subset index maximising the subset score (lowest index on ties).

    Works on a single channel (returns int) or a batch (returns int array).
    """
    scores = subset_scores(h, partition, constellation, metric)
    best = scores.argmax(axis=-1)
    return int(best) if np.ndim(best) == 0 else best


def random_select(n_subsets, rng, size=None):
    """Uniform subset index baseline."""
    if isinstance(n_subsets, SubsetPartition):
        n_subsets = n_subsets.n_subsets
    out = rng.integers(0, n_subsets, size=size)
    return int(out) if size is None else out
