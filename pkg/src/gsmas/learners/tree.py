"""Entropy-driven binary decision tree, grown greedily by information gain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConfigError


def entropy(class_counts):
    """Shannon entropy in bits of a class histogram (0 log 0 = 0)."""
    counts = np.asarray(class_counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("class counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty node is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def information_gain(parent_counts, child_count_lists):
    """Parent entropy minus the size-weighted entropy of the children."""
    parent = np.asarray(parent_counts, dtype=float)
    children = [np.asarray(c, dtype=float) for c in child_count_lists]
    if any(c.shape != parent.shape for c in children) or not np.allclose(sum(children), parent):
        raise ValueError("children do not partition the parent counts")
    n = parent.sum()
    weighted = sum(c.sum() / n * entropy(c) for c in children if c.sum() > 0)
    return entropy(parent) - weighted


@dataclass
class DecisionTree:
    """Flat-array tree.  Leaves have ``feature == -1``; ``left``/``right`` index children."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray
    counts: np.ndarray  # (n_nodes, K) training class histogram per node
    gain: np.ndarray    # information gain of each internal node's split; 0 at leaves
    depth: np.ndarray
    n_features: int
    max_depth: int

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_classes(self):
        return self.counts.shape[1]

    @property
    def tree_depth(self):
        return int(self.depth.max())


def dt_train(x, y, n_classes, max_depth=17):
    """Grow a tree; split candidates are midpoints of consecutive distinct values.

    Stops at pure nodes, at ``max_depth``, when fewer than two samples remain
    or when no threshold separates the node.  An impure node whose best split
    has zero gain is still split (XOR-like patterns need such a first cut).
    Leaves predict the majority class, lowest index on ties.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigError("decision tree needs a nonempty (N, Q) feature matrix")
    if y.shape != (x.shape[0],):
        raise ConfigError("labels must have one entry per instance")
    nodes = []  # [feature, threshold, left, right, leaf_class, counts, gain, depth]

    def new_node(idx, depth):
        counts = np.bincount(y[idx], minlength=n_classes)
        nodes.append([-1, 0.0, -1, -1, int(np.argmax(counts)), counts, 0.0, depth])
        return len(nodes) - 1

    stack = [(new_node(np.arange(len(y)), 0), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        rec = nodes[node]
        depth, counts = rec[7], rec[5]
        if depth >= max_depth or len(idx) < 2 or np.count_nonzero(counts) <= 1:
            continue
        f, t, g = kernels.best_split(x[idx], y[idx], n_classes)
        if f < 0:
            continue
        # information gain is nonnegative; anything below zero is rounding
        g = max(g, 0.0)
        go_left = x[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        rec[0], rec[1], rec[6] = f, t, g
        rec[2] = new_node(li, depth + 1)
        rec[3] = new_node(ri, depth + 1)
        # right pushed first so the left child is expanded first (stable numbering)
        stack.append((rec[3], ri))
        stack.append((rec[2], li))

    cols = list(zip(*nodes))
    return DecisionTree(
        feature=np.array(cols[0], dtype=np.int64),
        threshold=np.array(cols[1], dtype=float),
        left=np.array(cols[2], dtype=np.int64),
        right=np.array(cols[3], dtype=np.int64),
        leaf_class=np.array(cols[4], dtype=np.int64),
        counts=np.array(cols[5], dtype=np.int64).reshape(len(nodes), n_classes),
        gain=np.array(cols[6], dtype=float),
        depth=np.array(cols[7], dtype=np.int64),
        n_features=x.shape[1],
        max_depth=max_depth,
    )


def dt_predict(tree, x):
    """Class index for one instance (1-D) or each row of a batch, going left on <=."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {xb.shape[1]}")
    out = kernels.tree_predict_batch(
        np.ascontiguousarray(xb), tree.feature, tree.threshold, tree.left, tree.right, tree.leaf_class
    )
    return int(out[0]) if single else out


def tree_to_dict(tree):
    return {
        "kind": "decision_tree",
        "n_features": tree.n_features,
        "n_classes": tree.n_classes,
        "max_depth": tree.max_depth,
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "leaf_class": tree.leaf_class.tolist(),
        "counts": tree.counts.tolist(),
        "gain": tree.gain.tolist(),
        "depth": tree.depth.tolist(),
    }


def tree_from_dict(d):
    k = d["n_classes"]
    return DecisionTree(
        feature=np.array(d["feature"], dtype=np.int64),
        threshold=np.array(d["threshold"], dtype=float),
        left=np.array(d["left"], dtype=np.int64),
        right=np.array(d["right"], dtype=np.int64),
        leaf_class=np.array(d["leaf_class"], dtype=np.int64),
        counts=np.array(d["counts"], dtype=np.int64).reshape(-1, k),
        gain=np.array(d["gain"], dtype=float),
        depth=np.array(d["depth"], dtype=np.int64),
        n_features=d["n_features"],
        max_depth=d["max_depth"],
    )
