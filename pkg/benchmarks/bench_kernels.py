"""Time the numba and numpy kernel backends on desk-scale workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--blocks 5000]

Each kernel is run once untimed (numba compilation, caches), then the best
of ``--repeat`` runs is reported.  Outputs are cross-checked between the
backends before timing.
"""

import argparse
import time

import numpy as np

from gsmas import kernels
from gsmas.channels import crandn
from gsmas.config import SystemConfig
from gsmas.features import link_tables
from gsmas.gsm import effective_channels
from gsmas.learners import dt_train


def workloads(blocks, rng):
    cfg = SystemConfig()
    partition, const = link_tables(cfg)
    h = crandn(rng, (blocks, cfg.n_rx, cfg.n_tx))
    masks = partition.masks[rng.integers(0, partition.n_subsets, blocks)]
    g = np.ascontiguousarray(effective_channels(h, masks))
    y = crandn(rng, (blocks, cfg.n_rx))

    n_evm = max(1, blocks // 10)
    g_all = np.ascontiguousarray(effective_channels(h[:n_evm, None], partition.masks))
    g_rx = g_all + 0.1 * crandn(rng, g_all.shape)
    sym = const[rng.integers(0, len(const), (n_evm, partition.n_subsets, cfg.pilot_count))]
    noise = crandn(rng, sym.shape)

    x_tree = rng.normal(size=(4000, cfg.n_features))
    y_tree = rng.integers(0, partition.n_subsets, 4000)
    tree = dt_train(x_tree, y_tree, partition.n_subsets, max_depth=12)
    x_pred = rng.normal(size=(blocks * 4, cfg.n_features))
    tree_args = (x_pred, tree.feature, tree.threshold, tree.left, tree.right, tree.leaf_class)

    return {
        "ml_detect_batch": (y, g, const),
        "evm_batch": (g_all, g_rx, sym, noise, 0.3),
        "tree_predict_batch": tree_args,
        "best_split": (x_tree[:2000], y_tree[:2000], partition.n_subsets),
    }


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--blocks", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    nb, npk = kernels.numba_backend(), kernels.numpy_backend
    work = workloads(args.blocks, np.random.default_rng(args.seed))
    print(f"{'kernel':20s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speed-up':>9s}  agree")
    for name, kargs in work.items():
        f_np, f_nb = getattr(npk, name), getattr(nb, name)
        same = agree(f_np(*kargs), f_nb(*kargs))
        t_np = best_of(f_np, kargs, args.repeat)
        t_nb = best_of(f_nb, kargs, args.repeat)
        print(f"{name:20s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:8.1f}x  {same}")


if __name__ == "__main__":
    main()
