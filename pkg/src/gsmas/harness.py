"""Experiment orchestration: training, Monte Carlo BER sweeps and result files.

Every work unit draws from its own ``SeedSequence`` whose spawn key encodes
(stage, impairment index, SNR index, chunk index), so results do not depend
on how units are scheduled over workers.  Within a unit all selection
methods see the same channels, bits and noise.
"""

from __future__ import annotations

import enum
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import kernels
from .channels import ChannelProcess, crandn, episode_batch, noise_variance
from .errors import DatasetFormatError
from .features import (Standardizer, csi_views, episode_length, extract_features, generate_dataset,
                       link_tables, receiver_csi)
from .gsm import demap, effective_channels, map_bits
from .learners import TrainedModel, dt_train, mlp_train
from .selection import edas_select, random_select

RESULTS_FORMAT = "gsmas-results/1"
STAGE_SWEEP, STAGE_TRAIN, STAGE_TEST = 0, 1, 2
Z95 = 1.959963984540054


class MethodId(str, enum.Enum):
    EDAS_PERFECT = "edas_perfect"
    EDAS_IMPAIRED = "edas_impaired"
    DT = "dt"
    MLP = "mlp"
    RANDOM = "random_baseline"


ALL_METHODS = tuple(MethodId)
ML_METHODS = (MethodId.DT, MethodId.MLP)


@dataclass
class BerResult:
    method: MethodId
    snr_db: float
    alpha: float
    beta: float
    blocks: int
    bits_sent: int
    bit_errors: int
    subset_matches: int
    wall_time: float = 0.0

    @property
    def ber(self):
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0

    @property
    def subset_match_rate(self):
        return self.subset_matches / self.blocks if self.blocks else 0.0

    @property
    def ci_half_width(self):
        """95% normal-approximation half width on the BER."""
        p = self.ber
        return Z95 * math.sqrt(p * (1.0 - p) / self.bits_sent) if self.bits_sent else math.inf

    @property
    def under_sampled(self):
        return self.bit_errors < 100 or self.ci_half_width > 0.2 * self.ber

    def ci(self):
        return self.ber - self.ci_half_width, self.ber + self.ci_half_width


def significantly_above(a: BerResult, b: BerResult):
    """True when a's BER exceeds b's with disjoint 95% intervals."""
    return a.ci()[0] > b.ci()[1]


def receiver_csi_policy(config, h_now, rng):
    """Channel the detector uses (perfect unless ``receiver_beta`` is set)."""
    return receiver_csi(config, h_now, rng)


def _streams(seed_seq):
    chan, feat, data, rand = seed_seq.spawn(4)
    return tuple(np.random.default_rng(s) for s in (chan, feat, data, rand))


def simulate_blocks(config, history, methods, models, snr_db, seed_seq, tables=None):
    """Simulate one block per channel history for every method.

    history: (B, iota + delta + 1, n_rx, n_tx) true channels, current last.
    Returns (genie subsets (B,), {method: (bit_errors (B,), chosen subsets (B,))}).
    """
    partition, constellation = tables or link_tables(config)
    _, r_feat, r_data, r_rand = _streams(seed_seq)
    views = csi_views(config, history, r_feat)
    n = history.shape[0]
    genie = np.atleast_1d(edas_select(views.h_now, partition, constellation, config.edas_metric))

    choice = {}
    wanted = set(methods)
    if wanted & set(ML_METHODS):
        x = extract_features(config, views, partition, constellation, snr_db, r_feat)
    for m in methods:
        if m is MethodId.EDAS_PERFECT:
            choice[m] = genie
        elif m is MethodId.EDAS_IMPAIRED:
            choice[m] = np.atleast_1d(edas_select(views.h_tx, partition, constellation, config.edas_metric))
        elif m in ML_METHODS:
            choice[m] = np.asarray(models[m.value].predict(x), dtype=np.int64)
        elif m is MethodId.RANDOM:
            choice[m] = random_select(partition.n_subsets, r_rand, size=n)
        else:
            raise ValueError(f"unknown method {m!r}")

    bits = r_data.integers(0, 2, size=(n, config.bits_per_block), dtype=np.uint8)
    sym = map_bits(bits, config.spatial_bits, config.mod_order)
    sigma = 0.0 if np.isposinf(snr_db) else math.sqrt(noise_variance(snr_db))
    w = sigma * crandn(r_data, (n, config.n_rx))
    s = constellation[sym.qam_index]
    rows = np.arange(n)

    out = {}
    for m in methods:
        masks = partition.masks[choice[m]]                         # (B, S, n_tx)
        g_true = effective_channels(views.h_now, masks, config.normalize_tx)
        y = g_true[rows, sym.combo_index] * s[:, None] + w
        g_rx = g_true if views.h_rx is views.h_now else effective_channels(
            views.h_rx, masks, config.normalize_tx)
        combo, qam = kernels.ml_detect_batch(y, np.ascontiguousarray(g_rx), constellation)
        bits_hat = demap(type(sym)(combo, qam), config.spatial_bits, config.mod_order)
        errors = (bits_hat != bits).sum(axis=1)
        out[m] = (errors, choice[m])
    return genie, out


@dataclass
class BlockRecord:
    method: MethodId
    bit_errors: int
    bits: int
    subset: int
    genie_subset: int

    @property
    def subset_match(self):
        return self.subset == self.genie_subset


def run_block(process: ChannelProcess, method, models, config, seed_seq, snr_db):
    """Advance the channel process one block and simulate it for one method."""
    need = episode_length(config)
    process.depth = max(process.depth, need)
    process.advance()
    while len(process.history) < need:
        process.advance()
    history = np.stack(process.history[-need:])[None]
    genie, res = simulate_blocks(config, history, [MethodId(method)], models, snr_db, seed_seq)
    errors, chosen = res[MethodId(method)]
    return BlockRecord(MethodId(method), int(errors[0]), config.bits_per_block, int(chosen[0]), int(genie[0]))


# --- training -----------------------------------------------------------------

@dataclass
class ClassifierReport:
    method: str
    accuracy: float
    chance: float
    precision: list
    recall: list
    confusion: list
    n_train: int
    n_test: int
    class_histogram: list = field(default_factory=list)


def classifier_report(method, predicted, labels, n_classes, n_train):
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (labels, predicted), 1)
    tp = np.diag(conf).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(conf.sum(0) > 0, tp / conf.sum(0), 0.0)
        recall = np.where(conf.sum(1) > 0, tp / conf.sum(1), 0.0)
    return ClassifierReport(
        method=method,
        accuracy=float(tp.sum() / max(len(labels), 1)),
        chance=1.0 / n_classes,
        precision=precision.tolist(),
        recall=recall.tolist(),
        confusion=conf.tolist(),
        n_train=n_train,
        n_test=len(labels),
        class_histogram=np.bincount(labels, minlength=n_classes).tolist(),
    )


def split_sizes(config):
    n_test = max(1, int(round(config.n_instances * config.test_fraction)))
    n_train = config.n_instances - n_test
    if n_train < 1:
        raise cfgmod.ConfigError("training split is empty")
    assert n_train + n_test == config.n_instances
    return n_train, n_test


def _seq(config, stage, *key):
    return np.random.SeedSequence(config.seed, spawn_key=(stage, *key))


def train_datasets(config, snr_db, point=(0, 0)):
    """Disjointly seeded (train, test) datasets for one impairment/SNR point."""
    n_train, n_test = split_sizes(config)
    train = generate_dataset(config, n_train, np.random.default_rng(_seq(config, STAGE_TRAIN, *point)), snr_db)
    test = generate_dataset(config, n_test, np.random.default_rng(_seq(config, STAGE_TEST, *point)), snr_db)
    return train, test


def fit_models(config, train, n_classes, seed_key=(0, 0)):
    """Fit both learners on a (raw-feature) training dataset."""
    lp = config.learner
    scaler = Standardizer.fit(train.x) if lp.standardize else None
    z = scaler.transform(train.x) if scaler is not None else train.x
    t0 = time.perf_counter()
    tree = dt_train(z, train.labels, n_classes, max_depth=lp.dt_max_depth)
    t_dt = time.perf_counter() - t0
    mlp_seed = int(_seq(config, STAGE_TRAIN, *seed_key, 7).generate_state(1)[0])
    t0 = time.perf_counter()
    net = mlp_train(z, train.labels, n_classes, hidden=lp.hidden, learning_rate=lp.mlp_learning_rate,
                    batch_size=lp.mlp_batch_size, epochs=lp.mlp_epochs, seed=mlp_seed)
    t_mlp = time.perf_counter() - t0
    meta = {"snr_db": train.metadata.get("snr_db"), "alpha": config.impairments.alpha,
            "beta": config.impairments.beta, "config_hash": cfgmod.config_hash(config),
            "standardized": scaler is not None, "n_train": train.n_instances}
    return {
        "dt": TrainedModel(tree, scaler, {**meta, "kind": "dt", "train_seconds": t_dt}),
        "mlp": TrainedModel(net, scaler, {**meta, "kind": "mlp", "activation": "relu",
                                          "train_seconds": t_mlp}),
    }


def train_pipeline(config, snr_db=10.0, point=(0, 0), label_mode="edas"):
    """Generate data, fit DT and MLP, and score them on the held-out split.

    ``label_mode="random"`` replaces every label by a uniform draw (negative
    control).  Returns (models, {name: ClassifierReport}).
    """
    k = config.n_subsets
    train, test = train_datasets(config, snr_db, point)
    if label_mode == "random":
        rng = np.random.default_rng(_seq(config, STAGE_TRAIN, *point, 99))
        train.labels = rng.integers(0, k, size=train.n_instances)
        test.labels = rng.integers(0, k, size=test.n_instances)
    elif label_mode != "edas":
        raise ValueError(f"unknown label_mode {label_mode!r}")
    models = fit_models(config, train, k, point)
    reports = {
        name: classifier_report(name, m.predict(test.x), test.labels, k, train.n_instances)
        for name, m in models.items()
    }
    return models, reports


def _train_unit(args):
    config, snr_db, point = args
    models, _ = train_pipeline(config, snr_db, point)
    return models


def point_configs(config):
    """(impairment index, config with that impairment) for the sweep grid."""
    return [(i, config.with_impairments(alpha=a, beta=b)) for i, (a, b) in enumerate(config.impairment_grid())]


def model_key(alpha, beta, snr_db):
    return f"a{alpha:g}_b{beta:g}_snr{snr_db:g}"


def train_all(config, workers=1):
    """Models for every (impairment, SNR) grid point, keyed by :func:`model_key`."""
    jobs, keys = [], []
    for ai, pc in point_configs(config):
        for si, snr in enumerate(config.snr_grid_db):
            jobs.append((pc, snr, (ai, si)))
            keys.append(model_key(pc.impairments.alpha, pc.impairments.beta, snr))
    results = _map(_train_unit, jobs, workers)
    return dict(zip(keys, results))


# --- sweeps -------------------------------------------------------------------

def _run_unit(args):
    config, methods, models, snr_db, key, n = args
    t0 = time.perf_counter()
    rng_chan = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=key + (0,)))
    history = episode_batch(config.n_rx, config.n_tx, config.impairments, episode_length(config), rng_chan, n)
    genie, res = simulate_blocks(config, history, methods, models, snr_db,
                                 np.random.SeedSequence(config.seed, spawn_key=key + (1,)))
    sums = {m.value: (int(e.sum()), int((chosen == genie).sum())) for m, (e, chosen) in res.items()}
    return sums, time.perf_counter() - t0


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_sweep(config, methods=ALL_METHODS, n_blocks=None, models=None, workers=1):
    """BER for every method x SNR x impairment point, in grid order.

    ``models`` maps :func:`model_key` strings to {"dt": ..., "mlp": ...};
    missing models for requested ML methods are trained on the fly.
    """
    methods = [MethodId(m) for m in methods]
    n_blocks = n_blocks or config.n_blocks
    if any(m in ML_METHODS for m in methods) and models is None:
        models = train_all(config, workers)
    jobs, index = [], []
    for ai, pc in point_configs(config):
        for si, snr in enumerate(config.snr_grid_db):
            pm = models.get(model_key(pc.impairments.alpha, pc.impairments.beta, snr)) if models else None
            if any(m in ML_METHODS for m in methods) and pm is None:
                raise cfgmod.ConfigError(f"no trained models for point {model_key(pc.impairments.alpha, pc.impairments.beta, snr)}")
            for ci, lo in enumerate(range(0, n_blocks, config.chunk_blocks)):
                n = min(config.chunk_blocks, n_blocks - lo)
                jobs.append((pc, methods, pm, snr, (STAGE_SWEEP, ai, si, ci), n))
                index.append((ai, si))
    outputs = _map(_run_unit, jobs, workers)

    grid = {}
    for (ai, si), (sums, wall), job in zip(index, outputs, jobs):
        acc = grid.setdefault((ai, si), {"blocks": 0, "wall": 0.0, "cfg": job[0], "snr": job[3],
                                          "sums": {m.value: [0, 0] for m in methods}})
        acc["blocks"] += job[5]
        acc["wall"] += wall
        for name, (e, ok) in sums.items():
            acc["sums"][name][0] += e
            acc["sums"][name][1] += ok
    results = []
    for (ai, si) in sorted(grid):
        acc = grid[(ai, si)]
        imp = acc["cfg"].impairments
        for m in methods:
            e, ok = acc["sums"][m.value]
            results.append(BerResult(
                method=m, snr_db=acc["snr"], alpha=imp.alpha, beta=imp.beta,
                blocks=acc["blocks"], bits_sent=acc["blocks"] * config.bits_per_block,
                bit_errors=e, subset_matches=ok, wall_time=acc["wall"] / len(methods),
            ))
    return results


# --- result files -------------------------------------------------------------

RESULT_COLUMNS = ("method", "snr_db", "alpha", "beta", "blocks", "bits_sent", "bit_errors", "ber",
                  "ci_half_width", "under_sampled", "subset_matches", "subset_match_rate")


def _result_row(r):
    return ",".join([
        r.method.value, repr(float(r.snr_db)), repr(float(r.alpha)), repr(float(r.beta)),
        str(r.blocks), str(r.bits_sent), str(r.bit_errors), repr(r.ber), repr(r.ci_half_width),
        "1" if r.under_sampled else "0", str(r.subset_matches), repr(r.subset_match_rate),
    ])


def write_results(path, results, config):
    lines = [f"# format = {RESULTS_FORMAT}"]
    lines += [f"# config.{ln}" for ln in cfgmod.dumps(config).splitlines()]
    lines.append(",".join(RESULT_COLUMNS))
    lines += [_result_row(r) for r in results]
    Path(path).write_text("\n".join(lines) + "\n")


def read_results(path):
    """(config, results) from a results file; wall times are not stored there."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != f"# format = {RESULTS_FORMAT}":
        raise DatasetFormatError("not a results file", line=1)
    cfg_lines = [ln[len("# config."):] for ln in lines if ln.startswith("# config.")]
    config = cfgmod.loads("\n".join(cfg_lines))
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body or body[0] != ",".join(RESULT_COLUMNS):
        raise DatasetFormatError("missing column header", line=len(lines) - len(body) + 1)
    results = []
    for i, ln in enumerate(body[1:], len(lines) - len(body) + 2):
        f = ln.split(",")
        if len(f) != len(RESULT_COLUMNS):
            raise DatasetFormatError(f"expected {len(RESULT_COLUMNS)} fields", line=i)
        try:
            results.append(BerResult(
                method=MethodId(f[0]), snr_db=float(f[1]), alpha=float(f[2]), beta=float(f[3]),
                blocks=int(f[4]), bits_sent=int(f[5]), bit_errors=int(f[6]), subset_matches=int(f[10]),
            ))
        except ValueError as exc:
            raise DatasetFormatError(str(exc), line=i) from None
    return config, results


def figure_tables(results):
    """{(alpha, beta): text table of SNR vs BER per method}."""
    tables = {}
    points = sorted({(r.alpha, r.beta) for r in results})
    for a, b in points:
        rows = [r for r in results if (r.alpha, r.beta) == (a, b)]
        methods = list(dict.fromkeys(r.method for r in rows))
        snrs = sorted({r.snr_db for r in rows})
        head = "# snr_db " + " ".join(f"ber_{m.value} ci_{m.value}" for m in methods)
        lines = [f"# alpha = {a!r}", f"# beta = {b!r}", head]
        lookup = {(r.method, r.snr_db): r for r in rows}
        for s in snrs:
            cells = [repr(s)]
            for m in methods:
                r = lookup.get((m, s))
                cells += [repr(r.ber), repr(r.ci_half_width)] if r else ["nan", "nan"]
            lines.append(" ".join(cells))
        tables[(a, b)] = "\n".join(lines) + "\n"
    return tables


def write_figures(out_dir, results):
    paths = []
    for (a, b), text in figure_tables(results).items():
        p = Path(out_dir) / f"fig_ber_alpha{a:g}_beta{b:g}.dat"
        p.write_text(text)
        paths.append(p)
    return paths


def write_manifest(path, config, results, extra=None):
    try:
        import numba
        numba_version = numba.__version__
    except ImportError:
        numba_version = "absent"
    vals = {
        "seed": config.seed,
        "config_hash": cfgmod.config_hash(config),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba_version,
        "kernel_backend": kernels.BACKEND,
        "points": len({(r.alpha, r.beta, r.snr_db) for r in results}),
        "total_wall_seconds": repr(sum(r.wall_time for r in results)),
    }
    vals.update(extra or {})
    lines = [f"{k} = {v}" for k, v in vals.items()]
    for r in results:
        lines.append(f"wall_seconds.{r.method.value}.{model_key(r.alpha, r.beta, r.snr_db)} = {r.wall_time!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def emit_results(results, out_dir, config, extra_manifest=None):
    """Write results.csv, manifest.txt and per-impairment figure tables into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_results(out / "results.csv", results, config)
        write_manifest(out / "manifest.txt", config, results, extra_manifest)
        figs = write_figures(out, results)
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return [out / "results.csv", out / "manifest.txt", *figs]
