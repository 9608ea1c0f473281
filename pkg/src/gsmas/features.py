"""Feature extraction, EDAS labelling and dataset persistence.

An instance has ``Q = 2K + 2 N_t N_r`` features, in this order:
K subset gain features, K subset EVM features (percent), then the real and
imaginary parts of the transmitter-side channel difference, row-major.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import config as cfgmod
from . import kernels
from .channels import crandn, episode_batch, estimate_with_error, imperfect_correlated_estimate, noise_variance
from .errors import ConfigError, DatasetFormatError
from .gsm import effective_channels, enumerate_combinations, qam_constellation
from .selection import edas_select, partition_subsets

FORMAT_TAG = "gsmas-dataset/1"
_PILOT_BATCH = 512


class EmptyClassWarning(UserWarning):
    pass


def gain_features(h_est, partition):
    """Per subset: sum over member combinations, rx antennas and active tx antennas of |h|^2."""
    h_est = np.asarray(h_est)
    power = (h_est.real**2 + h_est.imag**2).sum(axis=-2)
    usage = partition.masks.sum(axis=1).astype(float)
    return power @ usage.T


def evm_features(h_true, h_rx, partition, constellation, pilot_count, snr_db, rng, normalize=True):
    """Pilot EVM per subset, in percent of the average symbol power.

    For every subset, ``pilot_count`` random constellation points cycle
    round-robin over the subset's combinations, pass through the true
    channel with noise, and are equalised with the receiver's channel
    knowledge ``h_rx``.  The error power is taken against the known pilot.
    """
    if pilot_count < 1:
        raise ConfigError("pilot_count must be >= 1")
    h_true = np.asarray(h_true)
    single = h_true.ndim == 2
    if single:
        h_true, h_rx = h_true[None], np.asarray(h_rx)[None]
    p_sym = float(np.mean(np.abs(constellation) ** 2))
    sigma = 0.0 if np.isposinf(snr_db) else float(np.sqrt(noise_variance(snr_db)))
    n, k = h_true.shape[0], partition.n_subsets
    out = np.empty((n, k))
    for lo in range(0, n, _PILOT_BATCH):
        hi = min(n, lo + _PILOT_BATCH)
        g_true = effective_channels(h_true[lo:hi, None], partition.masks, normalize)
        g_rx = effective_channels(np.asarray(h_rx)[lo:hi, None], partition.masks, normalize)
        sym = constellation[rng.integers(0, len(constellation), size=(hi - lo, k, pilot_count))]
        noise = crandn(rng, (hi - lo, k, pilot_count))
        out[lo:hi] = kernels.evm_batch(g_true, g_rx, sym, noise, sigma)
    out *= 100.0 / p_sym
    return out[0] if single else out


def diff_features(h_now, h_past):
    """Flattened H_now - H_past: real parts then imaginary parts."""
    h_now, h_past = np.asarray(h_now), np.asarray(h_past)
    if h_now.shape != h_past.shape:
        raise ConfigError(f"shape mismatch {h_now.shape} vs {h_past.shape}")
    d = (h_now - h_past).reshape(h_now.shape[:-2] + (-1,))
    return np.concatenate([d.real, d.imag], axis=-1)


class CsiViews(NamedTuple):
    """What each party knows about one block's channel."""

    h_now: np.ndarray      # true current channel
    h_tx: np.ndarray       # transmitter estimate of the current channel
    h_tx_prev: np.ndarray  # transmitter estimate delta blocks earlier
    h_rx: np.ndarray       # receiver channel used for detection and EVM


def receiver_csi(config, h_now, rng):
    """Perfect current channel by default; degraded by ``receiver_beta`` if set."""
    if config.receiver_beta is None:
        return h_now
    return estimate_with_error(h_now, config.receiver_beta, rng)


def episode_length(config):
    return config.impairments.iota + config.feature_delay + 1


def csi_views(config, history, rng):
    """Derive the CSI views from true channel histories (B, T+1, n_rx, n_tx).

    The last entry of each history is the current channel; the transmitter
    estimate is the imperfect time-correlated estimate built from the
    channel ``iota`` steps back.
    """
    params = config.impairments
    t = history.shape[1] - 1
    iota, delta = params.iota, config.feature_delay
    if t < iota + delta:
        raise ConfigError(f"history of {t + 1} channels is too short for iota={iota}, delta={delta}")
    h_now = history[:, t]
    h_tx = imperfect_correlated_estimate(history[:, t - iota], params, rng)
    if delta == 0:
        h_tx_prev = h_tx
    else:
        h_tx_prev = imperfect_correlated_estimate(history[:, t - delta - iota], params, rng)
    h_rx = receiver_csi(config, h_now, rng)
    return CsiViews(h_now, h_tx, h_tx_prev, h_rx)


def extract_features(config, views, partition, constellation, snr_db, rng):
    """Full (B, Q) feature matrix from CSI views."""
    gains = gain_features(views.h_tx, partition)
    evm = evm_features(views.h_now, views.h_rx, partition, constellation,
                       config.pilot_count, snr_db, rng, config.normalize_tx)
    diff = diff_features(views.h_tx, views.h_tx_prev)
    return np.concatenate([gains, evm, diff], axis=-1)


def link_tables(config):
    """(partition, constellation) for a config."""
    partition = partition_subsets(enumerate_combinations(config.n_tx, config.n_active), config.spatial_bits)
    return partition, qam_constellation(config.mod_order)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] < 2:
            raise ConfigError("standardisation needs at least two instances")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def inverse_transform(self, z):
        return np.asarray(z) * self.std + self.mean


@dataclass
class Dataset:
    x: np.ndarray
    labels: np.ndarray
    metadata: dict = field(default_factory=dict)
    scaler: Standardizer | None = None
    # true channels the labels were computed from; not persisted
    label_channels: np.ndarray | None = None

    @property
    def n_instances(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    def class_histogram(self, n_classes):
        return np.bincount(self.labels, minlength=n_classes)


def generate_dataset(config, n_instances, rng, snr_db=10.0):
    """Labelled instances: features from impaired CSI, labels from EDAS on the true channel."""
    if n_instances < 1:
        raise ConfigError("n_instances must be >= 1")
    partition, constellation = link_tables(config)
    history = episode_batch(config.n_rx, config.n_tx, config.impairments,
                            episode_length(config), rng, n_instances)
    views = csi_views(config, history, rng)
    x = extract_features(config, views, partition, constellation, snr_db, rng)
    labels = edas_select(views.h_now, partition, constellation, config.edas_metric)
    labels = np.atleast_1d(labels).astype(np.int64)
    hist = np.bincount(labels, minlength=config.n_subsets)
    meta = {
        "snr_db": float(snr_db),
        "pilot_count": config.pilot_count,
        "class_histogram": hist.tolist(),
    }
    empty = np.flatnonzero(hist == 0)
    if empty.size:
        meta["empty_classes"] = empty.tolist()
        warnings.warn(f"classes {empty.tolist()} have no instances", EmptyClassWarning, stacklevel=2)
    return Dataset(x=x, labels=labels, metadata={"config": config, **meta}, label_channels=views.h_now)


def standardize(dataset, scaler=None):
    """Return a standardised copy; fits the scaler on this dataset unless one is given."""
    scaler = scaler or Standardizer.fit(dataset.x)
    meta = dict(dataset.metadata, standardized=True)
    return Dataset(
        x=scaler.transform(dataset.x),
        labels=dataset.labels,
        metadata=meta,
        scaler=scaler,
        label_channels=dataset.label_channels,
    )


# --- persistence -------------------------------------------------------------

def _fmt_list(values):
    return ", ".join(repr(float(v)) for v in values)


def save_dataset(path, dataset):
    """Write a self-describing text dataset: ``#`` header lines, then CSV rows."""
    config = dataset.metadata["config"]
    k = config.n_subsets
    lines = [f"# format = {FORMAT_TAG}"]
    lines += [f"# config.{line}" for line in cfgmod.dumps(config).splitlines()]
    lines.append(f"# dataset.n_instances = {dataset.n_instances}")
    lines.append(f"# dataset.n_features = {dataset.n_features}")
    lines.append(f"# dataset.n_classes = {k}")
    for key in ("snr_db", "pilot_count", "seed"):
        if key in dataset.metadata:
            lines.append(f"# dataset.{key} = {dataset.metadata[key]!r}")
    lines.append(f"# dataset.standardized = {str(bool(dataset.metadata.get('standardized', False))).lower()}")
    if dataset.scaler is not None:
        lines.append(f"# dataset.mean = {_fmt_list(dataset.scaler.mean)}")
        lines.append(f"# dataset.std = {_fmt_list(dataset.scaler.std)}")
    header = ",".join([f"f{i}" for i in range(dataset.n_features)] + ["label"])
    lines.append(header)
    for row, label in zip(dataset.x, dataset.labels):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(label)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_float_list(raw, line):
    try:
        return np.array([float(v) for v in raw.split(",")])
    except ValueError:
        raise DatasetFormatError("bad number list", line=line) from None


def load_dataset(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError("empty dataset file", line=1)
    header, body_start = {}, None
    for i, line in enumerate(lines):
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise DatasetFormatError("header line without '='", line=i + 1)
            key, value = body.split("=", 1)
            header[key.strip()] = (value.strip(), i + 1)
        else:
            body_start = i
            break
    if header.get("format", ("",))[0] != FORMAT_TAG:
        raise DatasetFormatError(f"missing or unknown format tag (expected {FORMAT_TAG})", line=1)
    if body_start is None:
        raise DatasetFormatError("no column header line", line=len(lines) + 1)
    try:
        config = cfgmod.from_dict({k[len("config."):]: v for k, (v, _) in header.items() if k.startswith("config.")})
    except ConfigError as exc:
        raise DatasetFormatError(f"bad config metadata: {exc}", line=1) from exc

    def get(key, cast):
        if key not in header:
            raise DatasetFormatError(f"missing header key {key!r}", line=1)
        raw, ln = header[key]
        try:
            return cast(raw)
        except ValueError:
            raise DatasetFormatError(f"bad value for {key!r}", line=ln) from None

    n = get("dataset.n_instances", int)
    q = get("dataset.n_features", int)
    k = get("dataset.n_classes", int)
    if q != config.n_features:
        raise DatasetFormatError(f"declared Q = {q} but the config implies {config.n_features}",
                                 line=header["dataset.n_features"][1])
    if k != config.n_subsets:
        raise DatasetFormatError(f"declared K = {k} but the config implies {config.n_subsets}",
                                 line=header["dataset.n_classes"][1])
    columns = lines[body_start].split(",")
    if len(columns) != q + 1:
        raise DatasetFormatError(f"column header has {len(columns)} fields, expected {q + 1}",
                                 line=body_start + 1)
    rows = [ln for ln in lines[body_start + 1:] if ln.strip()]
    if len(rows) != n:
        raise DatasetFormatError(f"declared {n} instances but found {len(rows)} rows", line=body_start + 2)
    x = np.empty((n, q))
    labels = np.empty(n, dtype=np.int64)
    for r, raw in enumerate(rows):
        lineno = body_start + 2 + r
        parts = raw.split(",")
        if len(parts) != q + 1:
            raise DatasetFormatError(f"row has {len(parts)} fields, expected {q + 1}", line=lineno)
        for j, v in enumerate(parts[:-1]):
            try:
                x[r, j] = float(v)
            except ValueError:
                raise DatasetFormatError(f"not a number: {v!r}", line=lineno, field=columns[j]) from None
        try:
            labels[r] = int(parts[-1])
        except ValueError:
            raise DatasetFormatError(f"bad label {parts[-1]!r}", line=lineno, field="label") from None
        if not 0 <= labels[r] < k:
            raise DatasetFormatError(f"label {labels[r]} outside [0, {k})", line=lineno, field="label")
    if not np.all(np.isfinite(x)):
        raise DatasetFormatError("non-finite feature values")
    meta = {"config": config, "standardized": get("dataset.standardized", lambda s: s == "true")}
    for key, cast in (("snr_db", float), ("pilot_count", int), ("seed", int)):
        if f"dataset.{key}" in header:
            meta[key] = get(f"dataset.{key}", cast)
    scaler = None
    if "dataset.mean" in header:
        scaler = Standardizer(_parse_float_list(header["dataset.mean"][0], header["dataset.mean"][1]),
                              _parse_float_list(header["dataset.std"][0], header["dataset.std"][1]))
    return Dataset(x=x, labels=labels, metadata=meta, scaler=scaler)
