"""Experiment configuration: dimensioning, impairments, learner and run settings.

Configurations are frozen dataclasses.  On disk they are flat ``key = value``
text files (``#`` starts a comment); the same encoding is used for the
metadata headers of dataset and results files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError

SUPPORTED_MOD_ORDERS = (4, 16, 64)
EDAS_METRICS = ("per_rx_norm", "as_printed")
MAX_COMBINATIONS = 1 << 20


@dataclass(frozen=True)
class ImpairmentParams:
    """CSI impairment coefficients.

    alpha is the time-correlation coefficient between the channel now and the
    channel ``iota`` blocks earlier; beta weights the estimation error.
    rician_k is the line-of-sight to scattered power ratio (0 is Rayleigh).
    """

    alpha: float = 1.0
    beta: float = 0.0
    iota: int = 1
    rician_k: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if int(self.iota) != self.iota or self.iota < 0:
            raise ConfigError(f"iota must be a non-negative integer, got {self.iota}")
        if not (self.rician_k >= 0.0):
            raise ConfigError(f"rician_k must be >= 0, got {self.rician_k}")


@dataclass(frozen=True)
class LearnerParams:
    dt_max_depth: int = 17
    mlp_hidden_layers: int = 15
    mlp_hidden_units: int = 10
    mlp_learning_rate: float = 1e-3
    mlp_batch_size: int = 64
    mlp_epochs: int = 200
    standardize: bool = True

    def __post_init__(self):
        if self.dt_max_depth < 0:
            raise ConfigError("dt_max_depth must be >= 0")
        if self.mlp_hidden_layers < 0 or self.mlp_hidden_units < 1:
            raise ConfigError("MLP needs >= 0 hidden layers of >= 1 unit")
        if self.mlp_learning_rate < 0:
            raise ConfigError("mlp_learning_rate must be >= 0")
        if self.mlp_batch_size < 1 or self.mlp_epochs < 0:
            raise ConfigError("mlp_batch_size must be >= 1 and mlp_epochs >= 0")

    @property
    def hidden(self):
        return (self.mlp_hidden_units,) * self.mlp_hidden_layers


@dataclass(frozen=True)
class SystemConfig:
    """Everything that defines one experiment.

    ``delta`` is the sample delay of the channel-difference feature; ``None``
    means "same as iota".  ``receiver_beta`` degrades the CSI used by the
    detector; ``None`` gives the receiver the perfect current channel.
    ``alpha_grid``/``beta_grid`` span the impairment axis of a sweep; when
    unset the single pair in ``impairments`` is used.
    """

    n_tx: int = 8
    n_active: int = 2
    n_rx: int = 4
    mod_order: int = 4
    spatial_bits: int = 2
    impairments: ImpairmentParams = field(default_factory=ImpairmentParams)
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    seed: int = 12345
    delta: int | None = None
    pilot_count: int = 256
    edas_metric: str = "per_rx_norm"
    normalize_tx: bool = True
    receiver_beta: float | None = None
    alpha_grid: tuple | None = None
    beta_grid: tuple | None = None
    n_blocks: int = 100_000
    chunk_blocks: int = 5_000
    n_instances: int = 20_000
    test_fraction: float = 0.2
    learner: LearnerParams = field(default_factory=LearnerParams)

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        for name in ("alpha_grid", "beta_grid"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(s) for s in v))
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("n_tx and n_rx must be >= 1")
        if not (1 <= self.n_active <= self.n_tx):
            raise ConfigError(f"need 1 <= n_active <= n_tx, got {self.n_active}, {self.n_tx}")
        if self.mod_order not in SUPPORTED_MOD_ORDERS:
            raise ConfigError(f"mod_order must be one of {SUPPORTED_MOD_ORDERS}")
        if self.spatial_bits < 0:
            raise ConfigError("spatial_bits must be >= 0")
        if self.n_combinations > MAX_COMBINATIONS:
            raise ConfigError(f"C = {self.n_combinations} combinations is too many")
        if self.n_subsets < 2:
            raise ConfigError(
                f"C = {self.n_combinations} with {self.spatial_bits} spatial bits gives "
                f"K = {self.n_subsets} subsets; antenna selection needs K >= 2"
            )
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.pilot_count < 1:
            raise ConfigError("pilot_count must be >= 1")
        if self.edas_metric not in EDAS_METRICS:
            raise ConfigError(f"edas_metric must be one of {EDAS_METRICS}")
        if self.receiver_beta is not None and not (0.0 <= self.receiver_beta <= 1.0):
            raise ConfigError("receiver_beta must lie in [0, 1]")
        for name in ("alpha_grid", "beta_grid"):
            for v in getattr(self, name) or ():
                if not (0.0 <= v <= 1.0):
                    raise ConfigError(f"{name} entries must lie in [0, 1]")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must not be empty")
        if any(math.isnan(s) for s in self.snr_grid_db):
            raise ConfigError("snr_grid_db contains NaN")
        if self.n_blocks < 1 or self.chunk_blocks < 1 or self.n_instances < 1:
            raise ConfigError("n_blocks, chunk_blocks and n_instances must be >= 1")
        if not (0.0 < self.test_fraction < 1.0):
            raise ConfigError("test_fraction must lie in (0, 1)")

    # derived quantities
    @property
    def n_combinations(self):
        return math.comb(self.n_tx, self.n_active)

    @property
    def subset_size(self):
        return 1 << self.spatial_bits

    @property
    def n_subsets(self):
        return self.n_combinations // self.subset_size

    @property
    def bits_per_symbol(self):
        return int(math.log2(self.mod_order))

    @property
    def bits_per_block(self):
        return self.spatial_bits + self.bits_per_symbol

    @property
    def n_features(self):
        return 2 * self.n_subsets + 2 * self.n_tx * self.n_rx

    @property
    def feature_delay(self):
        return self.impairments.iota if self.delta is None else self.delta

    def impairment_grid(self):
        """(alpha, beta) pairs of the sweep, alpha-major."""
        alphas = self.alpha_grid or (self.impairments.alpha,)
        betas = self.beta_grid or (self.impairments.beta,)
        return [(a, b) for a in alphas for b in betas]

    def with_impairments(self, **kw):
        return replace(self, impairments=replace(self.impairments, **kw))


PRESETS = {
    "desk": {},
    "testbed12": {"n_tx": 12, "n_active": 2, "n_rx": 4, "mod_order": 4, "spatial_bits": 3},
    "testbed16": {"n_tx": 16, "n_active": 2, "n_rx": 4, "mod_order": 4, "spatial_bits": 3},
}


def preset(name, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return from_dict({**base, **overrides})


# --- flat key/value encoding -------------------------------------------------

_NESTED = {"impairments": ImpairmentParams, "learner": LearnerParams}


def _flat_fields():
    out = {}
    for f in fields(SystemConfig):
        if f.name in _NESTED:
            for g in fields(_NESTED[f.name]):
                out[g.name] = (f.name, g)
        else:
            out[f.name] = (None, f)
    return out


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    return str(v)


def _parse_value(raw, f):
    raw = raw.strip()
    kind = str(f.type)
    if raw.lower() == "none":
        if "None" in kind:
            return None
        raise ConfigError(f"{f.name} may not be none")
    try:
        if "tuple" in kind:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if "bool" in kind:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in kind and "float" not in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {f.name} = {raw!r}") from None
    return raw


def to_dict(cfg):
    """Flat mapping of every field, nested params inlined."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in _NESTED:
            out.update(dataclasses.asdict(v))
        else:
            out[f.name] = v
    return out


def from_dict(values):
    """Build a config from a flat mapping; values may be strings or typed."""
    flat = _flat_fields()
    top, nested = {}, {name: {} for name in _NESTED}
    values = dict(values)
    base_name = values.pop("preset", None)
    if base_name is not None:
        if base_name not in PRESETS:
            raise ConfigError(f"unknown preset {base_name!r}")
        values = {**PRESETS[base_name], **values}
    for key, v in values.items():
        if key not in flat:
            raise ConfigError(f"unknown config key {key!r}")
        parent, f = flat[key]
        if isinstance(v, str):
            v = _parse_value(v, f)
        (nested[parent] if parent else top)[key] = v
    for name, cls in _NESTED.items():
        top[name] = cls(**nested[name])
    return SystemConfig(**top)


def dumps(cfg):
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in to_dict(cfg).items())


def parse_kv_lines(lines, prefix=""):
    """Parse ``key = value`` lines (optionally behind ``prefix``) into a dict."""
    out = {}
    for lineno, line in enumerate(lines, 1):
        if prefix:
            if not line.startswith(prefix):
                continue
            line = line[len(prefix):]
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def loads(text):
    return from_dict(parse_kv_lines(text.splitlines()))


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def config_hash(cfg):
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()[:16]
