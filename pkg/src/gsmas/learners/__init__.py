"""Subset classifiers behind one train/predict contract."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DatasetFormatError
from ..features import Standardizer
from .mlp import (MlpModel, cross_entropy_loss, gradient_check, mlp_forward, mlp_from_dict,
                  mlp_predict, mlp_to_dict, mlp_train)
from .tree import DecisionTree, dt_predict, dt_train, entropy, information_gain, tree_from_dict, tree_to_dict

__all__ = [
    "DecisionTree", "MlpModel", "TrainedModel", "cross_entropy_loss", "dt_predict", "dt_train",
    "entropy", "gradient_check", "information_gain", "load_model", "mlp_forward", "mlp_predict",
    "mlp_train", "save_model",
]

MODEL_FORMAT = "gsmas-model/1"


@dataclass
class TrainedModel:
    """A fitted tree or MLP plus the feature standardisation it expects."""

    model: DecisionTree | MlpModel
    scaler: Standardizer | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self):
        return "dt" if isinstance(self.model, DecisionTree) else "mlp"

    def _prep(self, x):
        x = np.asarray(x, dtype=float)
        return self.scaler.transform(x) if self.scaler is not None else x

    def predict(self, x):
        z = self._prep(x)
        if self.kind == "dt":
            return dt_predict(self.model, z)
        return mlp_predict(self.model, z)


def save_model(path, trained):
    doc = {
        "format": MODEL_FORMAT,
        "header": trained.metadata,
        "scaler": None if trained.scaler is None else {
            "mean": trained.scaler.mean.tolist(), "std": trained.scaler.std.tolist()},
        "model": tree_to_dict(trained.model) if trained.kind == "dt" else mlp_to_dict(trained.model),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"cannot read model {path}: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise DatasetFormatError(f"{path} is not a {MODEL_FORMAT} file")
    m = doc["model"]
    model = tree_from_dict(m) if m["kind"] == "decision_tree" else mlp_from_dict(m)
    sc = doc.get("scaler")
    scaler = None if sc is None else Standardizer(np.array(sc["mean"]), np.array(sc["std"]))
    return TrainedModel(model=model, scaler=scaler, metadata=doc.get("header", {}))
