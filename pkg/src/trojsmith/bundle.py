"""Versioned JSON persistence for one trained model set.

A bundle holds everything needed to insert Trojans that mimic one cluster:
the trigger and payload net classifiers, the behavior mixture model, the
training-design feature scaler, the cluster's scaled behavior vectors, and
the optional feature mask for functional-only training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .features import FEATURE_NAMES, TROJAN_FEATURE_NAMES, Scaler
from .ml import ForestModel, MixtureModel

BUNDLE_VERSION = 1


@dataclass
class ModelBundle:
    trigger_model: ForestModel
    payload_model: ForestModel
    trojan_model: MixtureModel
    scaler: Scaler
    cluster_vectors: np.ndarray          # scaled behavior vectors of the cluster
    template_id: str = ""
    cluster_id: int = 0
    seed: int = 0
    feature_mask: list[int] | None = None  # indices the classifiers see
    meta: dict = field(default_factory=dict)

    def mask_vector(self, scaled: np.ndarray) -> np.ndarray:
        if self.feature_mask is None:
            return scaled
        return scaled[list(self.feature_mask)]

    def check_schema(self) -> None:
        width = len(self.feature_mask) if self.feature_mask else len(FEATURE_NAMES)
        if self.trigger_model.n_features != width or self.payload_model.n_features != width:
            raise DimensionMismatch("classifier width does not match feature schema")
        if self.trojan_model.means.shape[1] != len(TROJAN_FEATURE_NAMES):
            raise DimensionMismatch("behavior model must cover the 5 trigger-wire features")

    def to_json(self) -> dict:
        return {
            "version": BUNDLE_VERSION,
            "kind": "trojsmith-model-bundle",
            "feature_names": list(FEATURE_NAMES),
            "trojan_feature_names": list(TROJAN_FEATURE_NAMES),
            "template_id": self.template_id,
            "cluster_id": self.cluster_id,
            "seed": self.seed,
            "feature_mask": list(self.feature_mask) if self.feature_mask else None,
            "scaler": self.scaler.to_json(),
            "trigger_model": self.trigger_model.to_json(),
            "payload_model": self.payload_model.to_json(),
            "trojan_model": self.trojan_model.to_json(),
            "cluster_vectors": [[float(v) for v in row] for row in self.cluster_vectors],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ModelBundle":
        if d.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {d.get('version')!r}")
        return cls(
            trigger_model=ForestModel.from_json(d["trigger_model"]),
            payload_model=ForestModel.from_json(d["payload_model"]),
            trojan_model=MixtureModel.from_json(d["trojan_model"]),
            scaler=Scaler.from_json(d["scaler"]),
            cluster_vectors=np.array(d["cluster_vectors"], dtype=float),
            template_id=d.get("template_id", ""),
            cluster_id=d.get("cluster_id", 0),
            seed=d.get("seed", 0),
            feature_mask=d.get("feature_mask"),
            meta=d.get("meta", {}),
        )

    def save(self, path: str) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str) -> "ModelBundle":
        return cls.from_json(json.loads(Path(path).read_text()))
