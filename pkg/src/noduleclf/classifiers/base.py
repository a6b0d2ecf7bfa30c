"""Shared classifier contract: labeled data, configs, and the trained wrapper.

Every family exposes a continuous score; the final label comes from
thresholding that score (score >= theta means positive/malignant).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ContractError, InputError
from ..features import Standardizer
from ..ioutil import atomic_write_text

FAMILIES = ("logreg", "linsvm", "knn", "adaboost", "rforest")

MODEL_SCHEMA = 1


@dataclass
class LabeledSet:
    """Training data: feature matrix plus -1/+1 labels, both classes present."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise ContractError("features must be (n, d) with n matching labels")
        if not np.all(np.isfinite(self.X)):
            raise ContractError("training features contain non-finite entries")
        if not np.all(np.isin(self.y, (-1, 1))):
            raise ContractError("labels must be -1 or +1")
        if not (np.any(self.y == 1) and np.any(self.y == -1)):
            raise ContractError("training data needs both classes")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class ClassifierConfig:
    """Family name plus the hyperparameters that family actually uses."""

    family: str
    C: float | None = None
    K: int | None = None
    D: int | None = None
    N: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ContractError(f"unknown classifier family {self.family!r}")
        need = {
            "logreg": ("C",),
            "linsvm": ("C",),
            "knn": ("K",),
            "adaboost": ("D",),
            "rforest": ("D", "N"),
        }[self.family]
        for name in need:
            value = getattr(self, name)
            if value is None or value <= 0:
                raise ContractError(
                    f"{self.family} requires a positive {name}, got {value!r}"
                )

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"family": self.family, "seed": self.seed}
        for name in ("C", "K", "D", "N"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        try:
            return cls(
                family=d["family"],
                C=d.get("C"),
                K=d.get("K"),
                D=d.get("D"),
                N=d.get("N"),
                seed=int(d.get("seed", 0)),
            )
        except KeyError as exc:
            raise ContractError(f"classifier config missing {exc}") from None


@dataclass
class TrainedClassifier:
    """Immutable fitted model: scoring function, tuned threshold, standardizer.

    Scoring takes raw (unstandardized) feature rows; the stored standardizer
    is applied internally, so persisted models are self-contained.
    """

    config: ClassifierConfig
    model: Any
    theta: float
    standardizer: Standardizer

    @property
    def family(self) -> str:
        return self.config.family

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.model.scores(self.standardizer.transform(X))

    def score(self, x: np.ndarray) -> float:
        return float(self.scores(np.asarray(x, dtype=np.float64)[None, :])[0])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.scores(X) >= self.theta, 1, -1).astype(np.int64)

    def predict(self, x: np.ndarray) -> int:
        return 1 if self.score(x) >= self.theta else -1

    def to_doc(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "config": self.config.to_dict(),
            "theta": self.theta,
            "standardizer": self.standardizer.to_dict(),
            "params": self.model.params_dict(),
        }


def save_model(path: str | Path, clf: TrainedClassifier) -> None:
    atomic_write_text(path, json.dumps(clf.to_doc(), sort_keys=True, indent=2) + "\n")


def load_model(path: str | Path) -> TrainedClassifier:
    from . import model_from_params  # deferred: avoids a circular import

    p = Path(path)
    if not p.is_file():
        raise InputError(f"model file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"model file is not valid JSON: {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != MODEL_SCHEMA:
        raise ContractError(
            f"unsupported model schema {doc.get('schema')!r} in {path}; "
            f"this build reads schema {MODEL_SCHEMA}"
        )
    if "theta" not in doc or doc["theta"] is None:
        raise ContractError(f"model file {path} has no threshold")
    config = ClassifierConfig.from_dict(doc["config"])
    model = model_from_params(config, doc["params"])
    return TrainedClassifier(
        config=config,
        model=model,
        theta=float(doc["theta"]),
        standardizer=Standardizer.from_dict(doc["standardizer"]),
    )
