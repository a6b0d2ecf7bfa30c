"""Classifier families and the shared training/persistence contract."""

from __future__ import annotations

from typing import Any

from ..errors import ContractError
from .base import (
    FAMILIES,
    MODEL_SCHEMA,
    ClassifierConfig,
    LabeledSet,
    TrainedClassifier,
    load_model,
    save_model,
)
from .ensemble import (
    AdaBoostModel,
    RandomForestModel,
    fit_adaboost,
    fit_random_forest,
)
from .linear import (
    LinearSvmModel,
    LogisticModel,
    fit_linear_svm,
    fit_logistic,
    logistic_objective,
    svm_objective,
)
from .neighbors import KnnModel, fit_knn
from .tree import DecisionTree, fit_decision_tree

_MODEL_TYPES = {
    "logreg": LogisticModel,
    "linsvm": LinearSvmModel,
    "knn": KnnModel,
    "adaboost": AdaBoostModel,
    "rforest": RandomForestModel,
}


def train_model(config: ClassifierConfig, data: LabeledSet) -> Any:
    """Fit the family named by `config` on (already standardized) data."""
    if config.family == "logreg":
        return fit_logistic(data, C=config.C)
    if config.family == "linsvm":
        return fit_linear_svm(data, C=config.C, seed=config.seed)
    if config.family == "knn":
        return fit_knn(data, K=config.K)
    if config.family == "adaboost":
        return fit_adaboost(data, D=config.D)
    if config.family == "rforest":
        return fit_random_forest(data, N=config.N, D=config.D, seed=config.seed)
    raise ContractError(f"unknown classifier family {config.family!r}")


def model_from_params(config: ClassifierConfig, params: dict) -> Any:
    """Rebuild a scoring model from its persisted parameter dict."""
    try:
        model_type = _MODEL_TYPES[config.family]
    except KeyError:
        raise ContractError(f"unknown classifier family {config.family!r}") from None
    return model_type.from_params(params)


__all__ = [
    "FAMILIES",
    "MODEL_SCHEMA",
    "ClassifierConfig",
    "LabeledSet",
    "TrainedClassifier",
    "AdaBoostModel",
    "DecisionTree",
    "KnnModel",
    "LinearSvmModel",
    "LogisticModel",
    "RandomForestModel",
    "fit_adaboost",
    "fit_decision_tree",
    "fit_knn",
    "fit_linear_svm",
    "fit_logistic",
    "fit_random_forest",
    "load_model",
    "logistic_objective",
    "model_from_params",
    "save_model",
    "svm_objective",
    "train_model",
]
