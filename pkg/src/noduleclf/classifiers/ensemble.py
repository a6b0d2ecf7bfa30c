"""Tree ensembles: discrete AdaBoost and a random forest.

Both reuse the weighted Gini tree as base learner. AdaBoost scores are the
alpha-weighted sum of tree votes; forest scores are the mean leaf
positive-fraction across trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .base import LabeledSet
from .tree import DecisionTree, fit_decision_tree

EPSILON_CLAMP = 1e-12


@dataclass
class AdaBoostModel:
    trees: list[DecisionTree]
    alphas: np.ndarray
    epsilons: np.ndarray  # raw (unclamped) weighted training errors per round

    @property
    def n_rounds(self) -> int:
        return len(self.trees)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros(X.shape[0])
        for alpha, tree in zip(self.alphas, self.trees):
            total += alpha * tree.predict_labels(X)
        return total

    def params_dict(self) -> dict:
        return {
            "alphas": [float(a) for a in self.alphas],
            "epsilons": [float(e) for e in self.epsilons],
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_params(cls, params: dict) -> "AdaBoostModel":
        return cls(
            trees=[DecisionTree.from_nested(t) for t in params["trees"]],
            alphas=np.asarray(params["alphas"], dtype=np.float64),
            epsilons=np.asarray(params["epsilons"], dtype=np.float64),
        )


def fit_adaboost(data: LabeledSet, D: int, rounds: int = 100) -> AdaBoostModel:
    """Discrete AdaBoost over depth-D Gini trees.

    Weights start uniform. A round with weighted error >= 1/2 is discarded
    and boosting stops; a perfect round (error exactly 0) is kept with a
    clamped alpha and stops further boosting. After each kept round the
    weights are re-normalized, which leaves the just-fitted tree at weighted
    error exactly 1/2 on the new weights.
    """
    if D < 1:
        raise ContractError("adaboost stump depth D must be >= 1")
    if rounds < 1:
        raise ContractError("adaboost needs at least one round")
    X, y = data.X, data.y
    n = data.n
    w = np.full(n, 1.0 / n)
    trees: list[DecisionTree] = []
    alphas: list[float] = []
    epsilons: list[float] = []
    for _ in range(rounds):
        tree = fit_decision_tree(X, y, D, weights=w)
        predicted = tree.predict_labels(X)
        miss = predicted != y
        epsilon = float(w[miss].sum())
        if epsilon >= 0.5:
            break
        clamped = min(max(epsilon, EPSILON_CLAMP), 1.0 - EPSILON_CLAMP)
        alpha = 0.5 * math.log((1.0 - clamped) / clamped)
        trees.append(tree)
        alphas.append(alpha)
        epsilons.append(epsilon)
        if epsilon == 0.0:
            break
        w = w * np.exp(-alpha * y * predicted)
        w /= w.sum()
    if not trees:
        raise ContractError(
            "adaboost found no tree better than chance on the first round"
        )
    return AdaBoostModel(
        trees=trees,
        alphas=np.asarray(alphas, dtype=np.float64),
        epsilons=np.asarray(epsilons, dtype=np.float64),
    )


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.leaf_fractions(X)
        return total / len(self.trees)

    def params_dict(self) -> dict:
        return {"trees": [t.to_nested() for t in self.trees]}

    @classmethod
    def from_params(cls, params: dict) -> "RandomForestModel":
        return cls(trees=[DecisionTree.from_nested(t) for t in params["trees"]])


def fit_random_forest(
    data: LabeledSet,
    N: int,
    D: int,
    seed: int = 0,
    bootstrap: bool = True,
    feature_subset_size: int | None = None,
) -> RandomForestModel:
    """N depth-D trees on bootstrap resamples with per-split feature draws.

    Each tree gets an independent child generator spawned from the seed, so
    the forest is reproducible and trees are decorrelated. The per-split
    subset size defaults to ceil(sqrt(d)). `bootstrap=False` and an explicit
    `feature_subset_size` exist so tests can drive the forest back into a
    deterministic single-tree regime.
    """
    if N < 1:
        raise ContractError("forest needs at least one tree")
    if D < 1:
        raise ContractError("forest tree depth D must be >= 1")
    d = data.d
    k = feature_subset_size if feature_subset_size is not None else math.ceil(math.sqrt(d))
    if not 1 <= k <= d:
        raise ContractError(f"feature_subset_size must be in [1, {d}]")
    children = np.random.SeedSequence(seed).spawn(N)
    trees: list[DecisionTree] = []
    for child in children:
        rng = np.random.default_rng(child)
        if bootstrap:
            rows = rng.integers(0, data.n, size=data.n)
            X_fit, y_fit = data.X[rows], data.y[rows]
        else:
            X_fit, y_fit = data.X, data.y
        subset = k if k < d else None
        trees.append(
            fit_decision_tree(
                X_fit, y_fit, D, feature_subset_size=subset, rng=rng
            )
        )
    return RandomForestModel(trees=trees)
