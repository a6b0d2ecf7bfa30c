"""Model selection: stratified k-fold CV, F-driven threshold tuning, and a
grid search that scores every candidate on pooled out-of-fold scores.

The threshold for a candidate is tuned once on the pooled out-of-fold scores
(never on any fold's training half), and the selection metric is the mean of
the per-fold F-measures at that shared threshold.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .classifiers import ClassifierConfig, LabeledSet, TrainedClassifier, train_model
from .errors import ContractError
from .evaluation import confusion, metrics
from .features import fit_standardizer


@dataclass
class FoldPlan:
    """Assignment of each sample to one of k validation folds."""

    k: int
    seed: int
    assignments: np.ndarray

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ContractError("k-fold needs k >= 2")
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        if self.assignments.min(initial=0) < 0 or self.assignments.max(initial=0) >= self.k:
            raise ContractError("fold assignments out of range")

    def validation_mask(self, fold: int) -> np.ndarray:
        return self.assignments == fold


def kfold_split(labels: np.ndarray, k: int, seed: int) -> FoldPlan:
    """Stratified folds: shuffle within each class, then deal samples
    round-robin with one counter running across both classes, so fold sizes
    differ by at most one globally and per class.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ContractError("k-fold needs k >= 2")
    for cls in (-1, 1):
        count = int(np.sum(labels == cls))
        if count < k:
            raise ContractError(
                f"class {cls:+d} has {count} samples, fewer than k={k} folds"
            )
    rng = np.random.default_rng(seed)
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    position = 0
    for cls in (-1, 1):
        members = np.flatnonzero(labels == cls)
        for idx in rng.permutation(members):
            assignments[idx] = position % k
            position += 1
    return FoldPlan(k=k, seed=seed, assignments=assignments)


def _f_measure(se: float, sp: float) -> float:
    return 0.0 if se + sp == 0 else 2.0 * se * sp / (se + sp)


def tune_threshold(scores: np.ndarray, truth: np.ndarray) -> float:
    """Return the threshold maximizing F over the candidate set
    {-inf} + {midpoints of consecutive distinct scores} + {+inf},
    breaking ties toward the smallest threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise ContractError("scores and truth must be matching 1-d arrays")
    if not np.all(np.isfinite(scores)):
        raise ContractError("scores must be finite for threshold tuning")
    pos_total = int(np.sum(truth == 1))
    neg_total = int(np.sum(truth == -1))
    if pos_total == 0 or neg_total == 0:
        raise ContractError("threshold tuning needs both classes")

    unique, inverse = np.unique(scores, return_inverse=True)
    pos_at = np.bincount(inverse, weights=(truth == 1).astype(np.float64))
    neg_at = np.bincount(inverse, weights=(truth == -1).astype(np.float64))
    pos_ge = np.cumsum(pos_at[::-1])[::-1]
    neg_ge = np.cumsum(neg_at[::-1])[::-1]

    mids = (unique[:-1] + unique[1:]) / 2.0
    # A midpoint of two adjacent floats can round down onto the lower value,
    # which would silently include it in the positive side; snap upward.
    rounded_down = mids <= unique[:-1]
    mids[rounded_down] = unique[1:][rounded_down]

    thetas = np.concatenate(([-np.inf], mids, [np.inf]))
    tp = np.concatenate(([float(pos_total)], pos_ge[1:], [0.0]))
    fp = np.concatenate(([float(neg_total)], neg_ge[1:], [0.0]))
    se = tp / pos_total
    sp = (neg_total - fp) / neg_total
    denom = se + sp
    f = np.zeros_like(denom)
    nonzero = denom > 0
    f[nonzero] = 2.0 * se[nonzero] * sp[nonzero] / denom[nonzero]
    return float(thetas[int(np.argmax(f))])


@dataclass
class CandidateResult:
    """One grid candidate: its pooled-OOF threshold and per-fold F scores."""

    config: ClassifierConfig
    theta: float
    fold_f: list[float]
    mean_f: float
    std_f: float
    oof_scores: np.ndarray = field(repr=False)
    fold_standardizer_means: list[np.ndarray] = field(repr=False)


def evaluate_candidate(
    config: ClassifierConfig, data: LabeledSet, plan: FoldPlan
) -> CandidateResult:
    """Cross-validate one configuration.

    Standardization is refit on each fold's training part only, so no
    statistic of a validation fold ever reaches the model that scores it.
    """
    if plan.assignments.shape[0] != data.n:
        raise ContractError("fold plan does not match the data")
    oof = np.empty(data.n)
    fold_means: list[np.ndarray] = []
    for fold in range(plan.k):
        va = plan.validation_mask(fold)
        tr = ~va
        std = fit_standardizer(data.X[tr])
        fold_means.append(np.asarray(std.means, dtype=np.float64).copy())
        model = train_model(config, LabeledSet(std.transform(data.X[tr]), data.y[tr]))
        oof[va] = model.scores(std.transform(data.X[va]))
    theta = tune_threshold(oof, data.y)
    fold_f: list[float] = []
    for fold in range(plan.k):
        va = plan.validation_mask(fold)
        predicted = np.where(oof[va] >= theta, 1, -1)
        fold_f.append(metrics(confusion(data.y[va], predicted)).f_measure)
    return CandidateResult(
        config=config,
        theta=theta,
        fold_f=fold_f,
        mean_f=float(np.mean(fold_f)),
        std_f=float(np.std(fold_f)),
        oof_scores=oof,
        fold_standardizer_means=fold_means,
    )


@dataclass
class SearchResult:
    candidates: list[CandidateResult]
    best_index: int
    plan: FoldPlan

    @property
    def best(self) -> CandidateResult:
        return self.candidates[self.best_index]


def grid_search(
    grid: list[ClassifierConfig], data: LabeledSet, k: int = 5, seed: int = 0
) -> SearchResult:
    """Evaluate every configuration on one shared fold plan and pick the one
    with the highest mean per-fold F; ties keep the earliest grid entry.
    """
    if not grid:
        raise ContractError("grid search needs at least one configuration")
    plan = kfold_split(data.y, k, seed)
    candidates = [evaluate_candidate(config, data, plan) for config in grid]
    best_index = 0
    for i, cand in enumerate(candidates):
        if cand.mean_f > candidates[best_index].mean_f:
            best_index = i
    return SearchResult(candidates=candidates, best_index=best_index, plan=plan)


def train_final(
    config: ClassifierConfig, theta: float, data: LabeledSet
) -> TrainedClassifier:
    """Refit on all training data with a standardizer fit to the same data."""
    std = fit_standardizer(data.X)
    model = train_model(config, LabeledSet(std.transform(data.X), data.y))
    return TrainedClassifier(
        config=config, model=model, theta=float(theta), standardizer=std
    )


DEFAULT_GRIDS = {
    "logreg": {"C": (0.25, 0.5, 1.0, 2.0, 4.0)},
    "linsvm": {"C": (0.0625, 0.125, 0.25, 0.5, 1.0, 2.0)},
    "knn": {"K": (1, 3, 5, 7, 9)},
    "adaboost": {"D": (1, 2, 3, 5, 7)},
    "rforest": {"D": (5, 10, 25, 40), "N": (10, 20, 40, 80)},
}


def default_grid(family: str, seed: int = 0) -> list[ClassifierConfig]:
    """The stock hyperparameter grid for one family."""
    if family not in DEFAULT_GRIDS:
        raise ContractError(f"unknown classifier family {family!r}")
    spec = DEFAULT_GRIDS[family]
    configs: list[ClassifierConfig] = []
    if family == "rforest":
        for D in spec["D"]:
            for N in spec["N"]:
                configs.append(ClassifierConfig(family=family, D=D, N=N, seed=seed))
    else:
        (param, values), = spec.items()
        for value in values:
            configs.append(ClassifierConfig(family=family, seed=seed, **{param: value}))
    return configs


CV_TABLE_COLUMNS = ("family", "C", "K", "D", "N", "seed", "mean_f", "std_f", "theta")


def render_cv_table(result: SearchResult) -> str:
    """CSV table of every candidate in grid order, floats via repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CV_TABLE_COLUMNS)
    for cand in result.candidates:
        cfg = cand.config
        writer.writerow(
            [
                cfg.family,
                "" if cfg.C is None else repr(float(cfg.C)),
                "" if cfg.K is None else cfg.K,
                "" if cfg.D is None else cfg.D,
                "" if cfg.N is None else cfg.N,
                cfg.seed,
                repr(cand.mean_f),
                repr(cand.std_f),
                repr(cand.theta),
            ]
        )
    return buf.getvalue()
