"""Axis-aligned decision tree minimizing weighted Gini impurity.

The tree stores nodes in flat arrays (an arena) so batch prediction and the
split search can run as compiled numba kernels; the JSON form is the usual
nested dict. Splits send x[feature] <= threshold to the left child.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import ContractError


@njit(cache=True)
def _best_split(X, rows, feats, is_pos, w):
    """Exhaustive split search over `feats` for the node holding `rows`.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Returns (feature, threshold, gain); feature is -1 when no split
    strictly reduces the weighted Gini impurity. The first candidate in
    (feature, threshold) order wins ties because later ones must beat it
    strictly.
    """
    m = rows.shape[0]
    total_w = 0.0
    total_pos = 0.0
    for i in range(m):
        r = rows[i]
        total_w += w[r]
        if is_pos[r]:
            total_pos += w[r]
    total_neg = total_w - total_pos
    parent = 1.0 - (total_pos / total_w) ** 2 - (total_neg / total_w) ** 2

    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    vals = np.empty(m, dtype=np.float64)
    for j in range(feats.shape[0]):
        f = feats[j]
        for i in range(m):
            vals[i] = X[rows[i], f]
        order = np.argsort(vals)
        cum_w = 0.0
        cum_pos = 0.0
        for i in range(m - 1):
            r = rows[order[i]]
            cum_w += w[r]
            if is_pos[r]:
                cum_pos += w[r]
            lo = vals[order[i]]
            hi = vals[order[i + 1]]
            if lo == hi:
                continue
            w_left = cum_w
            w_right = total_w - cum_w
            if w_left <= 0.0 or w_right <= 0.0:
                continue
            p_left = cum_pos
            p_right = total_pos - cum_pos
            g_left = 1.0 - (p_left / w_left) ** 2 - ((w_left - p_left) / w_left) ** 2
            g_right = (
                1.0 - (p_right / w_right) ** 2 - ((w_right - p_right) / w_right) ** 2
            )
            gain = parent - (w_left * g_left + w_right * g_right) / total_w
            if gain > best_gain:
                thr = (lo + hi) / 2.0
                if thr >= hi:  # adjacent floats: keep the boundary below hi
                    thr = lo
                best_gain = gain
                best_feat = f
                best_thr = thr
    return best_feat, best_thr, best_gain


@njit(cache=True)
def _leaf_values(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@dataclass
class DecisionTree:
    """Flat-array tree; leaves hold the weighted fraction of positive samples."""

    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32 child ids, -1 at leaves
    right: np.ndarray
    value: np.ndarray  # float64 positive-weight fraction, set at leaves

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def leaf_fractions(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return _leaf_values(self.feature, self.threshold, self.left, self.right, self.value, X)

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.leaf_fractions(X) >= 0.5, 1, -1).astype(np.int64)

    def to_nested(self) -> dict:
        def walk(node: int) -> dict:
            if self.feature[node] < 0:
                frac = float(self.value[node])
                return {"fraction": frac, "label": 1 if frac >= 0.5 else -1}
            return {
                "feature": int(self.feature[node]),
                "threshold": float(self.threshold[node]),
                "left": walk(int(self.left[node])),
                "right": walk(int(self.right[node])),
            }

        return walk(0)

    @classmethod
    def from_nested(cls, root: dict) -> "DecisionTree":
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []

        def walk(node: dict) -> int:
            idx = len(feature)
            feature.append(0)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "feature" in node:
                feature[idx] = int(node["feature"])
                threshold[idx] = float(node["threshold"])
                left[idx] = walk(node["left"])
                right[idx] = walk(node["right"])
            else:
                feature[idx] = -1
                value[idx] = float(node["fraction"])
            return idx

        walk(root)
        return cls(
            feature=np.asarray(feature, dtype=np.int32),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int32),
            right=np.asarray(right, dtype=np.int32),
            value=np.asarray(value, dtype=np.float64),
        )


class _TreeBuilder:
    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def finish(self) -> DecisionTree:
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )


def fit_decision_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    weights: np.ndarray | None = None,
    feature_subset_size: int | None = None,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """Grow a tree greedily to `max_depth`, stopping early at pure nodes or
    when no candidate split strictly reduces weighted impurity.

    `weights` are per-sample non-negative reals (uniform when omitted) whose
    sum must be positive. When `feature_subset_size` < d, each node draws its
    own feature subset from `rng` without replacement.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ContractError("tree training needs X (n, d) and y (n,)")
    if X.shape[0] == 0:
        raise ContractError("tree training needs at least one sample")
    if max_depth < 0:
        raise ContractError("max_depth must be >= 0")
    n, d = X.shape
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ContractError("weights must be n non-negative finite reals")
        if w.sum() <= 0:
            raise ContractError("weights must not sum to zero")
    k = d if feature_subset_size is None else int(feature_subset_size)
    if not 1 <= k <= d:
        raise ContractError(f"feature_subset_size must be in [1, {d}]")
    if k < d and rng is None:
        raise ContractError("feature subsampling requires an rng")

    is_pos = y == 1
    builder = _TreeBuilder()
    all_feats = np.arange(d, dtype=np.int64)

    def grow(rows: np.ndarray, depth: int) -> int:
        node = builder.add()
        w_rows = w[rows]
        total = w_rows.sum()
        pos = w_rows[is_pos[rows]].sum()
        builder.value[node] = pos / total if total > 0 else 0.0
        if depth >= max_depth or total <= 0 or pos <= 0 or pos >= total:
            return node
        if k < d:
            feats = np.sort(rng.choice(d, size=k, replace=False)).astype(np.int64)
        else:
            feats = all_feats
        f, thr, gain = _best_split(X, rows, feats, is_pos, w)
        if f < 0 or gain <= 0.0:
            return node
        go_left = X[rows, f] <= thr
        builder.feature[node] = int(f)
        builder.threshold[node] = float(thr)
        builder.left[node] = grow(rows[go_left], depth + 1)
        builder.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(n, dtype=np.int64), 0)
    return builder.finish()
