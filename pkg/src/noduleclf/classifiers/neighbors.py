"""K-nearest-neighbors with Euclidean distance and deterministic ties.

Neighbor order comes from a stable sort on squared distance, so equidistant
training points resolve to the lower training index. The score is the
fraction of the K neighbors labeled positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .base import LabeledSet


@dataclass
class KnnModel:
    train_X: np.ndarray
    train_y: np.ndarray
    K: int

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        # Squared distances via explicit differences: unlike the expanded
        # x.x - 2x.q + q.q form this keeps bitwise-equal results for
        # coincident points, which the index tie-break relies on.
        out = np.empty(X.shape[0])
        chunk = 128
        for start in range(0, X.shape[0], chunk):
            q = X[start : start + chunk]
            d2 = ((q[:, None, :] - self.train_X[None, :, :]) ** 2).sum(axis=2)
            order = np.argsort(d2, axis=1, kind="stable")[:, : self.K]
            out[start : start + chunk] = np.mean(self.train_y[order] == 1, axis=1)
        return out

    def params_dict(self) -> dict:
        return {
            "K": int(self.K),
            "train_X": [[float(v) for v in row] for row in self.train_X],
            "train_y": [int(v) for v in self.train_y],
        }

    @classmethod
    def from_params(cls, params: dict) -> "KnnModel":
        return cls(
            train_X=np.asarray(params["train_X"], dtype=np.float64),
            train_y=np.asarray(params["train_y"], dtype=np.int64),
            K=int(params["K"]),
        )


def fit_knn(data: LabeledSet, K: int) -> KnnModel:
    """Memorize the training set; requires 1 <= K <= n."""
    if not 1 <= K <= data.n:
        raise ContractError(f"K must be in [1, {data.n}], got {K}")
    return KnnModel(train_X=data.X.copy(), train_y=data.y.copy(), K=int(K))
