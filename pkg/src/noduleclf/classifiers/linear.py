"""Linear models trained from scratch: regularized logistic regression via
full-batch gradient descent, and a linear SVM via stochastic subgradient
descent on the primal hinge objective with averaged iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import ContractError
from .base import LabeledSet


def _stable_expit(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss plus L2 penalty, with its analytic gradient.

    J(w, b) = (1/n) sum_i log(1 + exp(-y_i (w.x_i + b))) + ||w||^2 / (2 C n)
    """
    n = X.shape[0]
    margins = y * (X @ w + b)
    loss = float(np.mean(np.logaddexp(0.0, -margins)) + (w @ w) / (2.0 * C * n))
    # d/dm log(1+exp(-m)) = -expit(-m)
    coeff = -y * _stable_expit(-margins) / n
    grad_w = X.T @ coeff + w / (C * n)
    grad_b = float(coeff.sum())
    return loss, grad_w, grad_b


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    n_iterations: int = 0

    def scores(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.weights + self.bias

    def params_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "n_iterations": int(self.n_iterations),
        }

    @classmethod
    def from_params(cls, params: dict) -> "LogisticModel":
        return cls(
            weights=np.asarray(params["weights"], dtype=np.float64),
            bias=float(params["bias"]),
            n_iterations=int(params.get("n_iterations", 0)),
        )


def fit_logistic(
    data: LabeledSet,
    C: float,
    max_iterations: int = 10000,
    tolerance: float = 1e-6,
) -> LogisticModel:
    """Full-batch descent with Armijo backtracking from w = 0, b = 0.

    Stops when the gradient infinity-norm falls below `tolerance`. Raises on
    a non-finite objective, which in practice signals unstandardized input.
    """
    if C <= 0:
        raise ContractError("logistic C must be positive")
    X, y = data.X, data.y.astype(np.float64)
    w = np.zeros(data.d)
    b = 0.0
    loss, grad_w, grad_b = logistic_objective(w, b, X, y, C)
    step = 1.0
    iterations = 0
    for _ in range(max_iterations):
        if not np.isfinite(loss):
            raise ContractError(
                "logistic training produced a non-finite objective; "
                "the inputs are likely not standardized"
            )
        grad_inf = max(np.max(np.abs(grad_w), initial=0.0), abs(grad_b))
        if grad_inf < tolerance:
            break
        descent = -(grad_w @ grad_w + grad_b * grad_b)
        step = min(step * 2.0, 1e6)
        for _halving in range(60):
            w_new = w - step * grad_w
            b_new = b - step * grad_b
            loss_new, gw_new, gb_new = logistic_objective(w_new, b_new, X, y, C)
            if loss_new <= loss + 1e-4 * step * descent:
                break
            step *= 0.5
        else:
            break  # no acceptable step: flat to machine precision
        w, b = w_new, b_new
        loss, grad_w, grad_b = loss_new, gw_new, gb_new
        iterations += 1
    return LogisticModel(weights=w, bias=b, n_iterations=iterations)


@njit(cache=True)
def _svm_epochs(X, y, lam, epochs, seed, history_w, history_b):
    """Pegasos-style primal SGD: eta_t = 1/(lam t), one pass per epoch over a
    freshly shuffled order, with running sums for iterate averaging. The
    averaged (w, b) as of each epoch end lands in history_w/history_b.
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    np.random.seed(seed)
    idx = np.arange(n)
    t = 0
    for epoch in range(epochs):
        for i in range(n - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            tmp = idx[i]
            idx[i] = idx[j]
            idx[j] = tmp
        for pos in range(n):
            i = idx[pos]
            t += 1
            eta = 1.0 / (lam * t)
            margin = 0.0
            for f in range(d):
                margin += w[f] * X[i, f]
            margin = y[i] * (margin + b)
            shrink = 1.0 - eta * lam
            for f in range(d):
                w[f] *= shrink
            if margin < 1.0:
                for f in range(d):
                    w[f] += eta * y[i] * X[i, f]
                b += eta * y[i]
            for f in range(d):
                w_sum[f] += w[f]
            b_sum += b
        for f in range(d):
            history_w[epoch, f] = w_sum[f] / t
        history_b[epoch] = b_sum / t


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    """Primal objective: ||w||^2 / 2 + C * sum_i max(0, 1 - y_i (w.x_i + b))."""
    margins = y * (X @ w + b)
    return float(0.5 * (w @ w) + C * np.sum(np.maximum(0.0, 1.0 - margins)))


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    epoch_history: list[tuple[np.ndarray, float]] | None = field(
        default=None, repr=False, compare=False
    )

    def scores(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.weights + self.bias

    def params_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
        }

    @classmethod
    def from_params(cls, params: dict) -> "LinearSvmModel":
        return cls(
            weights=np.asarray(params["weights"], dtype=np.float64),
            bias=float(params["bias"]),
        )


def fit_linear_svm(
    data: LabeledSet,
    C: float,
    epochs: int = 2000,
    seed: int = 0,
    record_history: bool = False,
) -> LinearSvmModel:
    """Train by stochastic subgradient descent with lam = 1/(n C).

    The returned weights are the average over every update step, which is
    what makes the objective settle monotonically instead of oscillating.
    With `record_history`, the model keeps the averaged iterate at each epoch
    end so that convergence can be inspected.
    """
    if C <= 0:
        raise ContractError("svm C must be positive")
    if epochs < 1:
        raise ContractError("svm needs at least one epoch")
    X = np.ascontiguousarray(data.X)
    y = data.y.astype(np.float64)
    lam = 1.0 / (data.n * C)
    history_w = np.zeros((epochs, data.d))
    history_b = np.zeros(epochs)
    _svm_epochs(X, y, lam, epochs, seed, history_w, history_b)
    history = None
    if record_history:
        history = [(history_w[e].copy(), float(history_b[e])) for e in range(epochs)]
    return LinearSvmModel(
        weights=history_w[-1].copy(),
        bias=float(history_b[-1]),
        epoch_history=history,
    )
