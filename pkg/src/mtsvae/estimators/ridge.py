"""Closed-form ridge regression with GCV-selected penalty.

Classification uses one-vs-rest regression onto +/-1 targets and predicts the
class with the largest score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..timeseries import CLASSIFICATION, REGRESSION

DEFAULT_LAMBDAS = np.logspace(-3, 3, 10)
STD_EPS = 1e-12


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > STD_EPS * np.maximum(1.0, np.abs(X).max(axis=0)), std, 1.0))

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def ridge_solve(X: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Minimizer of ``||Y - X W^T||^2 + lam ||W||^2`` (no intercept).

    Solved through the thin SVD of ``X``; returns ``W`` of shape
    ``(n_outputs, d)``.
    """
    return _ridge_path(np.asarray(X, dtype=np.float64), _as_2d(Y), [lam])[0][0]


def _as_2d(Y):
    Y = np.asarray(Y, dtype=np.float64)
    return Y[:, None] if Y.ndim == 1 else Y


def _ridge_path(X, Y, lambdas):
    n = X.shape[0]
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    UtY = U.T @ Y
    resid_perp = np.sum(Y ** 2) - np.sum(UtY ** 2)
    weights, gcv = [], []
    for lam in lambdas:
        if not lam > 0:
            raise ValueError("ridge penalties must be positive")
        shrink = s / (s ** 2 + lam)
        weights.append(((Vt.T * shrink) @ UtY).T)
        h = s ** 2 / (s ** 2 + lam)
        rss = max(resid_perp, 0.0) + np.sum(((1.0 - h)[:, None] * UtY) ** 2)
        dof = n - (h.sum() + 1.0)  # +1 for the intercept
        gcv.append(n * rss / dof ** 2 if dof > 0 else np.inf)
    return weights, np.array(gcv)


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray  # (n_outputs, d), standardized feature space
    intercept: np.ndarray  # (n_outputs,)
    lam: float
    standardizer: Standardizer
    task: str
    classes: np.ndarray | None = None
    gcv_scores: np.ndarray | None = None

    @property
    def coef(self) -> np.ndarray:
        """Weights in the original feature units."""
        return self.weights / self.standardizer.scale

    @property
    def raw_intercept(self) -> np.ndarray:
        return self.intercept - self.coef @ self.standardizer.mean

    def decision_function(self, F: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=np.float64))
        if F.shape[1] != self.weights.shape[1]:
            raise ValueError(f"expected {self.weights.shape[1]} features, got {F.shape[1]}")
        return self.standardizer.transform(F) @ self.weights.T + self.intercept


def ridge_fit(F: np.ndarray, y: np.ndarray, task: str, lambda_grid=DEFAULT_LAMBDAS,
              n_classes: int | None = None, standardize: bool = True) -> RidgeModel:
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y)
    if F.ndim != 2 or F.shape[0] != y.shape[0]:
        raise ValueError("features and targets do not line up")
    if F.shape[0] < 2:
        raise ValueError("ridge needs at least 2 rows")
    if not np.all(np.isfinite(F)):
        raise ValueError("non-finite features")
    std = Standardizer.fit(F) if standardize else Standardizer.identity(F.shape[1])
    Xs = std.transform(F)
    classes = None
    if task == CLASSIFICATION:
        classes = np.arange(n_classes) if n_classes is not None else np.unique(y)
        Y = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
    elif task == REGRESSION:
        Y = y.astype(np.float64)[:, None]
    else:
        raise ValueError(f"unknown task {task!r}")
    x_mean = Xs.mean(axis=0)
    y_mean = Y.mean(axis=0)
    weights, gcv = _ridge_path(Xs - x_mean, Y - y_mean, list(lambda_grid))
    best = int(np.argmin(gcv))
    W = weights[best]
    return RidgeModel(W, y_mean - W @ x_mean, float(lambda_grid[best]), std, task, classes, gcv)


def ridge_predict(model: RidgeModel, F: np.ndarray) -> np.ndarray:
    scores = model.decision_function(F)
    if model.task == REGRESSION:
        return scores[:, 0]
    # np.argmax returns the first maximum: ties go to the lowest class id
    return model.classes[np.argmax(scores, axis=1)]
