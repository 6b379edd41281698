"""Gaussian-kernel support vector machines trained with SMO.

The solver handles the generic dual

    min_a  1/2 a^T Q a + p^T a   s.t.  y^T a = 0,  0 <= a_i <= C

with maximal-violating-pair (first-order) working-set selection, which
covers both C-SVC and epsilon-SVR. Multiclass problems are decomposed
one-vs-rest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..timeseries import CLASSIFICATION, REGRESSION
from .ridge import Standardizer

TAU = 1e-12


class ConvergenceError(RuntimeError):
    """SMO hit its iteration cap before reaching the KKT tolerance."""


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    gap: float  # max KKT violation at exit
    n_iter: int


def smo_solve(Q: np.ndarray, p: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int | None = None) -> SmoResult:
    """Solve the box- and equality-constrained dual starting from ``a = 0``."""
    n = len(p)
    y = np.asarray(y, dtype=np.float64)
    alpha = np.zeros(n)
    G = np.array(p, dtype=np.float64)
    diag = np.diag(Q).copy()
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    pos = y > 0
    it = 0
    while True:
        # I_up: directions where y_t * a_t may grow; I_low: may shrink
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score = -y * G
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        gap = s_up[i] - s_low[j]
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(f"SMO did not reach tol={tol} in {max_iter} iterations (gap {gap:.3g})")
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[:, i] * (ni - ai) + Q[:, j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    return SmoResult(alpha, _rho(alpha, G, y, C), float(max(gap, 0.0)), it)


def _rho(alpha, G, y, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.mean(yG[free]))
    pos = y > 0
    upper_set = np.where(pos, alpha >= C, alpha <= 0)
    lower_set = np.where(pos, alpha <= 0, alpha >= C)
    ub = yG[upper_set].min() if upper_set.any() else np.inf
    lb = yG[lower_set].max() if lower_set.any() else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return float((ub + lb) / 2)


@dataclass(frozen=True)
class SvmModel:
    """Fitted machine(s).

    ``dual_coef[m, i]`` is ``y_i * alpha_i`` (classification) or
    ``alpha_i - alpha_i^*`` (regression) of machine ``m`` for support vector
    ``i``; decision values are ``dual_coef @ K(sv, x) - rho``.
    """

    support_vectors: np.ndarray  # standardized feature space
    support_index: np.ndarray  # rows of the training data
    dual_coef: np.ndarray  # (n_machines, n_sv)
    rho: np.ndarray  # (n_machines,)
    gamma: float
    C: float
    task: str
    standardizer: Standardizer
    classes: np.ndarray | None = None
    epsilon: float = 0.1
    y_mean: float = 0.0
    y_scale: float = 1.0
    alphas: tuple[np.ndarray, ...] = ()  # raw dual variables per machine, for auditing
    labels: tuple[np.ndarray, ...] = ()  # +/-1 signs of the dual variables
    kkt_gap: tuple[float, ...] = ()

    def decision_function(self, F: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=np.float64))
        if F.shape[1] != self.standardizer.mean.shape[0]:
            raise ValueError(f"expected {self.standardizer.mean.shape[0]} features, got {F.shape[1]}")
        K = rbf_kernel(self.standardizer.transform(F), self.support_vectors, self.gamma)
        return K @ self.dual_coef.T - self.rho


def scale_gamma(Xs: np.ndarray) -> float:
    var = Xs.var()
    return 1.0 / (Xs.shape[1] * var) if var > 0 else 1.0


def svm_fit(F: np.ndarray, y: np.ndarray, task: str, C: float = 1.0, gamma: float | str = "scale",
            epsilon: float = 0.1, tol: float = 1e-3, max_iter: int | None = None) -> SvmModel:
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y)
    if F.ndim != 2 or F.shape[0] != y.shape[0]:
        raise ValueError("features and targets do not line up")
    if F.shape[0] < 2:
        raise ValueError("SVM needs at least 2 rows")
    if not np.all(np.isfinite(F)):
        raise ValueError("non-finite features")
    if not C > 0:
        raise ValueError("C must be positive")
    std = Standardizer.fit(F)
    Xs = std.transform(F)
    g = scale_gamma(Xs) if gamma == "scale" else float(gamma)
    if not g > 0:
        raise ValueError("gamma must be positive")
    K = rbf_kernel(Xs, Xs, g)
    n = len(y)

    if task == CLASSIFICATION:
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError("SVM classification needs at least two classes")
        coefs, rhos, alphas, labels, gaps = [], [], [], [], []
        for c in classes:
            s = np.where(y == c, 1.0, -1.0)
            res = smo_solve(s[:, None] * s[None, :] * K, -np.ones(n), s, C, tol, max_iter)
            coefs.append(s * res.alpha)
            rhos.append(res.rho)
            alphas.append(res.alpha)
            labels.append(s)
            gaps.append(res.gap)
        coef = np.array(coefs)
        sv = np.flatnonzero(np.any(coef != 0, axis=0))
        return SvmModel(Xs[sv], sv, coef[:, sv], np.array(rhos), g, C, task, std, classes,
                        alphas=tuple(alphas), labels=tuple(labels), kkt_gap=tuple(gaps))

    if task == REGRESSION:
        yf = y.astype(np.float64)
        ym, ysd = yf.mean(), yf.std()
        ysd = ysd if ysd > 0 else 1.0
        t = (yf - ym) / ysd
        s = np.concatenate([np.ones(n), -np.ones(n)])
        KK = np.block([[K, K], [K, K]])
        Q = s[:, None] * s[None, :] * KK
        p = np.concatenate([epsilon - t, epsilon + t])
        res = smo_solve(Q, p, s, C, tol, max_iter)
        coef = res.alpha[:n] - res.alpha[n:]
        sv = np.flatnonzero(coef != 0)
        if sv.size == 0:
            sv = np.array([0])  # flat target: keep one row so prediction stays a kernel expansion
        return SvmModel(Xs[sv], sv, coef[sv][None, :], np.array([res.rho]), g, C, task, std, None,
                        epsilon, float(ym), float(ysd), alphas=(res.alpha,), labels=(s,),
                        kkt_gap=(res.gap,))
    raise ValueError(f"unknown task {task!r}")


def svm_predict(model: SvmModel, F: np.ndarray) -> np.ndarray:
    dec = model.decision_function(F)
    if model.task == REGRESSION:
        return dec[:, 0] * model.y_scale + model.y_mean
    return model.classes[np.argmax(dec, axis=1)]


def dual_residuals(model: SvmModel) -> list[tuple[float, float]]:
    """Per machine: (worst box-constraint violation, |sum_i y_i a_i|)."""
    out = []
    for a, s in zip(model.alphas, model.labels):
        box = max(float(np.max(-a)), float(np.max(a - model.C)), 0.0)
        out.append((box, abs(float(s @ a))))
    return out
