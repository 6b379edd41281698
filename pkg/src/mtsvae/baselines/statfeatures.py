"""Fixed catalog of statistical time/frequency features plus relevance selection.

The catalog is a compact stand-in for the large default feature set of
automated extraction libraries: 18 time-domain and 6 spectral features per
window. Relevance of each feature to the target is tested univariately and
filtered with the Benjamini-Yekutieli procedure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..timeseries import CLASSIFICATION, REGRESSION

CATALOG_VERSION = 1

FEATURE_NAMES = (
    "mean", "std", "min", "max", "median", "skewness", "kurtosis", "rms",
    "abs_energy", "mean_abs_change", "zero_crossings", "count_above_mean",
    "first_loc_max", "last_loc_max", "autocorr_lag1", "autocorr_lag2",
    "autocorr_lag5", "mean_abs_second_diff",
    "spectral_centroid", "spectral_std", "band_energy_low", "band_energy_mid",
    "band_energy_high", "dominant_freq_index",
)
N_FEATURES = len(FEATURE_NAMES)

# How each feature reacts to adding a constant to the window.
SHIFT = "shift"  # moves by the constant
INVARIANT = "invariant"
OTHER = "other"
SHIFT_BEHAVIOUR = {name: INVARIANT for name in FEATURE_NAMES}
SHIFT_BEHAVIOUR.update({"mean": SHIFT, "min": SHIFT, "max": SHIFT, "median": SHIFT,
                        "rms": OTHER, "abs_energy": OTHER})

MIN_WINDOW = 8
_TINY = 1e-12


def stat_features_extract(window: np.ndarray, rate_hz: float = 1.0) -> np.ndarray:
    """Feature vector (ordered as :data:`FEATURE_NAMES`) of one window."""
    return stat_features_batch(np.asarray(window, dtype=np.float64)[None, :], rate_hz)[0]


def stat_features_batch(X: np.ndarray, rate_hz: float = 1.0) -> np.ndarray:
    """Features of every row of ``X``; shape ``(n, 24)``."""
    X = np.asarray(X, dtype=np.float64)
    n, w = X.shape
    if w < MIN_WINDOW:
        raise ValueError(f"window length {w} < {MIN_WINDOW}")
    mean = X.mean(axis=1)
    xc = X - mean[:, None]
    var = np.mean(xc ** 2, axis=1)
    std = np.sqrt(var)
    flat = std <= _TINY * np.maximum(1.0, np.abs(mean))
    safe_std = np.where(flat, 1.0, std)
    z = xc / safe_std[:, None]
    skew = np.where(flat, 0.0, np.mean(z ** 3, axis=1))
    kurt = np.where(flat, 0.0, np.mean(z ** 4, axis=1) - 3.0)
    energy = np.sum(X ** 2, axis=1)
    rms = np.sqrt(energy / w)
    mac = np.mean(np.abs(np.diff(X, axis=1)), axis=1)
    sgn = np.sign(np.where(flat[:, None], 0.0, xc))
    zc = np.sum(sgn[:, 1:] * sgn[:, :-1] < 0, axis=1).astype(np.float64)
    above = np.sum(np.where(flat[:, None], False, xc > 0), axis=1).astype(np.float64)
    first_max = np.argmax(X, axis=1) / w
    last_max = (w - 1 - np.argmax(X[:, ::-1], axis=1)) / w

    def acf(lag: int) -> np.ndarray:
        if lag >= w:
            return np.zeros(n)
        num = np.sum(xc[:, :-lag] * xc[:, lag:], axis=1) / (w - lag)
        return np.where(flat, 0.0, num / np.where(flat, 1.0, var))

    d2 = np.mean(np.abs(np.diff(X, n=2, axis=1)), axis=1)

    mag = np.abs(np.fft.rfft(X, axis=1))[:, 1:]  # DC dropped: spectra ignore offsets
    bins = np.arange(1, mag.shape[1] + 1)
    freqs = bins * rate_hz / w
    total = mag.sum(axis=1)
    quiet = total <= _TINY
    tsafe = np.where(quiet, 1.0, total)
    centroid = np.where(quiet, 0.0, mag @ freqs / tsafe)
    spread = np.sqrt(np.maximum(mag @ freqs ** 2 / tsafe - centroid ** 2, 0.0))
    spread = np.where(quiet, 0.0, spread)
    power = mag ** 2
    ptotal = np.where(quiet, 1.0, power.sum(axis=1))
    bands = np.array_split(np.arange(mag.shape[1]), 3)
    band_ratio = [np.where(quiet, 0.0, power[:, b].sum(axis=1) / ptotal) for b in bands]
    # lowest bin within round-off of the peak, so near-ties (flat spectra) resolve stably
    peak = mag.max(axis=1, keepdims=True)
    dominant = np.where(quiet, 0.0, bins[np.argmax(mag >= peak * (1 - 1e-9), axis=1)] / w)

    cols = [mean, std, X.min(axis=1), X.max(axis=1), np.median(X, axis=1), skew, kurt, rms,
            energy, mac, zc, above, first_max, last_max, acf(1), acf(2), acf(5), d2,
            centroid, spread, *band_ratio, dominant]
    return np.stack(cols, axis=1)


def feature_names(channel_names) -> list[str]:
    return [f"{ch}__{f}" for ch in channel_names for f in FEATURE_NAMES]


@dataclass(frozen=True)
class StatFeatureSet:
    feature_names: tuple[str, ...]
    selected_mask: np.ndarray
    p_values: np.ndarray

    @property
    def n_selected(self) -> int:
        return int(self.selected_mask.sum())


def relevance_p_values(F: np.ndarray, y: np.ndarray, task: str) -> np.ndarray:
    """Univariate p-values: ANOVA F-test (classes) or Pearson t-test (regression).

    Constant features get p = 1.
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y)
    n, d = F.shape
    if task == CLASSIFICATION:
        classes = np.unique(y)
        k = len(classes)
        if k < 2:
            raise ValueError("selection needs at least two classes")
        grand = F.mean(axis=0)
        between = np.zeros(d)
        within = np.zeros(d)
        for c in classes:
            G = F[y == c]
            gm = G.mean(axis=0)
            between += len(G) * (gm - grand) ** 2
            within += np.sum((G - gm) ** 2, axis=0)
        df_b, df_w = k - 1, n - k
        if df_w <= 0:
            return np.ones(d)
        tiny = 1e-24 * n * np.maximum(np.abs(F).max(axis=0), 1.0) ** 2
        const = between + within <= tiny
        pure = within <= tiny  # classes perfectly separated by their means
        with np.errstate(divide="ignore", invalid="ignore"):
            fstat = (between / df_b) / (within / df_w)
        p = stats.f.sf(np.where(pure, 1.0, fstat), df_b, df_w)
        p = np.where(pure, 0.0, p)
        p = np.where(const, 1.0, p)
        return np.nan_to_num(p, nan=1.0)
    if task == REGRESSION:
        yc = y.astype(np.float64) - y.mean()
        Fc = F - F.mean(axis=0)
        sy = np.sqrt(np.sum(yc ** 2))
        sf = np.sqrt(np.sum(Fc ** 2, axis=0))
        const = sf <= 1e-12 * np.maximum(np.abs(F).max(axis=0), 1.0)
        r = np.where(const, 0.0, (yc @ Fc) / (sy * np.where(const, 1.0, sf)))
        r = np.clip(r, -1.0, 1.0)
        if n <= 2:
            return np.where(const, 1.0, 0.5)
        with np.errstate(divide="ignore"):
            t = r * np.sqrt((n - 2) / np.maximum(1.0 - r ** 2, 0.0))
        return np.where(const, 1.0, 2 * stats.t.sf(np.abs(t), n - 2))
    raise ValueError(f"unknown task {task!r}")


def benjamini_yekutieli(p: np.ndarray, q: float) -> np.ndarray:
    """Rejection mask of the BY step-up procedure at FDR level ``q``."""
    p = np.asarray(p, dtype=np.float64)
    m = p.size
    c_m = np.sum(1.0 / np.arange(1, m + 1))
    order = np.argsort(p, kind="stable")
    thresh = np.arange(1, m + 1) * q / (m * c_m)
    ok = np.flatnonzero(p[order] <= thresh)
    mask = np.zeros(m, dtype=bool)
    if ok.size:
        mask[order[:ok[-1] + 1]] = True
    return mask


def stat_features_select(F: np.ndarray, y: np.ndarray, task: str, q: float = 0.05,
                         names=None) -> StatFeatureSet:
    """Keep features whose relevance survives BY-FDR control at level ``q``.

    When nothing survives, the single feature with the smallest p-value is
    kept (lowest index on ties).
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y)
    if F.shape[0] != y.shape[0]:
        raise ValueError("feature rows and targets differ in length")
    if F.shape[0] < 5:
        raise ValueError("selection needs at least 5 labeled rows")
    if np.all(y == y[0]):
        raise ValueError("constant target: nothing to select against")
    p = relevance_p_values(F, y, task)
    mask = benjamini_yekutieli(p, q)
    if not mask.any():
        mask[int(np.argmin(p))] = True
    if names is None:
        names = [f"f{i}" for i in range(F.shape[1])]
    return StatFeatureSet(tuple(names), mask, p)
