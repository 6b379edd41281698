"""Semi-supervised labeled-fraction sweep.

Every extractor is fitted once on the full, unlabeled training split. For
each labeled fraction and replicate a labeled subset is drawn, the paired
estimator is trained on the subset's features, and the full test split is
scored. Replicate seeds depend only on ``(seed, fraction index, repeat)``,
so all methods of a cell see the same labeled rows.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines.statfeatures import stat_features_select
from .estimators import ridge_fit, ridge_predict, svm_fit, svm_predict
from .estimators.ridge import DEFAULT_LAMBDAS
from .extractors import METHODS, PCA, ROCKET, STAT, VAE, canonical_method, make_extractor
from .timeseries import CLASSIFICATION, REGRESSION, Dataset, labeled_subset_size, split_labeled_subset
from .vae import VaeHyper

DEFAULT_FRACTIONS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
RIDGE, SVM, SVR = "ridge", "svm", "svr"
ACCURACY, NRMSE = "accuracy", "nrmse"
OK = "ok"

RECORD_COLUMNS = ("method", "fraction", "n_labeled", "repeat", "metric", "value", "wall_time_s", "status")


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("length mismatch")
    if y_true.size == 0:
        raise ValueError("empty input")
    return float(np.mean(y_true == y_pred))


def nrmse(y_true, y_pred) -> float:
    """RMSE divided by the population std of ``y_true``."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError("length mismatch")
    if y_true.size < 2:
        raise ValueError("need at least two targets")
    sd = y_true.std()
    if sd == 0:
        raise ValueError("constant targets: NRMSE undefined")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)) / sd)


def pair_estimator(method: str, task: str) -> str:
    method = canonical_method(method)
    if method == VAE:
        return SVM if task == CLASSIFICATION else SVR
    return RIDGE


def metric_for(task: str) -> str:
    return ACCURACY if task == CLASSIFICATION else NRMSE


def cell_seed(seed: int, fraction_index: int, repeat: int) -> int:
    return int(np.random.SeedSequence([seed, fraction_index, repeat]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    dataset: Dataset
    methods: tuple[str, ...] = METHODS
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    n_repeat: int = 10
    seed: int = 0
    vae_hyper: VaeHyper = field(default_factory=VaeHyper)
    n_kernels: int = 1000
    kappa: float = 25.0
    stat_q: float = 0.05
    svm_C: float = 1.0
    svm_gamma: float | str = "scale"
    svr_epsilon: float = 0.1
    lambda_grid: tuple[float, ...] = tuple(DEFAULT_LAMBDAS)
    n_jobs: int = 1
    record_wall_time: bool = True
    pretrained: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method required")
        self.methods = tuple(m for m in METHODS if m in {canonical_method(x) for x in self.methods})
        fr = tuple(float(f) for f in self.fractions)
        if not fr or any(not 0 < f <= 1 for f in fr):
            raise ValueError("fractions must lie in (0, 1]")
        if list(fr) != sorted(set(fr)):
            raise ValueError("fractions must be sorted ascending and unique")
        self.fractions = fr
        if self.n_repeat < 1:
            raise ValueError("n_repeat must be >= 1")
        self.pretrained = {canonical_method(k): v for k, v in self.pretrained.items()}


@dataclass(frozen=True)
class ResultRecord:
    method: str
    fraction: float
    n_labeled: int
    repeat: int
    metric: str
    value: float
    wall_time_s: float = 0.0
    status: str = OK

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass(frozen=True)
class Aggregate:
    method: str
    fraction: float
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class ResultsTable:
    records: list[ResultRecord]
    aggregates: list[Aggregate]
    methods: tuple[str, ...]
    fractions: tuple[float, ...]
    metric: str
    extractor_info: dict = field(default_factory=dict)

    def lookup(self, method: str, fraction: float) -> Aggregate | None:
        for a in self.aggregates:
            if a.method == method and a.fraction == fraction:
                return a
        return None

    def values(self, method: str, fraction: float) -> np.ndarray:
        return np.array([r.value for r in self.records
                         if r.method == method and r.fraction == fraction and r.ok])


def _sort_key(r: ResultRecord):
    return (METHODS.index(r.method), r.fraction, r.repeat, r.metric)


def aggregate(records: Sequence[ResultRecord]) -> list[Aggregate]:
    """Mean and sample std (n - 1; 0 for a single value) per (method, fraction, metric)."""
    groups: dict[tuple, list[float]] = {}
    for r in sorted(records, key=_sort_key):
        if r.ok:
            groups.setdefault((r.method, r.fraction, r.metric), []).append(r.value)
    out = []
    for (method, fraction, metric), vals in groups.items():
        if not vals:
            raise ValueError(f"empty group {(method, fraction, metric)}")
        v = np.array(vals)
        std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        out.append(Aggregate(method, fraction, metric, float(v.mean()), std, len(v)))
    return out


def _fit_predict(method, F_tr, y_tr, F_te, cfg: ExperimentConfig, task, n_classes, names):
    kind = pair_estimator(method, task)
    if method == STAT and len(y_tr) >= 5 and not np.all(y_tr == y_tr[0]):
        sel = stat_features_select(F_tr, y_tr, task, cfg.stat_q, names)
        F_tr, F_te = F_tr[:, sel.selected_mask], F_te[:, sel.selected_mask]
    if kind == RIDGE:
        model = ridge_fit(F_tr, y_tr, task, cfg.lambda_grid, n_classes=n_classes)
        return ridge_predict(model, F_te)
    model = svm_fit(F_tr, y_tr, task, C=cfg.svm_C, gamma=cfg.svm_gamma, epsilon=cfg.svr_epsilon)
    return svm_predict(model, F_te)


def run_experiment(cfg: ExperimentConfig) -> ResultsTable:
    ds = cfg.dataset
    task = ds.task
    metric = metric_for(task)
    features: dict[str, tuple] = {}
    failures: dict[str, str] = {}
    info: dict[str, dict] = {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            ex = cfg.pretrained.get(method)
            if ex is None:
                ex = make_extractor(method, seed=cfg.seed, vae_hyper=cfg.vae_hyper, n_kernels=cfg.n_kernels,
                                    kappa=cfg.kappa, n_jobs=cfg.n_jobs)
                ex.fit(ds.channels, ds.train)
            F_tr, F_te = ex.transform(ds.train), ex.transform(ds.test)
            if not (np.all(np.isfinite(F_tr)) and np.all(np.isfinite(F_te))):
                raise FloatingPointError("extractor produced non-finite features")
            features[method] = (F_tr, F_te, ex.feature_names())
            info[method] = {"n_features": F_tr.shape[1], "fit_time_s": time.perf_counter() - t0}
        except Exception as exc:  # noqa: BLE001 - a failed extractor must not abort the sweep
            failures[method] = f"error: {type(exc).__name__}: {exc}"
            info[method] = {"error": failures[method]}

    min_size = ds.n_classes if task == CLASSIFICATION else 2
    cells = [(fi, f, r) for fi, f in enumerate(cfg.fractions) for r in range(cfg.n_repeat)]

    def run_cell(cell) -> list[ResultRecord]:
        fi, f, r = cell
        n_lab = labeled_subset_size(ds.n_train, f, min_size)
        try:
            subset = split_labeled_subset(ds, f, cell_seed(cfg.seed, fi, r))
        except Exception as exc:  # noqa: BLE001
            return [ResultRecord(m, f, n_lab, r, metric, math.nan, 0.0, f"error: {exc}") for m in cfg.methods]
        idx = subset.indices
        y_tr = ds.targets_train[idx]
        out = []
        for method in cfg.methods:
            if method in failures:
                out.append(ResultRecord(method, f, len(idx), r, metric, math.nan, 0.0, failures[method]))
                continue
            F_tr, F_te, names = features[method]
            t0 = time.perf_counter()
            try:
                pred = _fit_predict(method, F_tr[idx], y_tr, F_te, cfg, task, ds.n_classes, names)
                value = accuracy(ds.targets_test, pred) if task == CLASSIFICATION else nrmse(ds.targets_test, pred)
                status = OK
            except Exception as exc:  # noqa: BLE001
                value, status = math.nan, f"error: {type(exc).__name__}: {exc}"
            wall = time.perf_counter() - t0 if cfg.record_wall_time else 0.0
            out.append(ResultRecord(method, f, len(idx), r, metric, value, wall, status))
        return out

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            chunks = list(pool.map(run_cell, cells))
    else:
        chunks = [run_cell(c) for c in cells]
    records = sorted((rec for chunk in chunks for rec in chunk), key=_sort_key)
    return ResultsTable(records, aggregate(records), cfg.methods, cfg.fractions, metric, info)


# --------------------------------------------------------------------------
# emission


def _num(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def records_csv(table: ResultsTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in table.records:
        w.writerow([r.method, repr(r.fraction), r.n_labeled, r.repeat, r.metric, _num(r.value),
                    f"{r.wall_time_s:.6f}", r.status])
    return buf.getvalue()


def summary_rows(table: ResultsTable) -> list[list[str]]:
    header = ["fraction", "n_labeled"]
    for m in table.methods:
        header += [m, f"{m}_mean", f"{m}_std"]
    rows = [header]
    for f in table.fractions:
        n_lab = sorted({r.n_labeled for r in table.records if r.fraction == f})
        row = [repr(f), "/".join(str(n) for n in n_lab)]
        for m in table.methods:
            a = table.lookup(m, f)
            if a is None:
                row += ["failed", "nan", "nan"]
            else:
                row += [f"{a.mean:.3f}±{a.std:.3f}", repr(a.mean), repr(a.std)]
        rows.append(row)
    return rows


def summary_csv(table: ResultsTable) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(summary_rows(table))
    return buf.getvalue()


def format_summary(table: ResultsTable) -> str:
    """Fixed-width text rendering of the summary for terminals."""
    rows = summary_rows(table)
    keep = [0, 1] + [2 + 3 * i for i in range(len(table.methods))]
    rows = [[r[i] for i in keep] for r in rows]
    rows[0][0] = "fraction"
    widths = [max(len(r[i]) for r in rows) for i in range(len(keep))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return f"metric: {table.metric}\n" + "\n".join(lines)


def emit_results(table: ResultsTable, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``records.csv`` and ``summary.csv`` (UTF-8) into ``out_dir``."""
    if not table.methods or not table.records:
        raise ValueError("nothing to emit: empty results table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec, summ = out / "records.csv", out / "summary.csv"
    rec.write_text(records_csv(table), encoding="utf-8")
    summ.write_text(summary_csv(table), encoding="utf-8")
    return rec, summ
