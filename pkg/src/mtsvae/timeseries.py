"""Heterogeneous multivariate time series: data model, ingestion and sampling.

A :class:`Dataset` keeps one sample matrix per channel so that channels can
carry different window lengths (sampling rates). Row ``i`` of every channel
matrix describes the same physical sample.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
import numpy as np

NORM_EPS = 1e-8

CLASSIFICATION = "classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)


class DataError(ValueError):
    """Raised for malformed or inconsistent dataset input."""


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    sampling_rate_hz: float
    window_len: int

    def __post_init__(self):
        if not self.sampling_rate_hz > 0:
            raise DataError(f"channel {self.name!r}: sampling rate must be > 0")
        if int(self.window_len) != self.window_len or self.window_len < 1:
            raise DataError(f"channel {self.name!r}: window_len must be a positive integer")

    @classmethod
    def from_duration(cls, name: str, sampling_rate_hz: float, duration_s: float) -> "ChannelSpec":
        # small tolerance so that e.g. 0.2 s * 4000 Hz is not floored to 799
        n = int(math.floor(sampling_rate_hz * duration_s + 1e-9))
        return cls(name, float(sampling_rate_hz), n)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Train/test split of a heterogeneous MTS estimation task.

    ``train`` and ``test`` hold one ``(n_samples, window_len_c)`` float64
    matrix per channel, in the order of ``channels``.
    """

    channels: tuple[ChannelSpec, ...]
    train: tuple[np.ndarray, ...]
    test: tuple[np.ndarray, ...]
    targets_train: np.ndarray
    targets_test: np.ndarray
    task: str
    n_classes: int | None = None
    name: str = "dataset"

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if not self.channels:
            raise DataError("dataset needs at least one channel")
        for split, mats, targets in (("train", self.train, self.targets_train),
                                     ("test", self.test, self.targets_test)):
            if len(mats) != len(self.channels):
                raise DataError(f"{split}: expected {len(self.channels)} channel matrices, got {len(mats)}")
            for ch, m in zip(self.channels, mats):
                if m.ndim != 2 or m.shape[1] != ch.window_len:
                    raise DataError(f"{split}/{ch.name}: expected {ch.window_len} columns, got shape {m.shape}")
                if m.shape[0] != len(targets):
                    raise DataError(f"{split}/{ch.name}: {m.shape[0]} rows but {len(targets)} labels")
                if not np.all(np.isfinite(m)):
                    raise DataError(f"{split}/{ch.name}: non-finite values")
                m.setflags(write=False)
            if not np.all(np.isfinite(targets)):
                raise DataError(f"{split}: non-finite targets")
            targets.setflags(write=False)
        if self.task == CLASSIFICATION:
            if self.n_classes is None or self.n_classes < 2:
                raise DataError("classification needs n_classes >= 2")
            for t in (self.targets_train, self.targets_test):
                if t.size and (t.min() < 0 or t.max() >= self.n_classes):
                    raise DataError(f"class ids must lie in 0..{self.n_classes - 1}")
        if len(self.targets_train) == 0:
            raise DataError("empty training split")

    @property
    def n_sig(self) -> int:
        return len(self.channels)

    @property
    def n_train(self) -> int:
        return len(self.targets_train)

    @property
    def n_test(self) -> int:
        return len(self.targets_test)


# --------------------------------------------------------------------------
# ingestion


def _read_matrix(path: Path, n_cols: int | None) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing file: {path}")
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            if n_cols is not None and len(values) != n_cols:
                raise DataError(f"{path}:{lineno}: expected {n_cols} columns, got {len(values)}")
            rows.append(values)
    if n_cols is None:
        n_cols = 1
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), n_cols)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: NaN or Inf values")
    return arr


def load_dataset(manifest_path: str | Path) -> Dataset:
    """Load a dataset directory described by ``manifest.json``.

    ``manifest_path`` may point at the manifest itself or at its directory.
    Channel entries need ``name`` and ``sampling_rate_hz`` plus either an
    explicit ``window_len`` or a top-level ``duration_s`` from which it is
    derived as ``floor(rate * duration)``.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise DataError(f"missing manifest: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    root = path.parent

    task = manifest.get("task")
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    duration = manifest.get("duration_s")
    channels = []
    for entry in manifest.get("channels", []):
        if "window_len" in entry:
            ch = ChannelSpec(entry["name"], float(entry["sampling_rate_hz"]), int(entry["window_len"]))
            if duration is not None and ch.window_len > ChannelSpec.from_duration(
                    ch.name, ch.sampling_rate_hz, duration).window_len:
                raise DataError(f"channel {ch.name!r}: window_len exceeds rate x duration")
        elif duration is not None:
            ch = ChannelSpec.from_duration(entry["name"], float(entry["sampling_rate_hz"]), float(duration))
        else:
            raise DataError(f"channel {entry.get('name')!r}: no window_len and no duration_s")
        channels.append(ch)
    if not channels:
        raise DataError("manifest lists no channels")

    splits = manifest.get("splits", {"train": "train", "test": "test"})
    data = {}
    for key in ("train", "test"):
        prefix = splits.get(key, key)
        mats = tuple(_read_matrix(root / f"{prefix}_{ch.name}.csv", ch.window_len) for ch in channels)
        labels = _read_matrix(root / f"{prefix}_labels.csv", 1)[:, 0]
        for ch, m in zip(channels, mats):
            if m.shape[0] != labels.shape[0]:
                raise DataError(f"{key}/{ch.name}: {m.shape[0]} rows but {labels.shape[0]} labels")
        if task == CLASSIFICATION:
            if not np.all(labels == np.round(labels)):
                raise DataError(f"{key}: classification labels must be integers")
            labels = labels.astype(np.int64)
        data[key] = (mats, labels)

    n_classes = manifest.get("n_classes")
    if task == CLASSIFICATION and n_classes is None:
        n_classes = int(max(data["train"][1].max(), data["test"][1].max(initial=0))) + 1
    return Dataset(
        channels=tuple(channels),
        train=data["train"][0],
        test=data["test"][0],
        targets_train=data["train"][1],
        targets_test=data["test"][1],
        task=task,
        n_classes=int(n_classes) if task == CLASSIFICATION else None,
        name=manifest.get("name", root.name),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(dataset: Dataset, out_dir: str | Path) -> Path:
    """Write ``dataset`` in the directory layout read by :func:`load_dataset`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": dataset.name,
        "task": dataset.task,
        "channels": [{"name": ch.name, "sampling_rate_hz": ch.sampling_rate_hz, "window_len": ch.window_len}
                     for ch in dataset.channels],
        "splits": {"train": "train", "test": "test"},
    }
    if dataset.task == CLASSIFICATION:
        manifest["n_classes"] = dataset.n_classes
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for split, mats, labels in (("train", dataset.train, dataset.targets_train),
                                ("test", dataset.test, dataset.targets_test)):
        for ch, m in zip(dataset.channels, mats):
            with open(out / f"{split}_{ch.name}.csv", "w", newline="") as fh:
                for row in m:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
        with open(out / f"{split}_labels.csv", "w", newline="") as fh:
            for v in labels:
                fh.write((str(int(v)) if dataset.task == CLASSIFICATION else _fmt(v)) + "\n")
    return out / "manifest.json"


# --------------------------------------------------------------------------
# synthetic stand-in data


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic sinusoid-mixture generator.

    Every channel of every class gets a fixed template of ``n_components``
    sinusoids (frequencies in cycles per window, amplitudes and phases drawn
    from the seed). A sample adds a random phase shift drawn from
    ``U(0, phase_jitter)`` to all components, optionally perturbs the
    frequencies by ``freq_jitter`` (relative), and adds white noise.
    Nuisance scale and level changes per sample and channel are controlled by
    ``gain_spread`` (gain ``exp(U(-g, g))``) and ``offset_std`` (Gaussian DC
    offset); both are removed by instance normalization.

    For regression the target ``a ~ U(0, 1)`` scales the dominant first
    component of each channel (amplitude ``2a`` times its template value)
    while the others keep a fixed, halved amplitude, so both the raw level
    and the normalized shape carry the target.
    """

    n_sig: int = 2
    n_train: int = 100
    n_test: int = 50
    task: str = CLASSIFICATION
    n_classes: int = 3
    rates_hz: tuple[float, ...] | None = None
    duration_s: float = 1.0
    noise_std: float = 0.1
    n_components: int = 2
    max_cycles: float | None = None
    phase_jitter: float = 2 * math.pi
    freq_jitter: float = 0.0
    gain_spread: float = 0.0
    offset_std: float = 0.0
    name: str = "synthetic"

    def channel_specs(self) -> tuple[ChannelSpec, ...]:
        rates = self.rates_hz
        if rates is None:
            rates = tuple(max(100.0 / 2 ** c, 8.0) for c in range(self.n_sig))
        if len(rates) != self.n_sig:
            raise DataError("rates_hz must have one entry per channel")
        return tuple(ChannelSpec.from_duration(f"ch{c}", r, self.duration_s) for c, r in enumerate(rates))


def synthesize_dataset(spec: SynthSpec, seed: int) -> Dataset:
    """Draw a deterministic synthetic dataset for ``(spec, seed)``."""
    if spec.n_sig < 1 or spec.n_train < 1 or spec.n_test < 1:
        raise DataError("synthetic spec needs >= 1 channel, train and test sample")
    if spec.task not in TASKS:
        raise DataError(f"unknown task {spec.task!r}")
    if spec.task == CLASSIFICATION and spec.n_classes < 2:
        raise DataError("classification needs n_classes >= 2")
    if spec.n_components < 1 or spec.noise_std < 0:
        raise DataError("invalid generator parameters")
    channels = spec.channel_specs()
    for ch in channels:
        if ch.window_len < 4:
            raise DataError(f"channel {ch.name}: window shorter than 4 samples")
    n_templates = spec.n_classes if spec.task == CLASSIFICATION else 1

    trng = np.random.default_rng([seed, 0])
    templates = []
    for ch in channels:
        top = spec.max_cycles if spec.max_cycles is not None else ch.window_len / 8
        top = max(min(top, ch.window_len / 2 - 1), 1.5)
        freqs = trng.uniform(1.0, top, size=(n_templates, spec.n_components))
        amps = trng.uniform(0.5, 1.5, size=(n_templates, spec.n_components))
        phases = trng.uniform(0, 2 * np.pi, size=(n_templates, spec.n_components))
        templates.append((freqs, amps, phases))

    def draw(n: int, rng: np.random.Generator):
        if spec.task == CLASSIFICATION:
            y = rng.permutation(np.arange(n) % spec.n_classes).astype(np.int64)
            tid = y
            gain = None
        else:
            y = rng.uniform(0.0, 1.0, size=n)
            tid = np.zeros(n, dtype=np.int64)
            gain = y
        shift = rng.uniform(0.0, spec.phase_jitter, size=n)
        mats = []
        for ch, (freqs, amps, phases) in zip(channels, templates):
            t = np.arange(ch.window_len) / ch.window_len
            f = freqs[tid] * (1 + spec.freq_jitter * rng.standard_normal((n, spec.n_components)))
            a = amps[tid].copy()
            if spec.task == REGRESSION:
                a[:, 0] *= 2.0 * gain
                a[:, 1:] *= 0.5
            ph = phases[tid] + shift[:, None]
            x = np.einsum("nk,nkt->nt", a, np.sin(2 * np.pi * f[:, :, None] * t + ph[:, :, None]))
            if spec.gain_spread > 0:
                x *= np.exp(rng.uniform(-spec.gain_spread, spec.gain_spread, size=(n, 1)))
            if spec.offset_std > 0:
                x += spec.offset_std * rng.standard_normal((n, 1))
            if spec.noise_std > 0:
                x += spec.noise_std * rng.standard_normal(x.shape)
            mats.append(x)
        return tuple(mats), y

    train, y_train = draw(spec.n_train, np.random.default_rng([seed, 1]))
    test, y_test = draw(spec.n_test, np.random.default_rng([seed, 2]))
    return Dataset(
        channels=channels,
        train=train,
        test=test,
        targets_train=y_train,
        targets_test=y_test,
        task=spec.task,
        n_classes=spec.n_classes if spec.task == CLASSIFICATION else None,
        name=spec.name,
    )


# --------------------------------------------------------------------------
# windowing and normalization


def instance_normalize(window: np.ndarray) -> np.ndarray:
    """Standardize each window to zero mean and unit population std.

    Accepts a single window or a matrix with one window per row; constant
    windows map to zeros.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.shape[-1] == 0:
        raise ValueError("cannot normalize an empty window")
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    return (x - mean) / (std + NORM_EPS)


def segment_stream(signal: np.ndarray, rate_hz: float, duration_s: float, hop_s: float) -> np.ndarray:
    """Cut a long recording into consecutive fixed-length windows.

    The trailing partial window is dropped.
    """
    x = np.asarray(signal, dtype=np.float64)
    width = int(math.floor(duration_s * rate_hz + 1e-9))
    hop = int(math.floor(hop_s * rate_hz + 1e-9))
    if width < 1:
        raise ValueError("window must span at least one sample")
    if hop < 1:
        raise ValueError("hop must span at least one sample")
    if x.shape[0] < width:
        raise ValueError(f"signal of length {x.shape[0]} is shorter than one window ({width})")
    starts = np.arange(0, x.shape[0] - width + 1, hop)
    return np.stack([x[s:s + width] for s in starts])


# --------------------------------------------------------------------------
# labeled subsets


@dataclass(frozen=True)
class LabeledSubset:
    indices: np.ndarray
    fraction: float


def labeled_subset_size(n_train: int, fraction: float, min_size: int) -> int:
    # truncation, not rounding: 1% of 70152 -> 701, 2% of 1544 -> 30
    n = int(math.floor(fraction * n_train + 1e-9))
    return min(max(n, min_size), n_train)


def split_labeled_subset(dataset: Dataset, fraction: float, seed: int) -> LabeledSubset:
    """Draw the labeled part of the training split.

    Classification subsets are stratified: every class present in the
    training split gets at least one index and the rest is allocated in
    proportion to class frequencies (largest remainder).
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    n = dataset.n_train
    rng = np.random.default_rng(seed)
    if dataset.task == REGRESSION:
        size = labeled_subset_size(n, fraction, 2)
        idx = rng.choice(n, size=size, replace=False)
        return LabeledSubset(np.sort(idx), fraction)

    size = labeled_subset_size(n, fraction, dataset.n_classes)
    y = dataset.targets_train
    classes, counts = np.unique(y, return_counts=True)
    quota = _stratified_quota(counts, size)
    picked = []
    for cls, q in zip(classes, quota):
        members = np.flatnonzero(y == cls)
        picked.append(rng.choice(members, size=q, replace=False))
    return LabeledSubset(np.sort(np.concatenate(picked)), fraction)


def _stratified_quota(counts: np.ndarray, size: int) -> np.ndarray:
    if size >= counts.sum():
        return counts.copy()
    k = len(counts)
    if size < k:
        # not every class fits; the largest classes win
        quota = np.zeros(k, dtype=np.int64)
        quota[np.argsort(-counts, kind="stable")[:size]] = 1
        return quota
    quota = np.ones(k, dtype=np.int64)
    rest = size - k
    share = (counts - 1) / (counts - 1).sum() * rest if (counts - 1).sum() else np.zeros(k)
    extra = np.minimum(np.floor(share).astype(np.int64), counts - 1)
    quota += extra
    remaining = size - quota.sum()
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    i = 0
    while remaining > 0:
        c = order[i % k]
        if quota[c] < counts[c]:
            quota[c] += 1
            remaining -= 1
        i += 1
    return quota
