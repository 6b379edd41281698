"""Multichannel feature extractors with a common fit/transform surface.

All extractors are fitted on unlabeled training windows only and treat each
channel separately; per-channel feature blocks are concatenated in channel
order. Fitted extractors persist to a directory holding ``manifest.json``
plus ``.npz`` arrays, which round-trips bit-exactly.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines.pca import PcaModel, pca_fit, pca_transform
from .baselines.rocket import CANDIDATE_LENGTHS, RocketKernels, rocket_generate, rocket_transform
from .baselines.statfeatures import CATALOG_VERSION, FEATURE_NAMES, stat_features_batch
from .nn import Layer, Mlp
from .timeseries import ChannelSpec, instance_normalize
from .vae import TrainHistory, VaeBank, VaeHyper, VaeModel, extract_features, latent_dim_for

VAE, PCA, STAT, ROCKET = "VAE", "PCA", "STAT", "ROCKET"
METHODS = (VAE, PCA, STAT, ROCKET)
FORMAT_VERSION = 1


def canonical_method(name: str) -> str:
    key = name.strip().upper()
    aliases = {"TSFRESH": STAT, "STATS": STAT, "STATISTICAL": STAT}
    key = aliases.get(key, key)
    if key not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(m.lower() for m in METHODS)}")
    return key


def _check_channels(expected: Sequence[ChannelSpec], mats: Sequence[np.ndarray]):
    if len(mats) != len(expected):
        raise ValueError(f"extractor fitted on {len(expected)} channels, got {len(mats)}")
    for ch, m in zip(expected, mats):
        if np.shape(m)[1] != ch.window_len:
            raise ValueError(f"channel {ch.name!r}: window {np.shape(m)[1]} != {ch.window_len}")


class VaeExtractor:
    method = VAE

    def __init__(self, hyper: VaeHyper = VaeHyper(), seed: int = 0, n_jobs: int = 1):
        self.hyper = hyper
        self.seed = seed
        self.n_jobs = n_jobs
        self.bank: VaeBank | None = None

    def fit(self, channels: Sequence[ChannelSpec], train: Sequence[np.ndarray]) -> "VaeExtractor":
        self.bank = VaeBank.fit(channels, train, self.hyper, self.seed, self.n_jobs)
        return self

    @property
    def channels(self):
        return self.bank.channels

    def transform(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        return extract_features(self.bank, mats)

    def feature_names(self) -> list[str]:
        return [f"{m.channel.name}__z{j}" for m in self.bank.models for j in range(m.latent_dim)]


class PcaExtractor:
    """Per-channel PCA with ``window // kappa`` components (at least 1)."""

    method = PCA

    def __init__(self, kappa: float = 25.0, normalize: bool = False):
        self.kappa = kappa
        self.normalize = normalize
        self.channels: tuple[ChannelSpec, ...] = ()
        self.models: list[PcaModel] = []

    def _prep(self, m):
        m = np.asarray(m, dtype=np.float64)
        return instance_normalize(m) if self.normalize else m

    def fit(self, channels, train) -> "PcaExtractor":
        self.channels = tuple(channels)
        self.models = []
        for ch, m in zip(channels, train):
            X = self._prep(m)
            k = min(latent_dim_for(ch.window_len, self.kappa), X.shape[0], X.shape[1])
            self.models.append(pca_fit(X, k))
        return self

    def transform(self, mats) -> np.ndarray:
        _check_channels(self.channels, mats)
        return np.concatenate([pca_transform(p, self._prep(m)) for p, m in zip(self.models, mats)], axis=1)

    def feature_names(self) -> list[str]:
        return [f"{ch.name}__pc{j}" for ch, p in zip(self.channels, self.models) for j in range(p.n_components)]


class StatExtractor:
    """Fixed statistical catalog per channel; nothing to learn at fit time."""

    method = STAT

    def __init__(self):
        self.channels: tuple[ChannelSpec, ...] = ()

    def fit(self, channels, train) -> "StatExtractor":
        self.channels = tuple(channels)
        return self

    def transform(self, mats) -> np.ndarray:
        _check_channels(self.channels, mats)
        return np.concatenate([stat_features_batch(m, ch.sampling_rate_hz)
                               for ch, m in zip(self.channels, mats)], axis=1)

    def feature_names(self) -> list[str]:
        return [f"{ch.name}__{f}" for ch in self.channels for f in FEATURE_NAMES]


class RocketExtractor:
    """Rocket kernels generated per channel (seed ``seed + c``).

    Windows are instance-normalized first. Channels shorter than the longest
    kernel are zero-padded on the right up to that length.
    """

    method = ROCKET

    def __init__(self, n_kernels: int = 1000, seed: int = 0, normalize: bool = True):
        self.n_kernels = n_kernels
        self.seed = seed
        self.normalize = normalize
        self.channels: tuple[ChannelSpec, ...] = ()
        self.kernels: list[RocketKernels] = []

    @staticmethod
    def _input_len(ch: ChannelSpec) -> int:
        return max(ch.window_len, max(CANDIDATE_LENGTHS))

    def _prep(self, ch, m):
        m = np.asarray(m, dtype=np.float64)
        if self.normalize:
            m = instance_normalize(m)
        short = self._input_len(ch) - m.shape[1]
        return np.pad(m, ((0, 0), (0, short))) if short > 0 else m

    def fit(self, channels, train=None) -> "RocketExtractor":
        self.channels = tuple(channels)
        self.kernels = [rocket_generate(self.n_kernels, self._input_len(ch), self.seed + c)
                        for c, ch in enumerate(channels)]
        return self

    def transform(self, mats) -> np.ndarray:
        _check_channels(self.channels, mats)
        return np.concatenate([rocket_transform(self._prep(ch, m), k)
                               for ch, m, k in zip(self.channels, mats, self.kernels)], axis=1)

    def feature_names(self) -> list[str]:
        return [f"{ch.name}__k{i}_{kind}" for ch in self.channels
                for i in range(self.n_kernels) for kind in ("ppv", "max")]


def make_extractor(method: str, *, seed: int = 0, vae_hyper: VaeHyper | None = None, n_kernels: int = 1000,
                   kappa: float = 25.0, n_jobs: int = 1):
    method = canonical_method(method)
    if method == VAE:
        hyper = vae_hyper if vae_hyper is not None else VaeHyper(kappa=kappa)
        return VaeExtractor(hyper, seed, n_jobs)
    if method == PCA:
        return PcaExtractor(kappa)
    if method == STAT:
        return StatExtractor()
    return RocketExtractor(n_kernels, seed)


# --------------------------------------------------------------------------
# persistence


def _channels_json(channels):
    return [asdict(ch) for ch in channels]


def _channels_from(entries):
    return tuple(ChannelSpec(e["name"], float(e["sampling_rate_hz"]), int(e["window_len"])) for e in entries)


def _save_mlp(prefix: str, net: Mlp, arrays: dict) -> list[str]:
    for i, layer in enumerate(net.layers):
        arrays[f"{prefix}{i}_W"] = layer.weights
        arrays[f"{prefix}{i}_b"] = layer.bias
    return [layer.activation for layer in net.layers]


def _load_mlp(prefix: str, acts: list[str], arrays) -> Mlp:
    return Mlp([Layer(arrays[f"{prefix}{i}_W"], arrays[f"{prefix}{i}_b"], a) for i, a in enumerate(acts)])


def save_vae_model(model: VaeModel, path: str | Path):
    """One channel's VAE as a single ``.npz`` (arrays plus JSON metadata)."""
    arrays: dict[str, np.ndarray] = {}
    meta = {
        "channel": asdict(model.channel),
        "latent_dim": model.latent_dim,
        "encoder_activations": _save_mlp("enc", model.encoder, arrays),
        "decoder_activations": _save_mlp("dec", model.decoder, arrays),
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_vae_model(path: str | Path) -> VaeModel:
    with np.load(path) as arrays:
        meta = json.loads(str(arrays["meta"]))
        enc = _load_mlp("enc", meta["encoder_activations"], arrays)
        dec = _load_mlp("dec", meta["decoder_activations"], arrays)
    ch = meta["channel"]
    return VaeModel(enc, dec, int(meta["latent_dim"]),
                    ChannelSpec(ch["name"], float(ch["sampling_rate_hz"]), int(ch["window_len"])))


def save_extractor(extractor, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"format_version": FORMAT_VERSION, "method": extractor.method,
                "channels": _channels_json(extractor.channels)}
    if isinstance(extractor, VaeExtractor):
        bank = extractor.bank
        files = []
        for c, model in enumerate(bank.models):
            name = f"vae_{c:03d}_{model.channel.name}.npz"
            save_vae_model(model, out / name)
            files.append(name)
        hist = [{"best_epoch": h.best_epoch, "n_epochs": h.n_epochs, "stopped_early": h.stopped_early,
                 "best_val_elbo": h.val_elbo[h.best_epoch] if h.n_epochs else None}
                for h in bank.histories]
        manifest.update(hyper=asdict(bank.hyper), seed=bank.seed, kappa=bank.hyper.kappa,
                        channel_seeds=[bank.seed + c for c in range(len(bank.models))],
                        latent_dims=[m.latent_dim for m in bank.models], models=files, training=hist)
    elif isinstance(extractor, PcaExtractor):
        arrays = {}
        for c, p in enumerate(extractor.models):
            arrays[f"mean_{c}"] = p.mean
            arrays[f"components_{c}"] = p.components
            arrays[f"explained_variance_{c}"] = p.explained_variance
        np.savez(out / "pca.npz", **arrays)
        manifest.update(kappa=extractor.kappa, normalize=extractor.normalize,
                        n_components=[p.n_components for p in extractor.models])
    elif isinstance(extractor, StatExtractor):
        manifest.update(catalog_version=CATALOG_VERSION, feature_names=list(FEATURE_NAMES))
    elif isinstance(extractor, RocketExtractor):
        arrays = {}
        for c, k in enumerate(extractor.kernels):
            arrays[f"lengths_{c}"] = k.lengths
            arrays[f"weights_{c}"] = k.weights
            arrays[f"biases_{c}"] = k.biases
            arrays[f"dilations_{c}"] = k.dilations
            arrays[f"padded_{c}"] = k.padded
            arrays[f"input_len_{c}"] = np.array(k.input_len)
        np.savez(out / "rocket.npz", **arrays)
        manifest.update(n_kernels=extractor.n_kernels, seed=extractor.seed, normalize=extractor.normalize)
    else:
        raise TypeError(f"cannot persist {type(extractor).__name__}")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return json.loads(path.read_text())


def load_extractor(path: str | Path):
    root = Path(path)
    if root.is_file():
        root = root.parent
    manifest = read_manifest(root)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported extractor format {manifest.get('format_version')!r}")
    method = manifest["method"]
    channels = _channels_from(manifest["channels"])
    if method == VAE:
        hyper = VaeHyper(**manifest["hyper"])
        ex = VaeExtractor(hyper, manifest["seed"])
        models = [load_vae_model(root / f) for f in manifest["models"]]
        ex.bank = VaeBank(models, hyper, manifest["seed"], [])
        return ex
    if method == PCA:
        ex = PcaExtractor(manifest["kappa"], manifest["normalize"])
        ex.channels = channels
        with np.load(root / "pca.npz") as a:
            ex.models = [PcaModel(a[f"mean_{c}"], a[f"components_{c}"], a[f"explained_variance_{c}"])
                         for c in range(len(channels))]
        return ex
    if method == STAT:
        if manifest.get("catalog_version") != CATALOG_VERSION:
            raise ValueError("statistical feature catalog version mismatch")
        return StatExtractor().fit(channels, None)
    if method == ROCKET:
        ex = RocketExtractor(manifest["n_kernels"], manifest["seed"], manifest["normalize"])
        ex.channels = channels
        with np.load(root / "rocket.npz") as a:
            ex.kernels = [RocketKernels(a[f"lengths_{c}"], a[f"weights_{c}"], a[f"biases_{c}"],
                                        a[f"dilations_{c}"], a[f"padded_{c}"], int(a[f"input_len_{c}"]))
                          for c in range(len(channels))]
        return ex
    raise ValueError(f"unknown method {method!r} in manifest")
