"""Per-channel variational autoencoders and the multi-channel feature bank.

Each univariate channel gets its own fully connected VAE whose size follows
the channel's window length: two tanh hidden layers of half the window, a
linear head producing ``[mu || logvar]`` with ``latent_dim = window // kappa``
units each, and a mirrored decoder with linear output. The learned feature
of a multichannel sample is the concatenation of the per-channel posterior
means.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .nn import LINEAR, TANH, AdamState, Mlp, NumericalError, adam_step, mlp_backward, mlp_forward
from .timeseries import ChannelSpec, instance_normalize

LOGVAR_CLIP = 10.0


@dataclass(frozen=True)
class VaeHyper:
    kappa: float = 25.0
    lr: float = 1e-4
    max_epochs: int = 1000
    batch_size: int | None = None  # None: derived from the number of training rows
    weight_decay: float = 1e-5
    beta_kl: float = 1.0
    patience: int = 20
    min_delta: float = 1e-4
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("kappa", "lr", "max_epochs", "patience", "val_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.weight_decay < 0 or self.beta_kl < 0 or self.min_delta < 0:
            raise ValueError("weight_decay, beta_kl and min_delta must be >= 0")


def default_batch_size(n_train: int) -> int:
    """Power of two near ``n_train / 100``, clamped to [64, 512]."""
    if n_train < 1:
        raise ValueError("n_train must be positive")
    return int(min(max(2 ** round(math.log2(n_train / 100)), 64), 512))


def latent_dim_for(window_len: int, kappa: float) -> int:
    return max(int(window_len // kappa), 1)


@dataclass
class VaeModel:
    encoder: Mlp
    decoder: Mlp
    latent_dim: int
    channel: ChannelSpec

    @property
    def window_len(self) -> int:
        return self.channel.window_len

    def parameters(self) -> list[np.ndarray]:
        return self.encoder.parameters() + self.decoder.parameters()

    def with_parameters(self, params: Sequence[np.ndarray]) -> "VaeModel":
        k = 2 * len(self.encoder.layers)
        return VaeModel(self.encoder.with_parameters(params[:k]), self.decoder.with_parameters(params[k:]),
                        self.latent_dim, self.channel)

    def n_parameters(self) -> int:
        return self.encoder.n_parameters() + self.decoder.n_parameters()


def vae_parameter_count(window_len: int, kappa: float = 25.0) -> int:
    """Closed-form parameter count of :func:`build_vae`."""
    w, h, z = window_len, window_len // 2, latent_dim_for(window_len, kappa)
    encoder = (w * h + h) + (h * h + h) + (h * 2 * z + 2 * z)
    decoder = (z * h + h) + (h * h + h) + (h * w + w)
    return encoder + decoder


def build_vae(channel: ChannelSpec, hyper: VaeHyper = VaeHyper(), seed: int = 0) -> VaeModel:
    w = channel.window_len
    if w < 4:
        raise ValueError(f"channel {channel.name!r}: window_len {w} < 4 is too short for a VAE")
    h = w // 2
    z = latent_dim_for(w, hyper.kappa)
    rng = np.random.default_rng(seed)
    encoder = Mlp.build([w, h, h, 2 * z], [TANH, TANH, LINEAR], rng)
    decoder = Mlp.build([z, h, h, w], [TANH, TANH, LINEAR], rng)
    return VaeModel(encoder, decoder, z, channel)


# --------------------------------------------------------------------------
# building blocks


def _split_head(model: VaeModel, head: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = model.latent_dim
    return head[..., :z], np.clip(head[..., z:], -LOGVAR_CLIP, LOGVAR_CLIP)


def encode(model: VaeModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and log-variance for normalized window(s) ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.window_len:
        raise ValueError(f"window length {x.shape[-1]} != model window {model.window_len}")
    head, _ = mlp_forward(model.encoder, x)
    return _split_head(model, head)


def decode(model: VaeModel, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.latent_dim:
        raise ValueError(f"latent dim {z.shape[-1]} != {model.latent_dim}")
    out, _ = mlp_forward(model.decoder, z)
    return out


def reparameterize(mu: np.ndarray, logvar: np.ndarray, eps: np.ndarray) -> np.ndarray:
    return mu + np.exp(0.5 * np.asarray(logvar)) * eps


def kl_term(mu: np.ndarray, logvar: np.ndarray) -> float | np.ndarray:
    """KL(N(mu, exp(logvar)) || N(0, I)), summed over the last axis."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return 0.5 * np.sum(mu ** 2 + (np.expm1(logvar) - logvar), axis=-1)


def sample_generative(model: VaeModel, seed: int, n: int | None = None) -> np.ndarray:
    """Decode ``z ~ N(0, I)``; one window, or ``n`` windows as rows."""
    rng = np.random.default_rng(seed)
    shape = (model.latent_dim,) if n is None else (n, model.latent_dim)
    return decode(model, rng.standard_normal(shape))


@dataclass
class ElboParts:
    loss: float
    recon_mse: float
    kl: float


def elbo_loss(model: VaeModel, x: np.ndarray, eps: np.ndarray, beta_kl: float = 1.0) -> ElboParts:
    """Negative ELBO of normalized window(s) ``x`` for a fixed noise draw.

    ``recon_mse`` is the per-element squared error and ``kl`` the
    per-window KL divergence, both averaged over rows. The KL enters the
    loss divided by the window length, so the objective equals the
    unit-variance Gaussian negative log-likelihood per element (up to
    constants) plus the KL per element.
    """
    return _elbo(model, x, eps, beta_kl, need_grad=False)[0]


def elbo_grad(model: VaeModel, x: np.ndarray, eps: np.ndarray,
              beta_kl: float = 1.0) -> tuple[ElboParts, list[np.ndarray]]:
    """Loss parts plus gradient w.r.t. ``model.parameters()``."""
    return _elbo(model, x, eps, beta_kl, need_grad=True)


def _elbo(model, x, eps, beta_kl, need_grad):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    n, w = x.shape
    if w != model.window_len:
        raise ValueError(f"window length {w} != model window {model.window_len}")
    if eps.shape != (n, model.latent_dim):
        raise ValueError(f"eps shape {eps.shape} != {(n, model.latent_dim)}")
    head, enc_cache = mlp_forward(model.encoder, x)
    mu, logvar = _split_head(model, head)
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    xt, dec_cache = mlp_forward(model.decoder, z)
    diff = xt - x
    recon = float(np.mean(diff ** 2))
    kl = float(np.mean(kl_term(mu, logvar)))
    loss = recon + beta_kl * kl / w
    if not math.isfinite(loss):
        raise NumericalError("non-finite ELBO")
    parts = ElboParts(loss, recon, kl)
    if not need_grad:
        return parts, None
    d_xt = 2.0 * diff / (n * w)
    dec_grads, d_z = mlp_backward(model.decoder, dec_cache, d_xt)
    scale = beta_kl / (w * n)
    d_mu = d_z + scale * mu
    d_lv = d_z * eps * std * 0.5 + scale * 0.5 * (np.exp(logvar) - 1.0)
    raw_lv = head[:, model.latent_dim:]
    d_lv = np.where(np.abs(raw_lv) < LOGVAR_CLIP, d_lv, 0.0)
    enc_grads, _ = mlp_backward(model.encoder, enc_cache, np.concatenate([d_mu, d_lv], axis=1))
    return parts, enc_grads + dec_grads


# --------------------------------------------------------------------------
# training


@dataclass
class TrainHistory:
    train_elbo: list[float] = field(default_factory=list)
    val_elbo: list[float] = field(default_factory=list)
    recon_term: list[float] = field(default_factory=list)
    kl_term: list[float] = field(default_factory=list)
    initial_train_elbo: float = float("nan")
    initial_val_elbo: float = float("nan")
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def n_epochs(self) -> int:
        return len(self.val_elbo)


def train_vae(data: np.ndarray, model: VaeModel, hyper: VaeHyper = VaeHyper()) -> tuple[VaeModel, TrainHistory]:
    """Fit ``model`` on the rows of ``data`` (raw windows of one channel).

    Rows are instance-normalized, a seeded ``val_fraction`` is held out for
    early stopping, and the parameters of the epoch with the lowest
    validation loss are returned. Validation uses one fixed noise draw so
    that its loss is comparable across epochs.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("training data must be a non-empty matrix")
    if data.shape[0] < 10:
        raise ValueError(f"need at least 10 training windows, got {data.shape[0]}")
    if data.shape[1] != model.window_len:
        raise ValueError(f"window length {data.shape[1]} != model window {model.window_len}")
    x = instance_normalize(data)
    rng = np.random.default_rng(hyper.seed)
    n = x.shape[0]
    n_val = max(1, int(round(hyper.val_fraction * n)))
    perm = rng.permutation(n)
    x_val, x_tr = x[perm[:n_val]], x[perm[n_val:]]
    eps_val = rng.standard_normal((n_val, model.latent_dim))
    batch = hyper.batch_size or default_batch_size(n)
    beta = hyper.beta_kl

    def evaluate(m: VaeModel, xs: np.ndarray, es: np.ndarray) -> ElboParts:
        return elbo_loss(m, xs, es, beta)

    hist = TrainHistory()
    hist.initial_train_elbo = evaluate(model, x_tr, rng.standard_normal((len(x_tr), model.latent_dim))).loss
    hist.initial_val_elbo = evaluate(model, x_val, eps_val).loss

    params = model.parameters()
    state = AdamState.zeros_like(params, hyper.lr)
    best_params, best_val, wait = params, math.inf, 0
    for epoch in range(hyper.max_epochs):
        order = rng.permutation(len(x_tr))
        eps_all = rng.standard_normal((len(x_tr), model.latent_dim))
        total = 0.0
        for start in range(0, len(x_tr), batch):
            idx = order[start:start + batch]
            parts, grads = elbo_grad(model, x_tr[idx], eps_all[idx], beta)
            total += parts.loss * len(idx)
            params, state = adam_step(params, grads, state, hyper.weight_decay)
            model = model.with_parameters(params)
        val = evaluate(model, x_val, eps_val)
        hist.train_elbo.append(total / len(x_tr))
        hist.val_elbo.append(val.loss)
        hist.recon_term.append(val.recon_mse)
        hist.kl_term.append(val.kl)
        if val.loss < best_val:
            if val.loss < best_val - hyper.min_delta:
                wait = 0
            else:
                wait += 1
            best_val, best_params, hist.best_epoch = val.loss, params, epoch
        else:
            wait += 1
        if wait >= hyper.patience:
            hist.stopped_early = True
            break
    return model.with_parameters(best_params), hist


def reconstruction_mse(model: VaeModel, data: np.ndarray) -> float:
    """MSE of ``decode(mu)`` against the instance-normalized rows of ``data``."""
    x = instance_normalize(np.atleast_2d(data))
    mu, _ = encode(model, x)
    return float(np.mean((decode(model, mu) - x) ** 2))


# --------------------------------------------------------------------------
# multichannel bank


@dataclass
class VaeBank:
    models: list[VaeModel]
    hyper: VaeHyper = field(default_factory=VaeHyper)
    seed: int = 0
    histories: list[TrainHistory] = field(default_factory=list)

    @property
    def channels(self) -> tuple[ChannelSpec, ...]:
        return tuple(m.channel for m in self.models)

    @property
    def feature_dim(self) -> int:
        return sum(m.latent_dim for m in self.models)

    @classmethod
    def fit(cls, channels: Sequence[ChannelSpec], train: Sequence[np.ndarray], hyper: VaeHyper = VaeHyper(),
            seed: int = 0, n_jobs: int = 1) -> "VaeBank":
        """Train one VAE per channel; channel ``c`` uses seed ``seed + c``."""
        if len(channels) != len(train):
            raise ValueError("one data matrix per channel required")

        def job(c: int):
            s = seed + c
            model = build_vae(channels[c], hyper, s)
            return train_vae(train[c], model, replace(hyper, seed=s))

        if n_jobs > 1:
            with ThreadPoolExecutor(n_jobs) as pool:
                results = list(pool.map(job, range(len(channels))))
        else:
            results = [job(c) for c in range(len(channels))]
        return cls([r[0] for r in results], hyper, seed, [r[1] for r in results])


def extract_features(bank: VaeBank, rows: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate per-channel posterior means of the given sample rows."""
    if len(rows) != len(bank.models):
        raise ValueError(f"bank has {len(bank.models)} channels, got {len(rows)} matrices")
    blocks = []
    for model, mat in zip(bank.models, rows):
        mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
        if mat.shape[1] != model.window_len:
            raise ValueError(f"channel {model.channel.name!r}: window {mat.shape[1]} != {model.window_len}")
        mu, _ = encode(model, instance_normalize(mat))
        blocks.append(mu)
    return np.concatenate(blocks, axis=1)
