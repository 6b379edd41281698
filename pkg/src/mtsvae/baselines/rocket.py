"""Random convolutional kernel transform (Rocket).

Each kernel is a random dilated 1D convolution; a window is summarized by
the maximum of the kernel response and the proportion of positive values
(PPV), giving two features per kernel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CANDIDATE_LENGTHS = (7, 9, 11)


@dataclass(frozen=True)
class RocketKernels:
    lengths: np.ndarray  # (n_kernels,) int
    weights: np.ndarray  # concatenated, sum(lengths)
    biases: np.ndarray
    dilations: np.ndarray
    padded: np.ndarray  # bool
    input_len: int

    @property
    def n_kernels(self) -> int:
        return len(self.lengths)

    def kernel(self, i: int) -> tuple[np.ndarray, float, int, int]:
        """``(weights, bias, dilation, padding)`` of kernel ``i``."""
        start = int(self.lengths[:i].sum())
        length = int(self.lengths[i])
        d = int(self.dilations[i])
        pad = (length - 1) * d // 2 if self.padded[i] else 0
        return self.weights[start:start + length], float(self.biases[i]), d, pad


def rocket_generate(n_kernels: int, input_len: int, seed: int) -> RocketKernels:
    if n_kernels < 1:
        raise ValueError("need at least one kernel")
    if input_len < max(CANDIDATE_LENGTHS):
        raise ValueError(f"input length {input_len} shorter than the longest kernel ({max(CANDIDATE_LENGTHS)})")
    rng = np.random.default_rng(seed)
    lengths = rng.choice(np.array(CANDIDATE_LENGTHS), size=n_kernels)
    weights = np.empty(lengths.sum())
    biases = np.empty(n_kernels)
    dilations = np.empty(n_kernels, dtype=np.int64)
    padded = np.empty(n_kernels, dtype=bool)
    pos = 0
    for i, length in enumerate(lengths):
        w = rng.standard_normal(length)
        weights[pos:pos + length] = w - w.mean()
        pos += length
        biases[i] = rng.uniform(-1.0, 1.0)
        top = np.log2((input_len - 1) / (length - 1))
        dilations[i] = max(int(2 ** rng.uniform(0.0, top)), 1)
        padded[i] = rng.integers(2) == 1
    return RocketKernels(lengths, weights, biases, dilations, padded, int(input_len))


def apply_kernel(X: np.ndarray, weights: np.ndarray, bias: float, dilation: int, padding: int) -> np.ndarray:
    """Dilated convolution response for each row of ``X``."""
    X = np.atleast_2d(X)
    n, L = X.shape
    span = (len(weights) - 1) * dilation
    out_len = L + 2 * padding - span
    if out_len < 1:
        raise ValueError(f"window of length {L} shorter than kernel span {span + 1}")
    Xp = np.pad(X, ((0, 0), (padding, padding))) if padding else X
    out = np.full((n, out_len), bias)
    for j, wj in enumerate(weights):
        off = j * dilation
        out += wj * Xp[:, off:off + out_len]
    return out


def ppv_max(response: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.mean(response > 0, axis=-1), np.max(response, axis=-1)


def rocket_transform(X: np.ndarray, kernels: RocketKernels) -> np.ndarray:
    """Features ``[ppv_0, max_0, ppv_1, max_1, ...]`` for each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != kernels.input_len:
        raise ValueError(f"window length {X.shape[1]} != kernel input length {kernels.input_len}")
    out = np.empty((X.shape[0], 2 * kernels.n_kernels))
    pos = 0
    for i in range(kernels.n_kernels):
        length = int(kernels.lengths[i])
        w = kernels.weights[pos:pos + length]
        pos += length
        d = int(kernels.dilations[i])
        pad = (length - 1) * d // 2 if kernels.padded[i] else 0
        out[:, 2 * i], out[:, 2 * i + 1] = ppv_max(apply_kernel(X, w, kernels.biases[i], d, pad))
    return out
