"""The three baseline feature extractors on one dataset.

PCA on raw windows, a catalog of 24 statistics per channel with
relevance-based selection, and random convolutional kernels.

Run: python3 demos/02_baselines.py
"""
import numpy as np

from mtsvae import SynthSpec, make_extractor, synthesize_dataset
from mtsvae.baselines import pca_fit, pca_inverse, pca_transform, stat_features_batch, stat_features_select
from mtsvae.baselines import feature_names, rocket_generate, rocket_transform

ds = synthesize_dataset(SynthSpec(n_sig=2, n_train=200, n_test=50), seed=1)
X = ds.train[0]

# %% PCA: reconstruction error falls as components are added
for k in (1, 2, 4, 8, 16):
    m = pca_fit(X, k)
    err = np.mean((pca_inverse(m, pca_transform(m, X)) - X) ** 2)
    print(f"PCA k={k:2d}: explained {m.explained_variance.sum():8.2f}, reconstruction MSE {err:.4f}")

# %% Statistical features and the false-discovery-controlled selection
F = stat_features_batch(X, ds.channels[0].sampling_rate_hz)
sel = stat_features_select(F, ds.targets_train, ds.task, q=0.05)
names = feature_names([ds.channels[0].name])
print(f"{sel.n_selected} of {F.shape[1]} statistics kept:",
      [n for n, keep in zip(names, sel.selected_mask) if keep])

# %% Random kernels: two features each (proportion of positive values, max)
ks = rocket_generate(200, X.shape[1], seed=0)
R = rocket_transform(X, ks)
print("rocket features", R.shape, "PPV range", R[:, ::2].min(), R[:, ::2].max())

# %% The same three through the common extractor interface
for method in ("PCA", "STAT", "ROCKET"):
    ex = make_extractor(method, seed=0, n_kernels=200).fit(ds.channels, ds.train)
    print(f"{method:6s} -> {ex.transform(ds.test).shape[1]} features")
