"""Per-channel VAE feature learning for heterogeneous multivariate time series.

The package covers the whole semi-supervised workflow: windowed multichannel
datasets (:mod:`mtsvae.timeseries`), a small numpy neural-network kernel
(:mod:`mtsvae.nn`), per-channel variational autoencoders (:mod:`mtsvae.vae`),
PCA / statistical-feature / Rocket baselines (:mod:`mtsvae.baselines`),
ridge and RBF-SVM estimators (:mod:`mtsvae.estimators`), and the
labeled-fraction benchmark (:mod:`mtsvae.pipeline`).
"""
from .extractors import METHODS, load_extractor, make_extractor, save_extractor
from .pipeline import ExperimentConfig, emit_results, format_summary, run_experiment
from .timeseries import (
    CLASSIFICATION,
    REGRESSION,
    ChannelSpec,
    DataError,
    Dataset,
    SynthSpec,
    instance_normalize,
    load_dataset,
    save_dataset,
    synthesize_dataset,
)
from .vae import VaeBank, VaeHyper, build_vae, extract_features, train_vae

__version__ = "0.1.0"

__all__ = [
    "CLASSIFICATION", "REGRESSION", "METHODS", "ChannelSpec", "DataError", "Dataset", "ExperimentConfig",
    "SynthSpec", "VaeBank", "VaeHyper", "build_vae", "emit_results", "extract_features", "format_summary",
    "instance_normalize", "load_dataset", "load_extractor", "make_extractor", "run_experiment",
    "save_dataset", "save_extractor", "synthesize_dataset", "train_vae", "__version__",
]
