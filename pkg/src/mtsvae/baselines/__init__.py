"""Comparison feature extractors: PCA, statistical features, Rocket."""
from .pca import PcaModel, pca_fit, pca_inverse, pca_transform
from .rocket import CANDIDATE_LENGTHS, RocketKernels, apply_kernel, ppv_max, rocket_generate, rocket_transform
from .statfeatures import (
    FEATURE_NAMES,
    SHIFT_BEHAVIOUR,
    StatFeatureSet,
    benjamini_yekutieli,
    feature_names,
    relevance_p_values,
    stat_features_batch,
    stat_features_extract,
    stat_features_select,
)
