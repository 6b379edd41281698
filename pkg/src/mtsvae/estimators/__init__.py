"""Downstream estimators: closed-form ridge and Gaussian-kernel SVM/SVR."""
from .persist import load_estimator, save_estimator
from .ridge import DEFAULT_LAMBDAS, RidgeModel, Standardizer, ridge_fit, ridge_predict, ridge_solve
from .svm import (
    ConvergenceError,
    SmoResult,
    SvmModel,
    dual_residuals,
    rbf_kernel,
    scale_gamma,
    smo_solve,
    svm_fit,
    svm_predict,
)
