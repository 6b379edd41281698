"""Downstream estimators: ridge with cross-validated penalty and kernel SVMs.

Run: python3 demos/03_estimators.py
"""
import numpy as np

from mtsvae.estimators import dual_residuals, ridge_fit, ridge_predict, svm_fit, svm_predict

rng = np.random.default_rng(0)

# %% XOR is not linearly separable: ridge fails, the RBF machine does not
X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
y = np.array([0, 0, 1, 1])
print("ridge on XOR:", ridge_predict(ridge_fit(X, y, "classification"), X))
svm = svm_fit(X, y, "classification")
print("svm on XOR:  ", svm_predict(svm, X))
print("dual residuals (box, equality):", dual_residuals(svm))

# %% Ridge chooses its penalty by generalized cross-validation
n, d = 80, 30
X = rng.standard_normal((n, d))
w = np.zeros(d)
w[:3] = (2.0, -1.0, 0.5)
y = X @ w + 0.3 * rng.standard_normal(n)
model = ridge_fit(X, y, "regression")
print(f"selected penalty {model.lam:.3g}; leading coefficients", np.round(model.coef.ravel()[:5], 2))

# %% Epsilon-insensitive regression on a noisy sine
x = np.sort(rng.uniform(0, 2 * np.pi, 60))[:, None]
t = np.sin(x[:, 0]) + 0.1 * rng.standard_normal(60)
svr = svm_fit(x, t, "regression", C=10.0)
grid = np.linspace(0, 2 * np.pi, 7)[:, None]
print("svr:", np.round(svm_predict(svr, grid), 2))
print("sin:", np.round(np.sin(grid[:, 0]), 2))
