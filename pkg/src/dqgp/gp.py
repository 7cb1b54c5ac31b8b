"""Gaussian process core: likelihood, gradients, prediction, and metrics.

Everything is Cholesky-based. Factorizations that fail get escalating diagonal
jitter (1e-8 up to 1e-2) before raising, and the attempted jitters travel with
the error for diagnosis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .errors import DegenerateRangeError, NumericError, StructureError
from .qkernels import GramMatrix

JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2)
VARIANCE_FLOOR = 1e-12


def chol_with_jitter(C: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``C`` (plus the jitter that made it work)."""
    if not np.all(np.isfinite(C)):
        raise NumericError("covariance contains non-finite entries")
    trail = []
    for jitter in JITTER_LADDER:
        try:
            L = cholesky(C + jitter * np.eye(C.shape[0]), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            trail.append(jitter)
    raise NumericError(
        f"covariance not positive definite after jitter up to {JITTER_LADDER[-1]}",
        jitter_trail=trail,
    )


def nll(gram_matrix: GramMatrix, y) -> float:
    """Negative marginal log-likelihood 0.5*(y' C^-1 y + log|C| + N log 2pi)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (gram_matrix.n,):
        raise StructureError(f"targets shape {y.shape} does not match gram size {gram_matrix.n}")
    C = gram_matrix.covariance()
    L, _ = chol_with_jitter(C)
    alpha = cho_solve((L, True), y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return 0.5 * (float(y @ alpha) + logdet + y.size * np.log(2.0 * np.pi))


@dataclass
class GPModel:
    """Fitted GP: kernel, training data, and cached Cholesky machinery."""

    kernel: object
    X: np.ndarray
    y: np.ndarray
    noise_variance: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float


@dataclass
class Prediction:
    """Posterior mean and variance per test point."""

    mean: np.ndarray
    var: np.ndarray


def fit(kernel, X, y, noise_variance: float) -> GPModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise StructureError(f"X has {X.shape[0]} rows but y has shape {y.shape}")
    C = kernel.gram(X) + noise_variance * np.eye(X.shape[0])
    L, jitter = chol_with_jitter(C)
    alpha = cho_solve((L, True), y)
    return GPModel(kernel, X, y, noise_variance, L, alpha, jitter)


def predict(model: GPModel, X_test) -> Prediction:
    """Posterior mean and variance at the test inputs."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    k_star = model.kernel.cross(model.X, X_test)  # (n_train, n_test)
    mean = k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    var = model.kernel.diag(X_test) - np.sum(v**2, axis=0)
    return Prediction(mean, np.maximum(var, VARIANCE_FLOOR))


def nlpd(pred: Prediction, y_true) -> float:
    """Mean negative log predictive density over the test points."""
    y_true = np.asarray(y_true, dtype=float)
    var = np.maximum(pred.var, VARIANCE_FLOOR)
    terms = 0.5 * np.log(2.0 * np.pi * var) + (y_true - pred.mean) ** 2 / (2.0 * var)
    return float(np.mean(terms))


def nrmse(pred_mean, y_true) -> float:
    """RMSE normalized by the test-target range |y_max - y_min|."""
    mean = pred_mean.mean if isinstance(pred_mean, Prediction) else np.asarray(pred_mean)
    y_true = np.asarray(y_true, dtype=float)
    y_range = float(np.max(y_true) - np.min(y_true))
    if y_range == 0.0:
        raise DegenerateRangeError("constant test targets: NRMSE range is zero")
    rmse = float(np.sqrt(np.mean((y_true - mean) ** 2)))
    return rmse / y_range


def se_covariance_and_grads(X, log_params) -> tuple[np.ndarray, list[np.ndarray]]:
    """SE covariance C and dC/d(log lengthscale, log signal, log noise)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    log_params = np.asarray(log_params, dtype=float)
    if not np.all(np.isfinite(log_params)) or np.max(np.abs(log_params)) > 50.0:
        raise NumericError(f"log-hyperparameters out of range: {log_params}")
    log_ell, log_sf, log_se = log_params
    with np.errstate(over="ignore", under="ignore"):
        ell, sf2, se2 = np.exp(log_ell), np.exp(2.0 * log_sf), np.exp(2.0 * log_se)
        d2 = cdist(X, X, "sqeuclidean")
        K = sf2 * np.exp(-d2 / (2.0 * ell**2))
        n = X.shape[0]
        C = K + se2 * np.eye(n)
        dC_dlog_ell = K * (d2 / ell**2)
        dC_dlog_sf = 2.0 * K
        dC_dlog_se = 2.0 * se2 * np.eye(n)
    if not np.all(np.isfinite(C)):
        raise NumericError(f"SE covariance overflowed at log-params {log_params}")
    return C, [dC_dlog_ell, dC_dlog_sf, dC_dlog_se]


def se_nll_value(X, y, log_params) -> float:
    """NLL only (no dense inverse); cheap enough for line-search trials."""
    y = np.asarray(y, dtype=float)
    C, _ = se_covariance_and_grads(X, log_params)
    L, _ = chol_with_jitter(C)
    alpha = cho_solve((L, True), y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return 0.5 * (float(y @ alpha) + logdet + y.size * np.log(2.0 * np.pi))


def se_nll_value_and_grad(X, y, log_params) -> tuple[float, np.ndarray]:
    """NLL and its gradient w.r.t. log SE hyperparameters.

    Gradient components are 0.5 * tr{(C^-1 - C^-1 y y' C^-1) dC/dp}.
    """
    y = np.asarray(y, dtype=float)
    C, grads = se_covariance_and_grads(X, log_params)
    L, _ = chol_with_jitter(C)
    alpha = cho_solve((L, True), y)
    C_inv = cho_solve((L, True), np.eye(C.shape[0]))
    inner = C_inv - np.outer(alpha, alpha)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    value = 0.5 * (float(y @ alpha) + logdet + y.size * np.log(2.0 * np.pi))
    with np.errstate(over="ignore", invalid="ignore"):
        grad = np.array([0.5 * float(np.sum(inner * dC)) for dC in grads])
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NumericError(f"NLL not evaluable at log-params {log_params}")
    return value, grad
