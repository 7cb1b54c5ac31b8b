"""Classical comparison methods: full GP, factorized GP, and proximal ADMM GP.

All three train a squared-exponential kernel in log-hyperparameter space
(log lengthscale, log signal std, log noise std). The factorized and proximal
variants operate on spatial partitions and predict through precision-weighted
product-of-experts aggregation over the per-partition models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp
from .errors import ConfigError, NumericError, StructureError
from .gp import GPModel, Prediction
from .qkernels import SquaredExponentialKernel


@dataclass(frozen=True)
class ClassicalHyperparams:
    """Log-space SE hyperparameters; exponentials are always positive."""

    log_lengthscale: float
    log_signal: float
    log_noise: float

    def as_array(self) -> np.ndarray:
        return np.array([self.log_lengthscale, self.log_signal, self.log_noise])

    @classmethod
    def from_array(cls, arr) -> "ClassicalHyperparams":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (3,):
            raise StructureError(f"expected 3 log-hyperparameters, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"non-finite hyperparameters: {arr}")
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    @property
    def lengthscale(self) -> float:
        return float(np.exp(self.log_lengthscale))

    @property
    def signal_variance(self) -> float:
        return float(np.exp(2.0 * self.log_signal))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(2.0 * self.log_noise))

    def kernel(self) -> SquaredExponentialKernel:
        return SquaredExponentialKernel(self.lengthscale, self.signal_variance)


DEFAULT_INIT = ClassicalHyperparams(0.0, 0.0, float(np.log(0.1)))


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-4
    init_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 30


def descend(value_and_grad, x0, config: OptimizerConfig, value_fn=None) -> tuple[np.ndarray, int]:
    """Gradient descent with Armijo backtracking; accepted steps never increase f.

    Trial points where the objective is not evaluable (overflow, indefinite
    covariance) count as failed trials and shrink the step. When ``value_fn``
    is given, backtracking trials use it instead of the full gradient path.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = value_and_grad(x)
    trial = value_fn if value_fn is not None else (lambda p: value_and_grad(p)[0])
    iters = 0
    for _ in range(config.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= config.grad_tol:
            break
        step = config.init_step
        accepted = False
        for _ in range(config.max_backtracks):
            x_new = x - step * g
            try:
                f_new = trial(x_new)
            except NumericError:
                step *= config.backtrack
                continue
            if f_new <= f - config.armijo * step * gnorm**2:
                f, g = value_and_grad(x_new)
                x = x_new
                accepted = True
                break
            step *= config.backtrack
        iters += 1
        if not accepted:
            break
    return x, iters


def full_gp_train(
    X, y, init: ClassicalHyperparams = DEFAULT_INIT, config: OptimizerConfig = OptimizerConfig()
) -> tuple[ClassicalHyperparams, int]:
    """Maximum-likelihood SE hyperparameters on the whole dataset."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise ConfigError("full GP training needs at least two points")

    def value_and_grad(params):
        return gp.se_nll_value_and_grad(X, y, params)

    solution, iters = descend(
        value_and_grad, init.as_array(), config, value_fn=lambda p: gp.se_nll_value(X, y, p)
    )
    return ClassicalHyperparams.from_array(solution), iters


def factorized_nll_value_and_grad(partitions, params) -> tuple[float, np.ndarray]:
    """Sum of per-partition NLLs and gradients under the independence split."""
    total_value = 0.0
    total_grad = np.zeros(3)
    for X_m, y_m in partitions:
        value, grad = gp.se_nll_value_and_grad(X_m, y_m, params)
        total_value += value
        total_grad += grad
    return total_value, total_grad


def fact_gp_train(
    partitions, init: ClassicalHyperparams = DEFAULT_INIT, config: OptimizerConfig = OptimizerConfig()
) -> tuple[ClassicalHyperparams, int]:
    """Shared SE hyperparameters minimizing the factorized (summed) NLL."""
    if len(partitions) < 1:
        raise ConfigError("need at least one partition")

    def value_and_grad(params):
        return factorized_nll_value_and_grad(partitions, params)

    def value_fn(params):
        return sum(gp.se_nll_value(X_m, y_m, params) for X_m, y_m in partitions)

    solution, iters = descend(value_and_grad, init.as_array(), config, value_fn=value_fn)
    return ClassicalHyperparams.from_array(solution), iters


def poe_predict(models: list[GPModel], X_test) -> Prediction:
    """Product-of-experts aggregation: precisions add, means precision-weight."""
    if not models:
        raise ConfigError("need at least one expert")
    preds = [gp.predict(m, X_test) for m in models]
    if len(preds) == 1:
        return preds[0]
    precision = np.zeros_like(preds[0].var)
    weighted = np.zeros_like(preds[0].mean)
    for pred in preds:
        precision += 1.0 / pred.var
        weighted += pred.mean / pred.var
    var = 1.0 / precision
    return Prediction(var * weighted, np.maximum(var, gp.VARIANCE_FLOOR))


def euclidean_admm(
    grad_at,
    num_agents: int,
    init,
    rho: float,
    lipschitz,
    max_iters: int,
    eps_pri: float,
    eps_dual: float,
) -> tuple[np.ndarray, int]:
    """Proximal consensus ADMM in a flat Euclidean parameter space.

    ``grad_at(m, z)`` returns agent ``m``'s local loss gradient at the
    consensus point. Returns the consensus parameters and iterations used.
    """
    if not rho > 0:
        raise ConfigError(f"rho must be positive, got {rho}")
    lipschitz = np.broadcast_to(np.asarray(lipschitz, dtype=float), (num_agents,))
    if not np.all(lipschitz > 0):
        raise ConfigError("Lipschitz constants must be positive")
    init = np.asarray(init, dtype=float)
    thetas = [init.copy() for _ in range(num_agents)]
    psis = [np.zeros_like(init) for _ in range(num_agents)]
    z_prev = None
    iters = 0
    for _ in range(max_iters):
        z = np.mean([t + p / rho for t, p in zip(thetas, psis)], axis=0)
        for m in range(num_agents):
            g = grad_at(m, z)
            thetas[m] = z - (g + psis[m]) / (rho + lipschitz[m])
            psis[m] = psis[m] + rho * (thetas[m] - z)
        iters += 1
        r_pri = float(np.sqrt(sum(np.sum((t - z) ** 2) for t in thetas)))
        r_dual = float("inf") if z_prev is None else rho * float(np.linalg.norm(z - z_prev))
        z_prev = z
        if r_pri <= eps_pri and r_dual <= eps_dual:
            break
    return z_prev, iters


def apx_gp_train(
    partitions,
    init: ClassicalHyperparams = DEFAULT_INIT,
    rho: float = 100.0,
    lipschitz=100.0,
    max_iters: int = 500,
    eps_pri: float = 1e-2,
    eps_dual: float = 1e-2,
) -> tuple[ClassicalHyperparams, int]:
    """Consensus SE hyperparameters via per-partition proximal ADMM steps."""
    if len(partitions) < 1:
        raise ConfigError("need at least one partition")

    def grad_at(m, z):
        X_m, y_m = partitions[m]
        return gp.se_nll_value_and_grad(X_m, y_m, z)[1]

    z, iters = euclidean_admm(
        grad_at, len(partitions), init.as_array(), rho, lipschitz, max_iters, eps_pri, eps_dual
    )
    return ClassicalHyperparams.from_array(z), iters


def fit_experts(partitions, params: ClassicalHyperparams) -> list[GPModel]:
    """One GP per partition, all sharing the trained hyperparameters."""
    kernel = params.kernel()
    return [gp.fit(kernel, X_m, y_m, params.noise_variance) for X_m, y_m in partitions]
