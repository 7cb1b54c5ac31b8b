"""Distributed quantum Gaussian process regression.

Quantum-kernel GP models whose circuit hyperparameters live on a period-pi
torus and are trained across agents by a consensus proximal ADMM, plus
classical distributed-GP baselines and a benchmark harness.
"""

__version__ = "0.1.0"

from .pipeline import RunResult, TrainConfig, baseline_train, benchmark, dqgp_train

__all__ = [
    "RunResult",
    "TrainConfig",
    "baseline_train",
    "benchmark",
    "dqgp_train",
    "__version__",
]
