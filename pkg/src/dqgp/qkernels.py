"""Quantum kernels (fidelity and projected) and classical covariance helpers.

The projected quantum kernel (PQK) measures a set of Pauli observables on the
encoded state of every input, producing a classical feature vector per point,
and applies a classical outer kernel (Gaussian or Matern-3/2) to those
features. Gram assembly caches features per point, so an N x N matrix costs N
circuit evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import encodings, statevec
from .encodings import CircuitSpec
from .errors import ConfigError, StructureError
from .statevec import PauliString

OBSERVABLE_KINDS = ("pauli_z_global", "local_z", "mixed_pairs", "xyz_per_qubit")
OUTER_KINDS = ("gaussian", "matern15")

# Count of quantum gram evaluations, used to audit the parameter-shift
# schedule (2P shifted grams + 1 base gram per gradient).
_GRAM_EVALS = 0


def gram_eval_count() -> int:
    return _GRAM_EVALS


def reset_gram_eval_count() -> None:
    global _GRAM_EVALS
    _GRAM_EVALS = 0


def _bump_gram_evals() -> None:
    global _GRAM_EVALS
    _GRAM_EVALS += 1


@dataclass(frozen=True)
class ObservableSet:
    """Named family of Pauli strings measured to form PQK features."""

    kind: str
    strings: tuple[PauliString, ...]

    def __post_init__(self):
        if not self.strings:
            raise ConfigError("observable set must be nonempty")

    @property
    def size(self) -> int:
        return len(self.strings)


def observable_set(kind: str, num_qubits: int) -> ObservableSet:
    """Build the named observable family for a ``num_qubits`` register.

    ``xyz_per_qubit`` measures X, Y and Z on every qubit (3q strings, the
    configuration used by the benchmark experiments). ``mixed_pairs`` pins the
    pairwise family to ``Z_i Z_{i+1}`` and ``X_i Y_{i+1}`` on adjacent pairs.
    """
    if num_qubits < 1:
        raise ConfigError("need at least one qubit")
    if kind == "pauli_z_global":
        strings = [PauliString.of({i: "Z" for i in range(num_qubits)})]
    elif kind == "local_z":
        strings = [PauliString.of({i: "Z"}) for i in range(num_qubits)]
    elif kind == "mixed_pairs":
        if num_qubits < 2:
            raise ConfigError("mixed_pairs needs at least two qubits")
        strings = []
        for i in range(num_qubits - 1):
            strings.append(PauliString.of({i: "Z", i + 1: "Z"}))
            strings.append(PauliString.of({i: "X", i + 1: "Y"}))
    elif kind == "xyz_per_qubit":
        strings = []
        for i in range(num_qubits):
            strings.extend(PauliString.of({i: ax}) for ax in ("X", "Y", "Z"))
    else:
        raise ConfigError(f"unknown observable kind {kind!r}")
    return ObservableSet(kind, tuple(strings))


@dataclass(frozen=True)
class OuterKernel:
    """Classical kernel applied to PQK feature vectors."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in OUTER_KINDS:
            raise ConfigError(f"unknown outer kernel {self.kind!r}")
        if not self.param > 0:
            raise ConfigError(f"outer kernel parameter must be positive, got {self.param}")

    def from_sq_distances(self, sq_dists: np.ndarray) -> np.ndarray:
        sq_dists = np.maximum(sq_dists, 0.0)
        if self.kind == "gaussian":
            return np.exp(-self.param * sq_dists)
        r = np.sqrt(sq_dists) * (np.sqrt(3.0) / self.param)
        return (1.0 + r) * np.exp(-r)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric kernel matrix plus the noise variance applied on its diagonal."""

    values: np.ndarray
    noise_variance: float

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ConfigError(f"noise variance must be nonnegative, got {self.noise_variance}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def covariance(self) -> np.ndarray:
        return self.values + self.noise_variance * np.eye(self.n)


def pqk_features(spec: CircuitSpec, x, theta, obs: ObservableSet) -> np.ndarray:
    """Feature vector of Pauli expectations for one input; components in [-1, 1]."""
    return pqk_feature_matrix(spec, np.atleast_2d(x), theta, obs)[0]


def pqk_feature_matrix(spec: CircuitSpec, X, theta, obs: ObservableSet) -> np.ndarray:
    """Per-point feature vectors, shape ``(n, obs.size)``; n circuit evaluations."""
    for s in obs.strings:
        if s.max_qubit() >= spec.num_qubits:
            raise StructureError("observable acts on qubits outside the circuit register")
    amps = encodings.evaluate_batch(spec, X, theta)
    cols = [statevec.expectation_amps(amps, s, spec.num_qubits) for s in obs.strings]
    return np.stack(cols, axis=1)


def fidelity_kernel(spec: CircuitSpec, x, x2, theta) -> float:
    """Squared overlap of the two encoded states, in [0, 1]."""
    a = encodings.evaluate(spec, x, theta).amplitudes
    b = encodings.evaluate(spec, x2, theta).amplitudes
    return float(np.abs(np.vdot(a, b)) ** 2)


def pqk_kernel(spec: CircuitSpec, x, x2, theta, obs: ObservableSet, outer: OuterKernel) -> float:
    """Outer kernel applied to the two points' PQK feature vectors."""
    f = pqk_features(spec, x, theta, obs)
    f2 = pqk_features(spec, x2, theta, obs)
    d2 = float(np.sum((f - f2) ** 2))
    return float(outer.from_sq_distances(np.array(d2)))


def classical_kernel(x, x2, lengthscale: float, signal_variance: float = 1.0) -> float:
    """Squared-exponential covariance used by the classical baselines."""
    if not lengthscale > 0 or not signal_variance > 0:
        raise ConfigError("lengthscale and signal variance must be positive")
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return float(signal_variance * np.exp(-np.sum((x - x2) ** 2) / (2.0 * lengthscale**2)))


def _outer_on_features(F1: np.ndarray, F2: np.ndarray, outer: OuterKernel) -> np.ndarray:
    return outer.from_sq_distances(cdist(F1, F2, "sqeuclidean"))


def gram(
    spec: CircuitSpec,
    X,
    theta,
    obs: ObservableSet,
    outer: OuterKernel,
    noise_variance: float,
) -> GramMatrix:
    """PQK gram matrix over ``X`` with per-point feature caching."""
    X = np.atleast_2d(X)
    if X.shape[0] < 1:
        raise StructureError("gram needs at least one point")
    _bump_gram_evals()
    F = pqk_feature_matrix(spec, X, theta, obs)
    K = _outer_on_features(F, F, outer)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return GramMatrix(K, noise_variance)


def fidelity_gram(spec: CircuitSpec, X, theta, noise_variance: float) -> GramMatrix:
    """Fidelity-kernel gram; states cached per point, overlaps pairwise."""
    X = np.atleast_2d(X)
    if X.shape[0] < 1:
        raise StructureError("gram needs at least one point")
    _bump_gram_evals()
    amps = encodings.evaluate_batch(spec, X, theta)
    overlaps = amps @ amps.conj().T
    K = np.abs(overlaps) ** 2
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return GramMatrix(K, noise_variance)


class ProjectedQuantumKernel:
    """PQK bound to fixed circuit parameters, for GP fitting and prediction."""

    def __init__(self, spec: CircuitSpec, theta, obs: ObservableSet, outer: OuterKernel):
        self.spec = spec
        self.theta = np.asarray(theta, dtype=float)
        self.obs = obs
        self.outer = outer

    def gram(self, X) -> np.ndarray:
        return gram(self.spec, X, self.theta, self.obs, self.outer, 0.0).values

    def cross(self, X1, X2) -> np.ndarray:
        F1 = pqk_feature_matrix(self.spec, np.atleast_2d(X1), self.theta, self.obs)
        F2 = pqk_feature_matrix(self.spec, np.atleast_2d(X2), self.theta, self.obs)
        return _outer_on_features(F1, F2, self.outer)

    def diag(self, X) -> np.ndarray:
        return np.ones(np.atleast_2d(X).shape[0])


class FidelityQuantumKernel:
    """Fidelity kernel bound to fixed circuit parameters."""

    def __init__(self, spec: CircuitSpec, theta):
        self.spec = spec
        self.theta = np.asarray(theta, dtype=float)

    def gram(self, X) -> np.ndarray:
        return fidelity_gram(self.spec, X, self.theta, 0.0).values

    def cross(self, X1, X2) -> np.ndarray:
        a = encodings.evaluate_batch(self.spec, np.atleast_2d(X1), self.theta)
        b = encodings.evaluate_batch(self.spec, np.atleast_2d(X2), self.theta)
        return np.abs(a @ b.conj().T) ** 2

    def diag(self, X) -> np.ndarray:
        return np.ones(np.atleast_2d(X).shape[0])


class SquaredExponentialKernel:
    """Classical baseline covariance with lengthscale and signal variance."""

    def __init__(self, lengthscale: float, signal_variance: float = 1.0):
        if not lengthscale > 0 or not signal_variance > 0:
            raise ConfigError("lengthscale and signal variance must be positive")
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance

    def gram(self, X) -> np.ndarray:
        return self.cross(X, X)

    def cross(self, X1, X2) -> np.ndarray:
        d2 = cdist(np.atleast_2d(X1), np.atleast_2d(X2), "sqeuclidean")
        return self.signal_variance * np.exp(-d2 / (2.0 * self.lengthscale**2))

    def diag(self, X) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], self.signal_variance)
