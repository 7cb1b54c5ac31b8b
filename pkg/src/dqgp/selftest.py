"""Fast invariant checks behind the ``selftest`` CLI verb.

A green selftest is the documented prerequisite for quoting benchmark
numbers. Each check is self-contained, seeded, and takes well under a second;
the full pytest suite covers the same ground far more thoroughly.
"""

from __future__ import annotations

import numpy as np

from . import baselines, encodings, gp, qkernels, statevec, torus
from .qkernels import GramMatrix


def _check_statevector_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    for q in (1, 2, 3):
        state = rng.standard_normal(2**q) + 1j * rng.standard_normal(2**q)
        state /= np.linalg.norm(state)
        gates = [statevec.h(0), statevec.rx(q - 1, 0.7), statevec.ry(0, 1.3), statevec.rz(q - 1, 2.1)]
        if q >= 2:
            gates += [statevec.cnot(0, 1), statevec.crz(1, 0, 0.9), statevec.swap(0, q - 1)]
        for gate in gates:
            fast = statevec.apply_gate_amps(state, gate, q)
            dense = statevec.basis_matrix_oracle(gate, q) @ state
            if np.max(np.abs(fast - dense)) > 1e-12:
                return False, f"gate {gate.kind} mismatch at q={q}"
    return True, ""


def _check_rotation_expectation() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    z = statevec.PauliString.of({0: "Z"})
    for theta in rng.uniform(0, 2 * np.pi, size=100):
        state = statevec.apply_gate(statevec.init_zero(1), statevec.ry(0, theta))
        if abs(statevec.expectation(state, z) - np.cos(theta)) > 1e-12:
            return False, f"<Z> after RY({theta}) off"
    return True, ""


def _check_torus_roundtrip() -> tuple[bool, str]:
    rng = np.random.default_rng(13)
    for _ in range(200):
        base = rng.uniform(0, np.pi, size=5)
        target = rng.uniform(0, np.pi, size=5)
        back = torus.retract(base, torus.logmap(base, target))
        if torus.distance(back, target) > 1e-12:
            return False, "retract/logmap inversion failed"
        if abs(torus.distance(base, target) - torus.distance(target, base)) > 1e-14:
            return False, "distance asymmetry"
    return True, ""


def _check_circular_mean() -> tuple[bool, str]:
    rng = np.random.default_rng(17)
    center = 1.2
    points = np.array([[torus.project(center + d)[()] for d in rng.uniform(-0.1, 0.1, size=4)]]).T
    mean = torus.circular_mean(points)
    grid = np.linspace(0, np.pi, 10000, endpoint=False)
    cost = [sum(torus.distance(np.array([g]), p) ** 2 for p in points) for g in grid]
    best = grid[int(np.argmin(cost))]
    achieved = sum(torus.distance(mean, p) ** 2 for p in points)
    if achieved > min(cost) + 1e-3:
        return False, f"mean {mean} worse than grid point {best}"
    return True, ""


def _check_metric_identities() -> tuple[bool, str]:
    y = np.array([0.4, -1.0, 2.2])
    pred = gp.Prediction(y.copy(), np.ones(3))
    if abs(gp.nlpd(pred, y) - 0.5 * np.log(2 * np.pi)) > 1e-12:
        return False, "NLPD identity failed"
    if gp.nrmse(pred, y) != 0.0:
        return False, "NRMSE of perfect predictions nonzero"
    return True, ""


def _check_gram_psd() -> tuple[bool, str]:
    rng = np.random.default_rng(23)
    spec = encodings.build_hubregtsen(2, 1, 2)
    obs = qkernels.observable_set("xyz_per_qubit", 2)
    outer = qkernels.OuterKernel("gaussian", 1.0)
    X = rng.uniform(-3, 3, size=(10, 2))
    theta = rng.uniform(0, np.pi, size=spec.num_params)
    K = qkernels.gram(spec, X, theta, obs, outer, 0.0).values
    min_eig = float(np.min(np.linalg.eigvalsh(K)))
    if min_eig < -1e-8:
        return False, f"gram min eigenvalue {min_eig}"
    gp.chol_with_jitter(GramMatrix(K, 1e-2).covariance())
    return True, ""


def _check_poe_single_expert() -> tuple[bool, str]:
    rng = np.random.default_rng(29)
    X = rng.uniform(-2, 2, size=(12, 2))
    y = np.sin(X[:, 0])
    kernel = qkernels.SquaredExponentialKernel(1.0, 1.0)
    model = gp.fit(kernel, X, y, 1e-3)
    X_test = rng.uniform(-2, 2, size=(4, 2))
    direct = gp.predict(model, X_test)
    poe = baselines.poe_predict([model], X_test)
    if np.max(np.abs(direct.mean - poe.mean)) > 0 or np.max(np.abs(direct.var - poe.var)) > 0:
        return False, "single-expert aggregation differs from direct prediction"
    return True, ""


def _check_euclidean_admm_toy() -> tuple[bool, str]:
    centers = [np.array([1.0, 3.0]), np.array([2.0, 2.0]), np.array([0.0, 1.0])]

    def grad_at(m, z):
        return 2.0 * (z - centers[m])

    z, _ = baselines.euclidean_admm(grad_at, 3, np.zeros(2), 10.0, 2.0, 300, 1e-4, 1e-4)
    target = np.mean(centers, axis=0)
    if np.max(np.abs(z - target)) > 1e-3:
        return False, f"consensus {z} not at {target}"
    return True, ""


CHECKS = (
    ("statevector matches dense-matrix oracle", _check_statevector_oracle),
    ("single-qubit rotation expectation identity", _check_rotation_expectation),
    ("torus retract/logmap round trip", _check_torus_roundtrip),
    ("circular mean vs grid search", _check_circular_mean),
    ("metric identities", _check_metric_identities),
    ("quantum gram PSD + factorizable", _check_gram_psd),
    ("product of experts single-expert identity", _check_poe_single_expert),
    ("euclidean consensus on toy quadratic", _check_euclidean_admm_toy),
)


def run_all() -> list[tuple[str, bool, str]]:
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as err:  # selftest must report, not crash
            ok, detail = False, f"{type(err).__name__}: {err}"
        results.append((name, ok, detail))
    return results
