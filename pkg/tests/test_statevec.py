"""Gate kernels against independent dense-matrix oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqgp import statevec
from dqgp.errors import ConfigError, StructureError
from dqgp.statevec import PauliString, StateVector


def kron_1q_oracle(mat: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """Full unitary via Kronecker products (little-endian: low qubit last)."""
    out = np.eye(1)
    for k in reversed(range(num_qubits)):
        out = np.kron(out, mat if k == qubit else np.eye(2))
    return out


def permutation_2q_oracle(gate: statevec.Gate, num_qubits: int) -> np.ndarray:
    """Dense two-qubit unitary from basis-index bit logic."""
    dim = 2**num_qubits
    mat = np.zeros((dim, dim), dtype=complex)
    a, b = gate.targets
    for col in range(dim):
        abit, bbit = (col >> a) & 1, (col >> b) & 1
        if gate.kind == "cnot":
            row = col ^ (1 << b) if abit else col
            mat[row, col] = 1.0
        elif gate.kind == "swap":
            row = (col & ~(1 << a) & ~(1 << b)) | (bbit << a) | (abit << b)
            mat[row, col] = 1.0
        else:  # crz
            phase = np.exp(0.5j * gate.angle * (1 if bbit else -1)) if abit else 1.0
            mat[col, col] = phase
    return mat


def random_state(rng, num_qubits):
    amps = rng.standard_normal(2**num_qubits) + 1j * rng.standard_normal(2**num_qubits)
    return amps / np.linalg.norm(amps)


class TestInitZero:
    def test_single_qubit(self):
        assert np.array_equal(statevec.init_zero(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        assert np.array_equal(statevec.init_zero(2).amplitudes, [1, 0, 0, 0])

    @pytest.mark.parametrize("q", [0, 11, -3])
    def test_out_of_range(self, q):
        with pytest.raises(ConfigError):
            statevec.init_zero(q)


class TestApplyGate:
    def test_hadamard_on_zero(self):
        state = statevec.apply_gate(statevec.init_zero(1), statevec.h(0))
        assert np.allclose(state.amplitudes, np.array([1, 1]) / np.sqrt(2), atol=1e-15)

    def test_ry_pi_flips(self):
        state = statevec.apply_gate(statevec.init_zero(1), statevec.ry(0, np.pi))
        assert np.allclose(np.abs(state.amplitudes), [0, 1], atol=1e-12)

    def test_cnot_builds_bell_state(self):
        # (|00> + |10>)/sqrt(2) with control qubit 0 -> (|00> + |11>)/sqrt(2),
        # i.e. amplitude moves from index 1 to index 3 in little-endian order.
        amps = np.zeros(4, dtype=complex)
        amps[0] = amps[1] = 1 / np.sqrt(2)
        state = statevec.apply_gate(StateVector(amps, 2), statevec.cnot(0, 1))
        expected = np.zeros(4, dtype=complex)
        expected[0] = expected[3] = 1 / np.sqrt(2)
        assert np.allclose(state.amplitudes, expected, atol=1e-15)

    def test_invalid_target_rejected(self):
        with pytest.raises(StructureError):
            statevec.apply_gate(statevec.init_zero(1), statevec.ry(3, 0.5))

    def test_duplicate_targets_rejected(self):
        with pytest.raises(StructureError):
            statevec.Gate("cnot", (1, 1))

    def test_unknown_kind_rejected(self):
        with pytest.raises(StructureError):
            statevec.Gate("toffoli", (0, 1))


class TestOracleEquivalence:
    """Every gate kind matches an explicit dense matrix for q <= 3."""

    @pytest.mark.parametrize("q", [1, 2, 3])
    @pytest.mark.parametrize("kind", ["h", "p", "rx", "ry", "rz"])
    def test_single_qubit_kinds(self, q, kind):
        rng = np.random.default_rng(hash((q, kind)) % 2**32)
        for qubit in range(q):
            angle = None if kind == "h" else float(rng.uniform(-2 * np.pi, 2 * np.pi))
            gate = statevec.Gate(kind, (qubit,), angle)
            mat = statevec._H if kind == "h" else statevec.rotation_matrix(kind, angle)
            dense = kron_1q_oracle(mat, qubit, q)
            state = random_state(rng, q)
            got = statevec.apply_gate_amps(state, gate, q)
            assert np.max(np.abs(got - dense @ state)) < 1e-12

    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("kind", ["cnot", "crz", "swap"])
    def test_two_qubit_kinds(self, q, kind):
        rng = np.random.default_rng(hash((q, kind)) % 2**32)
        for a in range(q):
            for b in range(q):
                if a == b:
                    continue
                angle = float(rng.uniform(-np.pi, np.pi)) if kind == "crz" else None
                gate = statevec.Gate(kind, (a, b), angle)
                dense = permutation_2q_oracle(gate, q)
                state = random_state(rng, q)
                got = statevec.apply_gate_amps(state, gate, q)
                assert np.max(np.abs(got - dense @ state)) < 1e-12


def random_gate(rng, q):
    kind = rng.choice(["h", "p", "rx", "ry", "rz", "cnot", "crz", "swap"])
    if kind in ("cnot", "crz", "swap"):
        a, b = rng.choice(q, size=2, replace=False)
        angle = float(rng.uniform(-np.pi, np.pi)) if kind == "crz" else None
        return statevec.Gate(kind, (int(a), int(b)), angle)
    angle = None if kind == "h" else float(rng.uniform(-np.pi, np.pi))
    return statevec.Gate(kind, (int(rng.integers(q)),), angle)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), q=st.integers(2, 6), n_gates=st.integers(1, 50))
def test_norm_preserved_by_random_circuits(seed, q, n_gates):
    rng = np.random.default_rng(seed)
    state = statevec.init_zero(q)
    for _ in range(n_gates):
        state = statevec.apply_gate(state, random_gate(rng, q))
    assert 1 - 1e-9 <= state.norm() <= 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(-10, 10), seed=st.integers(0, 2**31 - 1))
def test_ry_inverse_restores_state(theta, seed):
    rng = np.random.default_rng(seed)
    amps = random_state(rng, 2)
    forward = statevec.apply_gate_amps(amps, statevec.ry(0, theta), 2)
    back = statevec.apply_gate_amps(forward, statevec.ry(0, -theta), 2)
    assert np.max(np.abs(back - amps)) < 1e-12


class TestExpectation:
    def test_z_on_zero_state(self):
        assert statevec.expectation(statevec.init_zero(1), PauliString.of({0: "Z"})) == 1.0

    @pytest.mark.parametrize("theta", [0.3, 1.1, 2.7])
    def test_z_after_ry_matches_matrix_oracle(self, theta):
        # Independent oracle: 2x2 matrix product <0| RY^dag Z RY |0>.
        ry = statevec.rotation_matrix("ry", theta)
        z = np.diag([1.0, -1.0])
        psi = ry @ np.array([1.0, 0.0])
        expected = float(np.real(psi.conj() @ z @ psi))
        assert abs(expected - np.cos(theta)) < 1e-12  # sanity: analytic identity
        state = statevec.apply_gate(statevec.init_zero(1), statevec.ry(0, theta))
        got = statevec.expectation(state, PauliString.of({0: "Z"}))
        assert abs(got - expected) < 1e-12

    def test_x_on_plus_state(self):
        state = statevec.apply_gate(statevec.init_zero(1), statevec.h(0))
        assert abs(statevec.expectation(state, PauliString.of({0: "X"})) - 1.0) < 1e-12

    def test_bounds_on_random_states(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            q = int(rng.integers(1, 5))
            state = StateVector(random_state(rng, q), q)
            factors = {
                int(i): str(rng.choice(["X", "Y", "Z"]))
                for i in rng.choice(q, size=rng.integers(1, q + 1), replace=False)
            }
            val = statevec.expectation(state, PauliString.of(factors))
            assert abs(val) <= 1 + 1e-10

    def test_pauli_out_of_register(self):
        with pytest.raises(StructureError):
            statevec.expectation(statevec.init_zero(1), PauliString.of({1: "Z"}))

    def test_invalid_pauli_rejected(self):
        with pytest.raises(StructureError):
            PauliString.of({0: "W"})
