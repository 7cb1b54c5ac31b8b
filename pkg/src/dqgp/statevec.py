"""Dense statevector simulator for small qubit registers.

Conventions (pinned for cross-module determinism):

- Little-endian amplitude ordering: qubit ``k`` is the bit of weight ``2**k``
  in the basis-state index, so ``|q1 q0> = |10>`` with qubit 0 = 0 and
  qubit 1 = 1 sits at index 2.
- ``RZ(t) = diag(exp(-i t/2), exp(+i t/2))``; ``CRZ`` applies ``RZ`` on the
  target when the control is ``|1>``.

All gate kernels accept amplitude arrays of shape ``(..., 2**q)`` so the same
code path evaluates one state or a batch of states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError, StructureError

MAX_QUBITS = 10

SINGLE_QUBIT_KINDS = frozenset({"h", "p", "rx", "ry", "rz"})
TWO_QUBIT_KINDS = frozenset({"cnot", "crz", "swap"})
PARAMETRIC_KINDS = frozenset({"p", "rx", "ry", "rz", "crz"})

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
_PAULI = {
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


@dataclass(frozen=True)
class Gate:
    """One gate instance: kind, target qubit(s), and angle where applicable.

    For controlled gates ``targets = (control, target)``.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        kind = self.kind
        if kind in SINGLE_QUBIT_KINDS:
            arity = 1
        elif kind in TWO_QUBIT_KINDS:
            arity = 2
        else:
            raise StructureError(f"unknown gate kind {kind!r}")
        if len(self.targets) != arity:
            raise StructureError(f"gate {kind!r} takes {arity} target(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise StructureError(f"gate {kind!r} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise StructureError(f"negative qubit index in {self.targets}")
        if (kind in PARAMETRIC_KINDS) != (self.angle is not None):
            raise StructureError(f"gate {kind!r} angle mismatch (angle={self.angle})")


def h(q: int) -> Gate:
    return Gate("h", (q,))


def p(q: int, angle: float) -> Gate:
    return Gate("p", (q,), angle)


def rx(q: int, angle: float) -> Gate:
    return Gate("rx", (q,), angle)


def ry(q: int, angle: float) -> Gate:
    return Gate("ry", (q,), angle)


def rz(q: int, angle: float) -> Gate:
    return Gate("rz", (q,), angle)


def cnot(control: int, target: int) -> Gate:
    return Gate("cnot", (control, target))


def crz(control: int, target: int, angle: float) -> Gate:
    return Gate("crz", (control, target), angle)


def swap(a: int, b: int) -> Gate:
    return Gate("swap", (a, b))


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; identity on unlisted qubits."""

    factors: tuple[tuple[int, str], ...]

    @classmethod
    def of(cls, factors: Mapping[int, str]) -> "PauliString":
        items = []
        for qubit, op in sorted(factors.items()):
            op = op.upper()
            if op not in _PAULI:
                raise StructureError(f"Pauli factor must be X, Y or Z, got {op!r}")
            if qubit < 0:
                raise StructureError(f"negative qubit index {qubit}")
            items.append((int(qubit), op))
        return cls(tuple(items))

    def max_qubit(self) -> int:
        return max((q for q, _ in self.factors), default=0)


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitude vector of a ``num_qubits``-qubit register."""

    amplitudes: np.ndarray
    num_qubits: int

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def init_zero(num_qubits: int) -> StateVector:
    """All-zeros computational basis state ``|0...0>``."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ConfigError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, num_qubits)


def zero_amplitudes(num_qubits: int, batch: int) -> np.ndarray:
    """Batch of ``|0...0>`` amplitude rows, shape ``(batch, 2**num_qubits)``."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ConfigError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros((batch, 2**num_qubits), dtype=complex)
    amps[:, 0] = 1.0
    return amps


def _axis(qubit: int, num_qubits: int, batch_ndim: int) -> int:
    # Little-endian: qubit k is the fastest-varying bit, i.e. the last tensor
    # axes hold the low qubits once the flat index is reshaped to (2,)*q.
    return batch_ndim + (num_qubits - 1 - qubit)


def rotation_matrix(kind: str, angle) -> np.ndarray:
    """2x2 matrix (or batch of them for array-valued angles)."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    if kind == "rx":
        mat = np.stack(
            [np.stack([c, -1j * s], axis=-1), np.stack([-1j * s, c], axis=-1)], axis=-2
        )
    elif kind == "ry":
        mat = np.stack(
            [np.stack([c + 0j, -s + 0j], axis=-1), np.stack([s + 0j, c + 0j], axis=-1)], axis=-2
        )
    elif kind == "rz":
        e = np.exp(-0.5j * angle)
        zero = np.zeros_like(e)
        mat = np.stack(
            [np.stack([e, zero], axis=-1), np.stack([zero, np.conj(e)], axis=-1)], axis=-2
        )
    elif kind == "p":
        one = np.ones_like(angle, dtype=complex)
        zero = np.zeros_like(one)
        mat = np.stack(
            [np.stack([one, zero], axis=-1), np.stack([zero, np.exp(1j * angle)], axis=-1)],
            axis=-2,
        )
    else:
        raise StructureError(f"not a rotation kind: {kind!r}")
    return mat


def apply_1q(amps: np.ndarray, mat: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """Apply a 2x2 matrix (shared, or one per batch row) to one qubit."""
    batch_shape = amps.shape[:-1]
    tensor = amps.reshape(batch_shape + (2,) * num_qubits)
    axis = _axis(qubit, num_qubits, len(batch_shape))
    moved = np.moveaxis(tensor, axis, -1)
    if mat.ndim == 2:
        out = np.einsum("ij,...j->...i", mat, moved)
    else:
        # One matrix per leading batch entry.
        out = np.einsum("nij,n...j->n...i", mat, moved)
    return np.moveaxis(out, -1, axis).reshape(amps.shape)


def _pair_slices(tensor: np.ndarray, q0: int, q1: int, num_qubits: int, batch_ndim: int):
    a0 = _axis(q0, num_qubits, batch_ndim)
    a1 = _axis(q1, num_qubits, batch_ndim)

    def idx(v0, v1):
        sel = [slice(None)] * tensor.ndim
        sel[a0], sel[a1] = v0, v1
        return tuple(sel)

    return idx


def apply_2q(amps: np.ndarray, gate: Gate, num_qubits: int) -> np.ndarray:
    batch_shape = amps.shape[:-1]
    tensor = amps.reshape(batch_shape + (2,) * num_qubits).copy()
    q0, q1 = gate.targets
    idx = _pair_slices(tensor, q0, q1, num_qubits, len(batch_shape))
    if gate.kind == "cnot":
        tensor[idx(1, 0)], tensor[idx(1, 1)] = (
            tensor[idx(1, 1)].copy(),
            tensor[idx(1, 0)].copy(),
        )
    elif gate.kind == "swap":
        tensor[idx(0, 1)], tensor[idx(1, 0)] = (
            tensor[idx(1, 0)].copy(),
            tensor[idx(0, 1)].copy(),
        )
    elif gate.kind == "crz":
        phase = np.exp(0.5j * gate.angle)
        tensor[idx(1, 0)] *= np.conj(phase)
        tensor[idx(1, 1)] *= phase
    else:
        raise StructureError(f"not a two-qubit kind: {gate.kind!r}")
    return tensor.reshape(amps.shape)


def apply_gate_amps(amps: np.ndarray, gate: Gate, num_qubits: int) -> np.ndarray:
    """Gate action on raw amplitudes of shape ``(..., 2**num_qubits)``."""
    if any(t >= num_qubits for t in gate.targets):
        raise StructureError(
            f"gate {gate.kind!r} targets {gate.targets} out of range for q={num_qubits}"
        )
    if gate.kind == "h":
        return apply_1q(amps, _H, gate.targets[0], num_qubits)
    if gate.kind in ("p", "rx", "ry", "rz"):
        return apply_1q(amps, rotation_matrix(gate.kind, gate.angle), gate.targets[0], num_qubits)
    return apply_2q(amps, gate, num_qubits)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate, returning a new StateVector."""
    amps = apply_gate_amps(state.amplitudes, gate, state.num_qubits)
    return StateVector(amps, state.num_qubits)


def apply_circuit(state: StateVector, gates) -> StateVector:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def pauli_apply_amps(amps: np.ndarray, obs: PauliString, num_qubits: int) -> np.ndarray:
    """Amplitudes of ``O|psi>`` for a Pauli-string observable ``O``."""
    out = amps
    for qubit, op in obs.factors:
        if qubit >= num_qubits:
            raise StructureError(f"Pauli factor on qubit {qubit} exceeds q={num_qubits}")
        out = apply_1q(out, _PAULI[op], qubit, num_qubits)
    return out


def expectation_amps(amps: np.ndarray, obs: PauliString, num_qubits: int) -> np.ndarray:
    """Real part of ``<psi|O|psi>`` per batch row."""
    transformed = pauli_apply_amps(amps, obs, num_qubits)
    return np.einsum("...i,...i->...", np.conj(amps), transformed).real


def expectation(state: StateVector, obs: PauliString) -> float:
    """Expectation value of a Pauli string in a normalized state, in [-1, 1]."""
    return float(expectation_amps(state.amplitudes, obs, state.num_qubits))


def basis_matrix_oracle(gate: Gate, num_qubits: int) -> np.ndarray:
    """Dense unitary of one gate, built column-by-column from basis states.

    Independent of the tensor-reshape kernels above; used as a test oracle.
    """
    dim = 2**num_qubits
    mat = np.zeros((dim, dim), dtype=complex)
    if gate.kind in SINGLE_QUBIT_KINDS:
        u = _H if gate.kind == "h" else rotation_matrix(gate.kind, gate.angle)
        k = gate.targets[0]
        for col in range(dim):
            bit = (col >> k) & 1
            for new_bit in (0, 1):
                row = (col & ~(1 << k)) | (new_bit << k)
                mat[row, col] += u[new_bit, bit]
        return mat
    control, target = gate.targets
    for col in range(dim):
        cbit = (col >> control) & 1
        tbit = (col >> target) & 1
        if gate.kind == "cnot":
            row = col ^ (1 << target) if cbit else col
            mat[row, col] = 1.0
        elif gate.kind == "swap":
            abit = (col >> control) & 1
            bbit = (col >> target) & 1
            row = col & ~(1 << control) & ~(1 << target)
            row |= (bbit << control) | (abit << target)
            mat[row, col] = 1.0
        elif gate.kind == "crz":
            phase = np.exp(0.5j * gate.angle * (1 if tbit else -1)) if cbit else 1.0
            mat[col, col] = phase
    return mat
