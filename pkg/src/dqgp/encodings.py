"""Parameterized quantum encoding circuits (Chebyshev and Hubregtsen families).

A circuit is a declarative gate list; each gate template binds its angle to a
constant, a data feature, a trainable parameter, or a Chebyshev-style
feature/parameter combination. Both families stack ``num_layers`` identical
layer structures with layer-distinct parameter slots and carry
``2 * num_qubits * num_layers`` trainable angles.

Pinned layout conventions (the circuit families are cited in the literature
by gate set only, so the per-gate layout here is a documented choice):

- Chebyshev layer: per qubit ``RX(theta_enc * arccos(clip(x_d / 3)))``, then a
  ring of ``CRZ(theta_ent)`` on ``(i, i+1 mod q)``. An optional trailing layer
  of fixed ``RY(pi/4)`` gates provides basis mixing (on by default).
- Hubregtsen layer: ``H`` per qubit, ``RZ(x_d)`` per qubit, trainable
  ``RY(theta_a)`` per qubit, then the same ``CRZ`` ring.
- Feature index cycling: encoding gate number ``g`` (counted over rounds,
  layers, and qubits) binds feature ``g mod input_dim``. When
  ``input_dim > num_qubits * num_layers`` each layer repeats its encoding
  stage in extra rounds until every feature is bound; extra Chebyshev rounds
  use fixed unit scale so the parameter count stays ``2 q layers``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import statevec, torus
from .errors import ConfigError, StructureError

FEATURE_CLIP = 3.0


@dataclass(frozen=True)
class Binding:
    """How a gate template's angle is produced at evaluation time."""

    kind: str  # "none" | "const" | "param" | "feature" | "cheb"
    feature: int | None = None
    param: int | None = None
    value: float | None = None


@dataclass(frozen=True)
class GateTemplate:
    kind: str
    targets: tuple[int, ...]
    binding: Binding


@dataclass(frozen=True)
class CircuitSpec:
    """Declarative encoding circuit with feature and parameter slots."""

    family: str
    num_qubits: int
    num_layers: int
    input_dim: int
    num_params: int
    gates: tuple[GateTemplate, ...]

    def to_text(self) -> str:
        """Serialize to the line-oriented format documented in docs/FORMATS.md."""
        lines = [
            f"circuit {self.family} qubits={self.num_qubits} layers={self.num_layers} "
            f"input_dim={self.input_dim} params={self.num_params}"
        ]
        for g in self.gates:
            b = g.binding
            if b.kind == "none":
                tag = "-"
            elif b.kind == "const":
                tag = f"const:{b.value!r}"
            elif b.kind == "param":
                tag = f"param:{b.param}"
            elif b.kind == "feature":
                tag = f"feature:{b.feature}"
            else:
                tag = f"cheb:{b.feature}:{b.param if b.param is not None else '-'}"
            targets = ",".join(str(t) for t in g.targets)
            lines.append(f"{g.kind} {targets} {tag}")
        return "\n".join(lines) + "\n"


def _audit(spec: CircuitSpec) -> None:
    if spec.num_params != 2 * spec.num_qubits * spec.num_layers:
        raise ConfigError(
            f"parameter count {spec.num_params} != 2*q*layers for {spec.family}"
        )
    param_uses: dict[int, int] = {}
    features_seen: set[int] = set()
    for g in spec.gates:
        b = g.binding
        if b.param is not None:
            param_uses[b.param] = param_uses.get(b.param, 0) + 1
        if b.feature is not None:
            features_seen.add(b.feature)
    if sorted(param_uses) != list(range(spec.num_params)) or any(
        n != 1 for n in param_uses.values()
    ):
        raise ConfigError(f"parameter slots not bound exactly once in {spec.family}")
    missing = set(range(spec.input_dim)) - features_seen
    if missing:
        raise ConfigError(f"features {sorted(missing)} unbound in {spec.family}")


def _check_dims(num_qubits: int, num_layers: int, input_dim: int) -> None:
    if num_qubits < 2:
        raise ConfigError(f"need at least 2 qubits for the ring entangler, got {num_qubits}")
    if num_qubits > statevec.MAX_QUBITS:
        raise ConfigError(f"at most {statevec.MAX_QUBITS} qubits supported, got {num_qubits}")
    if num_layers < 1:
        raise ConfigError(f"num_layers must be >= 1, got {num_layers}")
    if input_dim < 1:
        raise ConfigError(f"input_dim must be >= 1, got {input_dim}")


def _encoding_rounds(num_qubits: int, num_layers: int, input_dim: int) -> int:
    return max(1, math.ceil(input_dim / (num_qubits * num_layers)))


def build_chebyshev(
    num_qubits: int, num_layers: int, input_dim: int, final_rotation: bool = True
) -> CircuitSpec:
    """Chebyshev-style circuit: scaled-arccos RX encoding plus a CRZ ring."""
    _check_dims(num_qubits, num_layers, input_dim)
    rounds = _encoding_rounds(num_qubits, num_layers, input_dim)
    gates: list[GateTemplate] = []
    enc_counter = 0
    for layer in range(num_layers):
        for rnd in range(rounds):
            for i in range(num_qubits):
                param = layer * 2 * num_qubits + i if rnd == 0 else None
                gates.append(
                    GateTemplate(
                        "rx", (i,), Binding("cheb", feature=enc_counter % input_dim, param=param)
                    )
                )
                enc_counter += 1
        for i in range(num_qubits):
            slot = layer * 2 * num_qubits + num_qubits + i
            gates.append(
                GateTemplate("crz", (i, (i + 1) % num_qubits), Binding("param", param=slot))
            )
    if final_rotation:
        for i in range(num_qubits):
            gates.append(GateTemplate("ry", (i,), Binding("const", value=math.pi / 4)))
    spec = CircuitSpec(
        "chebyshev", num_qubits, num_layers, input_dim, 2 * num_qubits * num_layers, tuple(gates)
    )
    _audit(spec)
    return spec


def build_hubregtsen(num_qubits: int, num_layers: int, input_dim: int) -> CircuitSpec:
    """Hubregtsen-style circuit: H + RZ feature encoding, trainable RY, CRZ ring."""
    _check_dims(num_qubits, num_layers, input_dim)
    rounds = _encoding_rounds(num_qubits, num_layers, input_dim)
    gates: list[GateTemplate] = []
    enc_counter = 0
    for layer in range(num_layers):
        for i in range(num_qubits):
            gates.append(GateTemplate("h", (i,), Binding("none")))
        for _ in range(rounds):
            for i in range(num_qubits):
                gates.append(
                    GateTemplate("rz", (i,), Binding("feature", feature=enc_counter % input_dim))
                )
                enc_counter += 1
        for i in range(num_qubits):
            gates.append(
                GateTemplate("ry", (i,), Binding("param", param=layer * 2 * num_qubits + i))
            )
        for i in range(num_qubits):
            slot = layer * 2 * num_qubits + num_qubits + i
            gates.append(
                GateTemplate("crz", (i, (i + 1) % num_qubits), Binding("param", param=slot))
            )
    spec = CircuitSpec(
        "hubregtsen", num_qubits, num_layers, input_dim, 2 * num_qubits * num_layers, tuple(gates)
    )
    _audit(spec)
    return spec


def build_circuit(family: str, num_qubits: int, num_layers: int, input_dim: int) -> CircuitSpec:
    if family == "chebyshev":
        return build_chebyshev(num_qubits, num_layers, input_dim)
    if family == "hubregtsen":
        return build_hubregtsen(num_qubits, num_layers, input_dim)
    raise ConfigError(f"unknown circuit family {family!r}")


def _resolve_angle(binding: Binding, x: np.ndarray, theta: np.ndarray):
    """Angle for one gate; per-row array when bound to features of batched x."""
    if binding.kind == "none":
        return None
    if binding.kind == "const":
        return binding.value
    if binding.kind == "param":
        return theta[binding.param]
    if binding.kind == "feature":
        return x[..., binding.feature]
    # Chebyshev: scale * arccos of the feature squashed into [-1, 1].
    arg = np.clip(x[..., binding.feature] / FEATURE_CLIP, -1.0, 1.0)
    scale = theta[binding.param] if binding.param is not None else 1.0
    return scale * np.arccos(arg)


def _prepare(spec: CircuitSpec, x: np.ndarray, theta) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.input_dim:
        raise StructureError(f"expected {spec.input_dim} features, got {x.shape[-1]}")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.num_params,):
        raise StructureError(f"expected {spec.num_params} parameters, got {theta.shape}")
    # Canonical domain: all trainable angles live on the period-pi torus.
    return x, torus.project(theta)


def evaluate(spec: CircuitSpec, x, theta) -> statevec.StateVector:
    """Encoded state ``U(x, theta)|0...0>`` via the single-state gate kernels."""
    x, theta = _prepare(spec, np.atleast_1d(x), theta)
    state = statevec.init_zero(spec.num_qubits)
    for g in spec.gates:
        angle = _resolve_angle(g.binding, x, theta)
        angle = float(angle) if angle is not None else None
        state = statevec.apply_gate(state, statevec.Gate(g.kind, g.targets, angle))
    return state


def evaluate_batch(spec: CircuitSpec, X, theta) -> np.ndarray:
    """Encoded states for each row of ``X``; shape ``(n, 2**num_qubits)``.

    Matches :func:`evaluate` row-by-row; feature-bound gates apply one
    rotation matrix per row in a single vectorized step.
    """
    X, theta = _prepare(spec, np.atleast_2d(X), theta)
    amps = statevec.zero_amplitudes(spec.num_qubits, X.shape[0])
    for g in spec.gates:
        angle = _resolve_angle(g.binding, X, theta)
        if g.kind == "h":
            amps = statevec.apply_gate_amps(amps, statevec.Gate("h", g.targets), spec.num_qubits)
        elif np.ndim(angle) == 0:
            gate = statevec.Gate(g.kind, g.targets, float(angle))
            amps = statevec.apply_gate_amps(amps, gate, spec.num_qubits)
        else:
            if len(g.targets) != 1:
                raise StructureError("feature-bound angles are only supported on 1-qubit gates")
            mats = statevec.rotation_matrix(g.kind, angle)
            amps = statevec.apply_1q(amps, mats, g.targets[0], spec.num_qubits)
    return amps
