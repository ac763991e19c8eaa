"""Dense statevector simulation of small parameterized circuits.

Basis ordering is big-endian: qubit 0 is the most significant bit of the
basis index, so "first qubit in |0>" is the first half of the amplitude
vector.  Rotations follow ``R_G(phi) = exp(-i phi G / 2)``.

Internally every routine works on a batch of row-stacked states with
shape ``(B, 2**n)``; the public single-state functions wrap that.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from math import cos, sin
from typing import Iterable

import numpy as np

from .errors import CircuitError, DimensionError, InvalidStateError, NotUnitaryError

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
MAX_UNITARY_QUBITS = 10

# construction-time slack; the 1e-12 norm property is checked by the test suite
_STATE_CHECK_TOL = 1e-10


class GateKind(str, enum.Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    CNOT = "CNOT"
    CZ = "CZ"

    @property
    def parameterized(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.CZ) else 1


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def rotation_matrix(kind: GateKind, phi: float) -> np.ndarray:
    c, s = cos(phi / 2), sin(phi / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind is GateKind.RZ:
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise CircuitError(f"{kind.value} is not a rotation gate")


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class StateVector:
    """Unit-norm amplitude vector of an ``n_qubits`` register."""

    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.n_qubits < 0 or amps.shape[0] != 2**self.n_qubits:
            raise InvalidStateError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > _STATE_CHECK_TOL:
            raise InvalidStateError(f"state is not unit norm (|psi| = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def build_state(amplitudes: Iterable[complex]) -> StateVector:
    """Validate and renormalize an amplitude vector.

    >>> build_state([1, 1]).amplitudes.real.round(6).tolist()
    [0.707107, 0.707107]
    """
    amps = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                      dtype=complex).reshape(-1)
    if not _is_power_of_two(amps.shape[0]):
        raise InvalidStateError(f"length {amps.shape[0]} is not a power of 2")
    norm = np.linalg.norm(amps)
    if norm == 0.0 or not np.isfinite(norm):
        raise InvalidStateError("unnormalizable")
    return StateVector(amps / norm, amps.shape[0].bit_length() - 1)


def basis_state(index: int, n_qubits: int) -> StateVector:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, n_qubits)


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    targets: tuple[int, ...]
    param_index: int | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != kind.arity:
            raise CircuitError(f"{kind.value} takes {kind.arity} target(s), got {len(targets)}")
        if len(set(targets)) != len(targets):
            raise CircuitError(f"{kind.value} targets must be distinct: {targets}")
        if any(t < 0 for t in targets):
            raise CircuitError(f"negative target in {targets}")
        if kind.parameterized != (self.param_index is not None):
            raise CircuitError(
                f"{kind.value}: param_index must be present iff the gate is a rotation"
            )
        if self.param_index is not None and self.param_index < 0:
            raise CircuitError("param_index must be non-negative")

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "targets": list(self.targets)}
        if self.param_index is not None:
            d["param_index"] = self.param_index
        return d


@dataclass(frozen=True)
class ParamCircuit:
    n_qubits: int
    gates: tuple[GateOp, ...] = field(default_factory=tuple)
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise CircuitError("n_qubits must be positive")
        used = set()
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise CircuitError(f"gate {g.kind.value} target {g.targets} out of range for {self.n_qubits} qubits")
            if g.param_index is not None:
                if g.param_index >= self.n_params:
                    raise CircuitError(f"param_index {g.param_index} >= n_params {self.n_params}")
                used.add(g.param_index)
        missing = set(range(self.n_params)) - used
        if missing:
            raise CircuitError(f"unused parameter slots: {sorted(missing)}")

    @property
    def dimension(self) -> int:
        return 2**self.n_qubits

    def slot_usage(self) -> list[int]:
        counts = [0] * self.n_params
        for g in self.gates:
            if g.param_index is not None:
                counts[g.param_index] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "gates": [g.to_dict() for g in self.gates],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParamCircuit":
        if not isinstance(data, dict):
            raise CircuitError("circuit must be a JSON object")
        unknown = set(data) - {"n_qubits", "n_params", "gates"}
        if unknown:
            raise CircuitError(f"unknown circuit fields: {sorted(unknown)}")
        try:
            gates = []
            for g in data["gates"]:
                extra = set(g) - {"kind", "targets", "param_index"}
                if extra:
                    raise CircuitError(f"unknown gate fields: {sorted(extra)}")
                gates.append(GateOp(GateKind(g["kind"]), tuple(g["targets"]), g.get("param_index")))
            return cls(int(data["n_qubits"]), tuple(gates), int(data["n_params"]))
        except KeyError as exc:
            raise CircuitError(f"missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, CircuitError):
                raise
            raise CircuitError(str(exc)) from None


def load_circuit(path) -> ParamCircuit:
    with open(path) as fh:
        return ParamCircuit.from_dict(json.load(fh))


def hardware_efficient_ansatz(n_qubits: int, layers: int) -> ParamCircuit:
    """Layers of RY+RZ on every qubit followed by a CNOT ring.

    The ring degenerates to a single CNOT for two qubits and is omitted for
    one.  Parameter slots are numbered in gate order, ``2 * n_qubits`` per
    layer.
    """
    gates: list[GateOp] = []
    p = 0
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(GateOp(GateKind.RY, (q,), p))
            gates.append(GateOp(GateKind.RZ, (q,), p + 1))
            p += 2
        if n_qubits == 2:
            gates.append(GateOp(GateKind.CNOT, (0, 1)))
        elif n_qubits > 2:
            gates.extend(GateOp(GateKind.CNOT, (q, (q + 1) % n_qubits)) for q in range(n_qubits))
    return ParamCircuit(n_qubits, tuple(gates), p)


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator) -> ParamCircuit:
    """Random gate list over the full gate set; every rotation gets its own slot."""
    kinds = list(GateKind) if n_qubits > 1 else [k for k in GateKind if k.arity == 1]
    gates = []
    p = 0
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        targets = tuple(int(t) for t in rng.choice(n_qubits, size=kind.arity, replace=False))
        if kind.parameterized:
            gates.append(GateOp(kind, targets, p))
            p += 1
        else:
            gates.append(GateOp(kind, targets))
    return ParamCircuit(n_qubits, tuple(gates), p)


# -- batched kernels -------------------------------------------------------

def _apply_1q(states: np.ndarray, matrix: np.ndarray, q: int, n: int) -> np.ndarray:
    b = states.shape[0]
    view = states.reshape(b * 2**q, 2, 2 ** (n - q - 1))
    return np.einsum("ij,ajb->aib", matrix, view).reshape(b, 2**n)


def _apply_2q(states: np.ndarray, kind: GateKind, q0: int, q1: int, n: int) -> np.ndarray:
    b = states.shape[0]
    view = states.reshape((b,) + (2,) * n)
    out = view.copy()

    def idx(v0, v1):
        i = [slice(None)] * (n + 1)
        i[q0 + 1], i[q1 + 1] = v0, v1
        return tuple(i)

    if kind is GateKind.CNOT:
        out[idx(1, 0)] = view[idx(1, 1)]
        out[idx(1, 1)] = view[idx(1, 0)]
    else:
        out[idx(1, 1)] = -view[idx(1, 1)]
    return out.reshape(b, 2**n)


def _check_theta(circuit: ParamCircuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != circuit.n_params:
        raise DimensionError(f"theta has {theta.shape[0]} entries, circuit expects {circuit.n_params}")
    return theta


def apply_gate_batch(states: np.ndarray, gate: GateOp, theta, n_qubits: int) -> np.ndarray:
    if max(gate.targets) >= n_qubits:
        raise CircuitError(f"target {gate.targets} out of range for {n_qubits} qubits")
    if gate.kind.arity == 2:
        return _apply_2q(states, gate.kind, gate.targets[0], gate.targets[1], n_qubits)
    if gate.kind is GateKind.H:
        m = _H
    else:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if gate.param_index >= theta.shape[0]:
            raise DimensionError(f"theta has no entry {gate.param_index}")
        m = rotation_matrix(gate.kind, float(theta[gate.param_index]))
    return _apply_1q(states, m, gate.targets[0], n_qubits)


def run_circuit_batch(circuit: ParamCircuit, theta, states: np.ndarray) -> np.ndarray:
    """Apply ``W(theta)`` to each row of ``states`` (shape ``(B, 2**n)``)."""
    theta = _check_theta(circuit, theta)
    states = np.asarray(states, dtype=complex)
    if states.ndim != 2 or states.shape[1] != circuit.dimension:
        raise DimensionError(f"states must have shape (B, {circuit.dimension}), got {states.shape}")
    for g in circuit.gates:
        states = apply_gate_batch(states, g, theta, circuit.n_qubits)
    return states


def apply_gate(state: StateVector, gate: GateOp, theta=()) -> StateVector:
    out = apply_gate_batch(state.amplitudes[None, :], gate, theta, state.n_qubits)
    return StateVector(out[0], state.n_qubits)


def run_circuit(circuit: ParamCircuit, theta, input: StateVector) -> StateVector:
    if input.n_qubits != circuit.n_qubits:
        raise DimensionError(f"input has {input.n_qubits} qubits, circuit has {circuit.n_qubits}")
    out = run_circuit_batch(circuit, theta, input.amplitudes[None, :])
    return StateVector(out[0], circuit.n_qubits)


def unitarity_error(matrix: np.ndarray) -> float:
    """``max |V^dagger V - I|`` entrywise."""
    m = np.asarray(matrix)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def check_unitary(matrix, tol: float = UNITARY_TOL) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotUnitaryError(f"not unitary: shape {m.shape} is not square")
    err = unitarity_error(m)
    if not err < tol:
        raise NotUnitaryError(f"not unitary: max|V^H V - I| = {err:.3e}")
    return m


def circuit_unitary(circuit: ParamCircuit, theta) -> np.ndarray:
    """Dense ``W(theta)``; column j is the circuit applied to ``e_j``."""
    if circuit.n_qubits > MAX_UNITARY_QUBITS:
        raise CircuitError(f"circuit_unitary is capped at {MAX_UNITARY_QUBITS} qubits")
    cols = run_circuit_batch(circuit, theta, np.eye(circuit.dimension, dtype=complex))
    return check_unitary(cols.T)


def circuit_row(circuit: ParamCircuit, theta, index: int = 0) -> np.ndarray:
    """Row ``index`` of ``W(theta)`` from a single transposed pass.

    ``W^T e_i`` is the reversed gate list with each gate transposed; in this
    gate set only RY changes under transposition (its angle flips).
    """
    theta = _check_theta(circuit, theta)
    state = np.zeros((1, circuit.dimension), dtype=complex)
    state[0, index] = 1.0
    n = circuit.n_qubits
    for g in reversed(circuit.gates):
        if g.kind is GateKind.RY:
            m = rotation_matrix(GateKind.RY, -float(theta[g.param_index]))
            state = _apply_1q(state, m, g.targets[0], n)
        else:
            state = apply_gate_batch(state, g, theta, n)
    return state[0]


@dataclass(frozen=True)
class MeasurementSelector:
    """Set of basis indices whose squared amplitudes are summed."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise CircuitError("selector must be non-empty")
        if len(set(idx)) != len(idx):
            raise CircuitError(f"selector has duplicate indices: {idx}")
        if min(idx) < 0:
            raise CircuitError("selector indices must be non-negative")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def check(self, dimension: int) -> None:
        if self.indices[-1] >= dimension:
            raise DimensionError(f"selector index {self.indices[-1]} out of range for dimension {dimension}")

    def __len__(self):
        return len(self.indices)


def first_qubit_zero_selector(n_qubits: int) -> MeasurementSelector:
    if n_qubits < 1:
        raise CircuitError("n_qubits must be >= 1")
    return MeasurementSelector(tuple(range(2 ** (n_qubits - 1))))


def full_selector(n_qubits: int) -> MeasurementSelector:
    return MeasurementSelector(tuple(range(2**n_qubits)))


def selector_expectation_batch(states: np.ndarray, selector: MeasurementSelector) -> np.ndarray:
    selector.check(states.shape[1])
    sel = np.abs(states[:, list(selector.indices)]) ** 2
    return sel.sum(axis=1)


def selector_expectation(state: StateVector, selector: MeasurementSelector) -> float:
    """Probability mass on the selected basis states."""
    selector.check(state.dimension)
    total = 0.0
    for i in selector.indices:
        a = state.amplitudes[i]
        total += a.real * a.real + a.imag * a.imag
    return float(total)


def expectation(circuit: ParamCircuit, theta, selector: MeasurementSelector, x: StateVector) -> float:
    return selector_expectation(run_circuit(circuit, theta, x), selector)

