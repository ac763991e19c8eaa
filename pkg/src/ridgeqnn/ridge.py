"""Ridge-function view of a measured circuit.

For a selector ``O`` and circuit unitary ``W``, the measured output on
``|x>`` is ``sum_{i in O} |<w_i|x>|^2`` where ``<w_i|`` is row ``i`` of ``W``.
Each squared overlap is a ridge function of ``x`` along ``w_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .quantum_core import (
    UNITARY_TOL,
    MeasurementSelector,
    ParamCircuit,
    StateVector,
    check_unitary,
    circuit_unitary,
    run_circuit,
    selector_expectation,
)


def squared_overlap(direction: np.ndarray, x: np.ndarray) -> float:
    """``|<w|x>|^2`` with ``<w|`` already a row (no conjugation applied)."""
    t = complex(np.dot(direction, x))
    return t.real * t.real + t.imag * t.imag


@dataclass(frozen=True)
class RidgeTerm:
    direction: np.ndarray
    source_index: int

    def __post_init__(self):
        d = np.array(self.direction, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(d) - 1.0) > UNITARY_TOL:
            raise DimensionError(f"ridge direction for row {self.source_index} is not unit norm")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class RidgeDecomposition:
    terms: tuple[RidgeTerm, ...]
    dimension: int
    selector: MeasurementSelector

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if tuple(t.source_index for t in self.terms) != self.selector.indices:
            raise DimensionError("one term per selector index, in selector order")

    @property
    def directions(self) -> np.ndarray:
        return np.array([t.direction for t in self.terms])

    def gram(self) -> np.ndarray:
        d = self.directions
        return d.conj() @ d.T


def extract_rows(W, selector: MeasurementSelector) -> RidgeDecomposition:
    W = check_unitary(W)
    selector.check(W.shape[0])
    terms = tuple(RidgeTerm(W[i, :].copy(), i) for i in selector.indices)
    return RidgeDecomposition(terms, W.shape[0], selector)


def _amplitudes(decomp: RidgeDecomposition, x) -> np.ndarray:
    amps = x.amplitudes if isinstance(x, StateVector) else np.asarray(x, dtype=complex).reshape(-1)
    if amps.shape[0] != decomp.dimension:
        raise DimensionError(f"input dimension {amps.shape[0]} != decomposition dimension {decomp.dimension}")
    return amps


def term_contributions(decomp: RidgeDecomposition, x) -> np.ndarray:
    """Per-term values ``|<w_i|x>|^2`` in selector order."""
    amps = _amplitudes(decomp, x)
    return np.array([squared_overlap(t.direction, amps) for t in decomp.terms])


def ridge_eval(decomp: RidgeDecomposition, x) -> float:
    # left-to-right accumulation so it matches sum(term_contributions) bit for bit
    total = 0.0
    for v in term_contributions(decomp, x):
        total += v
    return float(total)


@dataclass(frozen=True)
class EquivalenceReport:
    direct: float
    ridge: float
    abs_diff: float
    passed: bool
    n_qubits: int
    selector: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "direct": self.direct,
            "ridge": self.ridge,
            "abs_diff": self.abs_diff,
            "pass": self.passed,
            "n_qubits": self.n_qubits,
            "selector": list(self.selector),
        }


def verify_equivalence(
    circuit: ParamCircuit,
    theta,
    selector: MeasurementSelector,
    x: StateVector,
    tol: float = UNITARY_TOL,
) -> EquivalenceReport:
    """Compare direct simulation with the row-wise ridge evaluation."""
    direct = selector_expectation(run_circuit(circuit, theta, x), selector)
    ridge = ridge_eval(extract_rows(circuit_unitary(circuit, theta), selector), x)
    diff = abs(direct - ridge)
    return EquivalenceReport(direct, ridge, diff, bool(diff < tol), circuit.n_qubits, selector.indices)
