"""Independent-row block-diagonal model.

Each weight vector ``w_k`` becomes the leading row of its own unitary
``V_k``; the direct sum of the ``V_k`` acts on ``K`` stacked copies of the
input and every ``N``-th output amplitude carries one overlap ``<w_k|x>``.
Because the blocks never mix, moving the parameters of one block can only
change its own row.

Blocks are stored as a list.  The dense ``K*N x K*N`` matrix is only built
on request and only for ``K*N <= 64``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, ModelError
from .quantum_core import (
    UNITARY_TOL,
    ParamCircuit,
    StateVector,
    check_unitary,
    circuit_row,
    hardware_efficient_ansatz,
)
from .ridge import squared_overlap

DENSE_LIMIT = 64


def complete_unitary(w) -> np.ndarray:
    """Return a unitary whose row 0 is ``w``.

    Householder completion: reflect ``e_0`` onto ``-v'`` where ``v'`` is
    ``conj(w)`` with its leading phase removed (the numerically stable
    direction), undo the phase, then flip the sign of rows ``1..N-1`` so that
    ``w = e_0`` yields the identity.
    """
    w = np.asarray(w, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise DimensionError(f"row must be unit norm, got |w| = {np.linalg.norm(w)!r}")
    n = w.shape[0]
    v = w.conj()
    phase = v[0] / abs(v[0]) if v[0] != 0 else 1.0 + 0j
    vp = v * np.conj(phase)
    vp[0] = abs(v[0])
    u = vp.copy()
    u[0] += 1.0
    P = np.eye(n, dtype=complex) - (2.0 / np.vdot(u, u).real) * np.outer(u, u.conj())
    V = -np.conj(phase) * P
    V[1:, :] *= -1
    V[0, :] = w
    return check_unitary(V)


@dataclass(frozen=True)
class BlockRidgeModel:
    """``K`` unit rows of dimension ``N``, optionally generated by per-block circuits.

    With ``block_params`` present, row ``k`` is row 0 of the hardware-efficient
    ansatz on ``log2(N)`` qubits evaluated at ``block_params[k]``.
    ``tied_params`` lists groups of ``(block, slot)`` pairs forced to share one
    value; it exists to build negative controls for the locality check.
    """

    rows: tuple[np.ndarray, ...]
    dimension: int
    block_params: tuple[np.ndarray, ...] | None = None
    tied_params: tuple[tuple[tuple[int, int], ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        rows = []
        for k, r in enumerate(self.rows):
            r = np.array(r, dtype=complex).reshape(-1)
            if r.shape[0] != self.dimension:
                raise DimensionError(f"row {k} has dimension {r.shape[0]}, expected {self.dimension}")
            if abs(np.linalg.norm(r) - 1.0) > UNITARY_TOL:
                raise ModelError(f"row {k} is not unit norm")
            r.setflags(write=False)
            rows.append(r)
        object.__setattr__(self, "rows", tuple(rows))
        if not 1 <= len(rows) <= self.dimension:
            raise ModelError(f"need 1 <= K <= N, got K={len(rows)}, N={self.dimension}")
        if self.block_params is not None:
            params = []
            for p in self.block_params:
                p = np.array(p, dtype=float).reshape(-1)
                p.setflags(write=False)
                params.append(p)
            if len(params) != len(rows):
                raise ModelError("block_params must have one entry per row")
            object.__setattr__(self, "block_params", tuple(params))
        ties = tuple(tuple((int(b), int(s)) for b, s in group) for group in self.tied_params)
        object.__setattr__(self, "tied_params", ties)
        if ties and self.block_params is None:
            raise ModelError("tied_params requires block_params")

    @property
    def K(self) -> int:
        return len(self.rows)

    @property
    def parameterized(self) -> bool:
        return self.block_params is not None

    def param_owner(self) -> list[int]:
        """Block index for each entry of the flattened parameter vector."""
        if self.block_params is None:
            return []
        return [k for k, p in enumerate(self.block_params) for _ in range(p.shape[0])]

    def flat_params(self) -> np.ndarray:
        if self.block_params is None:
            return np.zeros(0)
        return np.concatenate(self.block_params) if self.block_params else np.zeros(0)


def block_circuit(dimension: int, n_params: int) -> ParamCircuit:
    """Per-block generator circuit: ansatz layers inferred from the slot count."""
    n_qubits = dimension.bit_length() - 1
    if dimension < 2 or 2**n_qubits != dimension:
        raise ModelError(f"parameterized blocks need a power-of-two dimension >= 2, got {dimension}")
    per_layer = 2 * n_qubits
    if n_params < per_layer or n_params % per_layer:
        raise ModelError(f"block parameter count {n_params} is not a positive multiple of {per_layer}")
    return hardware_efficient_ansatz(n_qubits, n_params // per_layer)


def row_from_params(dimension: int, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    return circuit_row(block_circuit(dimension, params.shape[0]), params, 0)


def parameterized_model(dimension: int, block_params, tied_params=()) -> BlockRidgeModel:
    rows = tuple(row_from_params(dimension, p) for p in block_params)
    return BlockRidgeModel(rows, dimension, tuple(block_params), tuple(tied_params))


def random_block_model(dimension: int, K: int, layers: int, rng: np.random.Generator) -> BlockRidgeModel:
    n_qubits = dimension.bit_length() - 1
    params = [rng.uniform(-np.pi, np.pi, size=2 * n_qubits * layers) for _ in range(K)]
    return parameterized_model(dimension, params)


def build_block_diagonal(model: BlockRidgeModel) -> list[np.ndarray]:
    return [complete_unitary(r) for r in model.rows]


def dense_block_diagonal(model: BlockRidgeModel) -> np.ndarray:
    """Materialize the direct sum; testing aid only."""
    K, N = model.K, model.dimension
    if K * N > DENSE_LIMIT:
        raise ModelError(f"dense block-diagonal matrix limited to K*N <= {DENSE_LIMIT}")
    out = np.zeros((K * N, K * N), dtype=complex)
    for k, V in enumerate(build_block_diagonal(model)):
        out[k * N:(k + 1) * N, k * N:(k + 1) * N] = V
    return out


@dataclass(frozen=True)
class StackedState:
    amplitudes: np.ndarray
    block_size: int

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.block_size < 1 or amps.shape[0] % self.block_size:
            raise DimensionError(f"block size {self.block_size} does not divide {amps.shape[0]}")
        if abs(np.linalg.norm(amps) - 1.0) > UNITARY_TOL:
            raise DimensionError("stacked state is not unit norm")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_blocks(self) -> int:
        return self.amplitudes.shape[0] // self.block_size

    def block(self, k: int) -> np.ndarray:
        return self.amplitudes[k * self.block_size:(k + 1) * self.block_size]


def _amps(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.amplitudes
    return np.asarray(x, dtype=complex).reshape(-1)


def replicate_input(x, K: int) -> StackedState:
    if K < 1:
        raise DimensionError("K must be >= 1")
    a = _amps(x)
    return StackedState(np.tile(a, K) / np.sqrt(K), a.shape[0])


def apply_block_model(model: BlockRidgeModel, x) -> StackedState:
    a = _amps(x)
    if a.shape[0] != model.dimension:
        raise DimensionError(f"input dimension {a.shape[0]} != model dimension {model.dimension}")
    stacked = replicate_input(a, model.K)
    N = model.dimension
    out = np.concatenate(
        [V @ stacked.block(k) for k, V in enumerate(build_block_diagonal(model))]
    )
    return StackedState(out, N)


def mod_selector_output(psi: StackedState, block_size: int | None = None) -> float:
    """``K * sum_{i mod N = 0} |psi_i|^2``; the factor ``K`` undoes the replication scaling."""
    if block_size is not None and block_size != psi.block_size:
        raise DimensionError(f"block size mismatch: {block_size} != {psi.block_size}")
    picked = psi.amplitudes[:: psi.block_size]
    total = 0.0
    for a in picked:
        total += a.real * a.real + a.imag * a.imag
    return float(psi.n_blocks * total)


def block_output(model: BlockRidgeModel, x) -> float:
    return mod_selector_output(apply_block_model(model, x))


def block_contributions(model: BlockRidgeModel, x) -> np.ndarray:
    """Per-block ``|<w_k|x>|^2``; entry k reads only row k."""
    a = _amps(x)
    if a.shape[0] != model.dimension:
        raise DimensionError(f"input dimension {a.shape[0]} != model dimension {model.dimension}")
    return np.array([squared_overlap(r, a) for r in model.rows])


def perturb_block(model: BlockRidgeModel, k: int, delta) -> BlockRidgeModel:
    """Shift block ``k``'s parameters by ``delta`` and regenerate affected rows.

    Untied models only ever regenerate row ``k``; any tie group containing a
    slot of block ``k`` drags the other members to the same new value.
    """
    if model.block_params is None:
        raise ModelError("model has no block parameters to perturb")
    if not 0 <= k < model.K:
        raise ModelError(f"block index {k} out of range for K={model.K}")
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.shape != model.block_params[k].shape:
        raise DimensionError(f"delta has length {delta.shape[0]}, block {k} has {model.block_params[k].shape[0]}")
    if not np.any(delta):
        return model
    params = [p.copy() for p in model.block_params]
    params[k] = params[k] + delta
    touched = {k}
    for group in model.tied_params:
        slots = [s for b, s in group if b == k]
        if not slots:
            continue
        value = params[k][slots[0]]
        for b, s in group:
            params[b][s] = value
            touched.add(b)
    rows = list(model.rows)
    for b in sorted(touched):
        rows[b] = row_from_params(model.dimension, params[b])
    return replace(model, rows=tuple(rows), block_params=tuple(params))


def with_params(model: BlockRidgeModel, flat) -> BlockRidgeModel:
    """Rebuild a parameterized model from a flat parameter vector.

    Only blocks whose parameters differ are regenerated, so untouched rows
    are carried over bit for bit.
    """
    if model.block_params is None:
        raise ModelError("model has no block parameters")
    flat = np.asarray(flat, dtype=float)
    params, rows, start = [], list(model.rows), 0
    for k, old in enumerate(model.block_params):
        new = flat[start:start + old.shape[0]].copy()
        start += old.shape[0]
        if not np.array_equal(new, old):
            rows[k] = row_from_params(model.dimension, new)
        params.append(new)
    return replace(model, rows=tuple(rows), block_params=tuple(params))


# -- JSON ------------------------------------------------------------------

def model_to_dict(model: BlockRidgeModel) -> dict:
    d = {
        "dimension": model.dimension,
        "rows": [[[float(a.real), float(a.imag)] for a in r] for r in model.rows],
    }
    if model.block_params is not None:
        d["block_params"] = [p.tolist() for p in model.block_params]
    if model.tied_params:
        d["tied_params"] = [[list(m) for m in g] for g in model.tied_params]
    return d


def model_from_dict(data: dict) -> BlockRidgeModel:
    unknown = set(data) - {"dimension", "rows", "block_params", "tied_params"}
    if unknown:
        raise ModelError(f"unknown block model fields: {sorted(unknown)}")
    try:
        rows = tuple(np.array([complex(re, im) for re, im in r]) for r in data["rows"])
        return BlockRidgeModel(
            rows,
            int(data["dimension"]),
            tuple(np.asarray(p, dtype=float) for p in data["block_params"]) if "block_params" in data else None,
            tuple(tuple(tuple(m) for m in g) for g in data.get("tied_params", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed block model: {exc}") from None


def load_model(path) -> BlockRidgeModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
