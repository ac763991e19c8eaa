"""Full-batch gradient descent over the four model kinds.

Circuit and block models are trained with the two-point parameter-shift
rule; the Fourier and xnn models use their closed-form gradients.  Every
per-sample reduction is a fixed-order numpy sum, so histories are
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import warnings
from dataclasses import dataclass, field
from math import pi
from typing import Callable

import numpy as np

from . import block as blk
from .errors import DimensionError, ModelError, ShiftRuleError, TrainingError
from .fourier import FourierRidgeModel, term_values
from .quantum_core import (
    GateKind,
    MeasurementSelector,
    ParamCircuit,
    StateVector,
    circuit_unitary,
    first_qubit_zero_selector,
    selector_expectation_batch,
)
from .xnn import xnn_eval

log = logging.getLogger(__name__)

SHIFT = pi / 2
MODEL_KINDS = ("circuit", "block", "fourier", "xnn")


# -- data -------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (M, d)
    targets: np.ndarray  # (M,)

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float)
        y = np.array(self.targets, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise DimensionError("dataset needs at least one input row")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return self.inputs.shape[0]


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DimensionError(f"{path}: empty dataset file")
        header = [h.strip() for h in header]
        d = len(header) - 1
        if d < 1 or header[-1] != "y" or header[:-1] != [f"x{i}" for i in range(d)]:
            raise DimensionError(f"{path}: header must be x0..x(d-1),y; got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows or any(len(r) != d + 1 for r in rows):
        raise DimensionError(f"{path}: ragged or empty dataset")
    data = np.array(rows)
    return Dataset(data[:, :d], data[:, d])


def save_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(dataset.d)] + ["y"])
        for x, y in zip(dataset.inputs, dataset.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def two_blobs(n_points: int = 100, seed: int = 0, spread: float = 0.3) -> Dataset:
    """Two Gaussian blobs in the plane, centred on the two axes, labels 0/1."""
    rng = np.random.default_rng(seed)
    half = n_points // 2
    a = rng.normal([1.5, 0.0], spread, size=(half, 2))
    b = rng.normal([0.0, 1.5], spread, size=(n_points - half, 2))
    return Dataset(np.vstack([a, b]), np.r_[np.zeros(half), np.ones(n_points - half)])


def linear_dataset(n_points: int, d: int, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_points, d))
    w = rng.normal(size=d)
    return Dataset(X, X @ w + rng.normal())


# -- config / history ---------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    seed: int = 0
    fd_step: float = 1e-5
    log_every: int = 0
    # keep directions fixed for fourier/xnn models
    freeze_directions: bool = False

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class LossHistory:
    values: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    @property
    def final(self) -> float:
        return self.values[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "mse"])
            for i, v in enumerate(self.values, 1):
                w.writerow([i, repr(v)])


# -- encoding / loss --------------------------------------------------------------

@dataclass(frozen=True)
class EncodedInput:
    state: StateVector
    norm: float


def encode_input(x, n_qubits: int) -> EncodedInput:
    """Amplitude encoding: zero-pad to ``2**n_qubits`` and normalize."""
    x = np.asarray(x, dtype=float).reshape(-1)
    N = 2**n_qubits
    if x.shape[0] > N:
        raise DimensionError(f"input dimension {x.shape[0]} exceeds 2^{n_qubits} = {N}")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise DimensionError("cannot encode the zero vector")
    amps = np.zeros(N, dtype=complex)
    amps[: x.shape[0]] = x / norm
    return EncodedInput(StateVector(amps, n_qubits), norm)


def pad_normalize(X, dimension: int) -> np.ndarray:
    """Zero-pad each row of ``X`` to ``dimension`` and scale it to unit norm."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] > dimension:
        raise DimensionError(f"input dimension {X.shape[1]} exceeds encodable dimension {dimension}")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise DimensionError("cannot encode the zero vector")
    amps = np.zeros((X.shape[0], dimension), dtype=complex)
    amps[:, : X.shape[1]] = X / norms[:, None]
    return amps


def encode_batch(X, n_qubits: int) -> np.ndarray:
    return pad_normalize(X, 2**n_qubits)


def mse_loss(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if p.shape != t.shape or p.shape[0] < 1:
        raise DimensionError(f"length mismatch: {p.shape[0]} predictions, {t.shape[0]} targets")
    r = p - t
    return float(np.mean(r * r))


# -- gradients ------------------------------------------------------------------------

def finite_diff_gradient(eval_fn: Callable[[np.ndarray], float], theta, step: float = 1e-5) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    if not step > 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    grad = np.zeros_like(theta)
    for j in range(theta.shape[0]):
        up, down = theta.copy(), theta.copy()
        up[j] += step
        down[j] -= step
        grad[j] = (eval_fn(up) - eval_fn(down)) / (2 * step)
    return grad


def _check_shift_rule(circuit: ParamCircuit) -> None:
    for g in circuit.gates:
        if g.param_index is not None and g.kind not in (GateKind.RX, GateKind.RY, GateKind.RZ):
            raise ShiftRuleError(f"{g.kind.value} is not a Pauli rotation")
    if any(c != 1 for c in circuit.slot_usage()):
        raise ShiftRuleError("shift rule requires unique slots")


def _batch_amps(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.amplitudes[None, :]
    a = np.asarray(x, dtype=complex)
    return a[None, :] if a.ndim == 1 else a


def circuit_predictions(circuit: ParamCircuit, theta, selector: MeasurementSelector, amps: np.ndarray) -> np.ndarray:
    W = circuit_unitary(circuit, theta)
    return selector_expectation_batch(amps @ W.T, selector)


def parameter_shift_jacobian(circuit: ParamCircuit, theta, selector: MeasurementSelector, amps) -> np.ndarray:
    """``d E / d theta_j`` for every row of ``amps``; shape ``(B, n_params)``."""
    _check_shift_rule(circuit)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    amps = _batch_amps(amps)
    jac = np.zeros((amps.shape[0], theta.shape[0]))
    for j in range(theta.shape[0]):
        up, down = theta.copy(), theta.copy()
        up[j] += SHIFT
        down[j] -= SHIFT
        jac[:, j] = 0.5 * (
            circuit_predictions(circuit, up, selector, amps) - circuit_predictions(circuit, down, selector, amps)
        )
    return jac


def parameter_shift_gradient(circuit: ParamCircuit, theta, selector: MeasurementSelector, x: StateVector) -> np.ndarray:
    if x.n_qubits != circuit.n_qubits:
        raise DimensionError("input and circuit qubit counts differ")
    return parameter_shift_jacobian(circuit, theta, selector, x.amplitudes)[0]


# -- model adapters ---------------------------------------------------------------------

@dataclass(frozen=True)
class CircuitModel:
    """A circuit with its parameters and readout selector."""

    circuit: ParamCircuit
    theta: np.ndarray
    selector: MeasurementSelector

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.circuit.n_params:
            raise ModelError(f"theta has {theta.shape[0]} entries, circuit expects {self.circuit.n_params}")
        self.selector.check(self.circuit.dimension)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def initial(cls, circuit: ParamCircuit, seed: int, selector: MeasurementSelector | None = None) -> "CircuitModel":
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-pi, pi, size=circuit.n_params)
        return cls(circuit, theta, selector or first_qubit_zero_selector(circuit.n_qubits))

    def to_dict(self) -> dict:
        return {
            "circuit": self.circuit.to_dict(),
            "theta": self.theta.tolist(),
            "selector": list(self.selector.indices),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitModel":
        unknown = set(data) - {"circuit", "theta", "selector"}
        if unknown:
            raise ModelError(f"unknown circuit model fields: {sorted(unknown)}")
        try:
            return cls(ParamCircuit.from_dict(data["circuit"]), np.asarray(data["theta"], dtype=float),
                       MeasurementSelector(tuple(data["selector"])))
        except KeyError as exc:
            raise ModelError(f"missing field {exc}") from None


def predict(kind: str, model, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if kind == "circuit":
        amps = encode_batch(X, model.circuit.n_qubits)
        return circuit_predictions(model.circuit, model.theta, model.selector, amps)
    if kind == "block":
        amps = pad_normalize(X, model.dimension)
        R = np.array(model.rows)
        return (np.abs(amps @ R.T) ** 2).sum(axis=1)
    if kind == "fourier":
        Z = X @ model.directions.T
        c = model.coefficients
        return (c.real * np.cos(Z) - c.imag * np.sin(Z)).sum(axis=1)
    if kind == "xnn":
        return np.array([xnn_eval(model, x) for x in X])
    raise ModelError(f"unknown model kind {kind!r}")


def flat_params(kind: str, model) -> np.ndarray:
    if kind == "circuit":
        return model.theta.copy()
    if kind == "block":
        return model.flat_params()
    if kind == "fourier":
        c = model.coefficients
        return np.concatenate([c.real, c.imag, model.directions.reshape(-1)])
    if kind == "xnn":
        return model.flat_params()
    raise ModelError(f"unknown model kind {kind!r}")


def with_flat_params(kind: str, model, flat):
    flat = np.asarray(flat, dtype=float)
    if kind == "circuit":
        return dataclasses.replace(model, theta=flat)
    if kind == "block":
        return blk.with_params(model, flat)
    if kind == "fourier":
        K, d = model.K, model.d
        return FourierRidgeModel(flat[2 * K:].reshape(K, d), flat[:K] + 1j * flat[K:2 * K])
    if kind == "xnn":
        return model.with_flat_params(flat)
    raise ModelError(f"unknown model kind {kind!r}")


def term_breakdown(kind: str, model, x) -> np.ndarray:
    """Per-term contributions for one raw (unencoded) input."""
    from .ridge import extract_rows, term_contributions
    from .xnn import term_contributions_xnn

    if kind == "circuit":
        amps = encode_input(x, model.circuit.n_qubits).state
        return term_contributions(extract_rows(circuit_unitary(model.circuit, model.theta), model.selector), amps)
    if kind == "block":
        return blk.block_contributions(model, pad_normalize(x, model.dimension)[0])
    if kind == "fourier":
        return term_values(model, x)
    if kind == "xnn":
        return term_contributions_xnn(model, x)
    raise ModelError(f"unknown model kind {kind!r}")


def _loss_gradient(kind: str, model, data: Dataset, config: TrainConfig) -> np.ndarray:
    X, y = data.inputs, data.targets
    M = X.shape[0]
    resid = predict(kind, model, X) - y
    if kind == "circuit":
        amps = encode_batch(X, model.circuit.n_qubits)
        try:
            jac = parameter_shift_jacobian(model.circuit, model.theta, model.selector, amps)
        except ShiftRuleError as exc:
            warnings.warn(f"{exc}; falling back to finite differences", stacklevel=3)
            return finite_diff_gradient(
                lambda t: mse_loss(circuit_predictions(model.circuit, t, model.selector, amps), y),
                model.theta, config.fd_step,
            )
        return 2.0 * (resid @ jac) / M
    if kind == "block":
        if model.tied_params:
            raise ModelError("training models with tied parameters is not supported")
        amps = pad_normalize(X, model.dimension)
        grads = []
        for p in model.block_params:
            g = np.zeros_like(p)
            for j in range(p.shape[0]):
                up, down = p.copy(), p.copy()
                up[j] += SHIFT
                down[j] -= SHIFT
                c_up = np.abs(amps @ blk.row_from_params(model.dimension, up)) ** 2
                c_down = np.abs(amps @ blk.row_from_params(model.dimension, down)) ** 2
                g[j] = 2.0 * (resid @ (0.5 * (c_up - c_down))) / M
            grads.append(g)
        return np.concatenate(grads)
    if kind == "fourier":
        Z = X @ model.directions.T  # (M, K)
        a, b = model.coefficients.real, model.coefficients.imag
        cos, sin = np.cos(Z), np.sin(Z)
        r = 2.0 * resid / M
        g_a = r @ cos
        g_b = -(r @ sin)
        g_w = ((r[:, None] * (-a * sin - b * cos)).T @ X)
        if config.freeze_directions:
            g_w = np.zeros_like(g_w)
        return np.concatenate([g_a, g_b, g_w.reshape(-1)])
    if kind == "xnn":
        K = model.K
        if K == 0:
            return np.array([2.0 * resid.sum() / M])
        Z = X @ model.directions.T
        r = 2.0 * resid / M
        act = model.activation
        g_gamma = r @ act(Z)
        g_w = (r[:, None] * model.gammas * act.derivative(Z)).T @ X
        if config.freeze_directions:
            g_w = np.zeros_like(g_w)
        return np.concatenate([[r.sum()], g_gamma, g_w.reshape(-1)])
    raise ModelError(f"unknown model kind {kind!r}")


def check_dimensions(kind: str, model, data: Dataset) -> None:
    if kind == "circuit":
        limit = model.circuit.dimension
    elif kind == "block":
        limit = model.dimension
    elif kind == "xnn" and model.K == 0:
        return
    else:
        if data.d != model.d:
            raise DimensionError(f"dataset dimension {data.d} != model dimension {model.d}")
        return
    if data.d > limit:
        raise DimensionError(f"dataset dimension {data.d} exceeds encodable dimension {limit}")


def train(kind: str, model, dataset: Dataset, config: TrainConfig):
    """Full-batch gradient descent; returns ``(trained_model, LossHistory)``.

    Each history entry is the full-batch MSE after that epoch's update.
    """
    if kind not in MODEL_KINDS:
        raise ModelError(f"unknown model kind {kind!r}")
    check_dimensions(kind, model, dataset)
    history = LossHistory()
    params = flat_params(kind, model)
    for epoch in range(1, config.epochs + 1):
        if config.learning_rate > 0:
            grad = _loss_gradient(kind, model, dataset, config)
            params = params - config.learning_rate * grad
            model = with_flat_params(kind, model, params)
        with np.errstate(over="ignore", invalid="ignore"):
            loss = mse_loss(predict(kind, model, dataset.inputs), dataset.targets)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}", epoch)
        history.values.append(loss)
        if config.log_every and epoch % config.log_every == 0:
            log.info("epoch %d mse %.6g", epoch, loss)
    return model, history


# -- locality -----------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalityReport:
    block: int
    before: np.ndarray
    after: np.ndarray
    changes: np.ndarray
    changed_terms: tuple[int, ...]
    delta_zero: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "before": self.before.tolist(),
            "after": self.after.tolist(),
            "max_abs_change": self.changes.tolist(),
            "changed_terms": list(self.changed_terms),
            "delta_zero": self.delta_zero,
            "pass": self.passed,
        }


def locality_experiment(model: blk.BlockRidgeModel, x, k: int, delta) -> LocalityReport:
    """Perturb block ``k`` and check that only term ``k`` moves.

    Comparison is exact (``!=`` on floats); any off-block change fails.
    """
    delta = np.asarray(delta, dtype=float)
    before = blk.block_contributions(model, x)
    after = blk.block_contributions(blk.perturb_block(model, k, delta), x)
    changed = tuple(int(j) for j in np.flatnonzero(before != after))
    delta_zero = not np.any(delta)
    expected = () if delta_zero else (k,)
    return LocalityReport(k, before, after, np.abs(after - before), changed, delta_zero, changed == expected)
