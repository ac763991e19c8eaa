"""Classical explainable network ``mu + sum_k gamma_k f(w_k . x)``."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ModelError


class Activation(str, enum.Enum):
    IDENTITY = "identity"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    SINE = "sine"

    def __call__(self, z):
        if self is Activation.IDENTITY:
            return z
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.SIGMOID:
            return 1.0 / (1.0 + np.exp(-z))
        return np.sin(z)

    def derivative(self, z):
        if self is Activation.IDENTITY:
            return np.ones_like(z)
        if self is Activation.TANH:
            return 1.0 - np.tanh(z) ** 2
        if self is Activation.SIGMOID:
            s = 1.0 / (1.0 + np.exp(-z))
            return s * (1.0 - s)
        return np.cos(z)


@dataclass(frozen=True)
class XnnModel:
    mu: float
    gammas: np.ndarray  # (K,)
    directions: np.ndarray  # (K, d)
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        g = np.array(self.gammas, dtype=float).reshape(-1)
        w = np.array(self.directions, dtype=float)
        if w.size == 0:
            w = w.reshape(0, w.shape[-1] if w.ndim == 2 else 0)
        if w.ndim != 2 or w.shape[0] != g.shape[0]:
            raise ModelError(f"need one direction per gamma, got {w.shape} for {g.shape[0]} gammas")
        g.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "directions", w)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def K(self) -> int:
        return self.gammas.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def flat_params(self) -> np.ndarray:
        return np.concatenate([[self.mu], self.gammas, self.directions.reshape(-1)])

    def with_flat_params(self, flat) -> "XnnModel":
        flat = np.asarray(flat, dtype=float)
        K, d = self.K, self.d
        return XnnModel(flat[0], flat[1:1 + K], flat[1 + K:].reshape(K, d), self.activation)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "gammas": self.gammas.tolist(),
            "directions": self.directions.tolist(),
            "activation": self.activation.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "XnnModel":
        unknown = set(data) - {"mu", "gammas", "directions", "activation"}
        if unknown:
            raise ModelError(f"unknown xnn model fields: {sorted(unknown)}")
        try:
            return cls(data["mu"], np.asarray(data["gammas"], dtype=float),
                       np.asarray(data["directions"], dtype=float), Activation(data["activation"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"malformed xnn model: {exc}") from None


def load_model(path) -> XnnModel:
    with open(path) as fh:
        return XnnModel.from_dict(json.load(fh))


def _check_x(model: XnnModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if model.K and x.shape[0] != model.d:
        raise DimensionError(f"x has dimension {x.shape[0]}, model expects {model.d}")
    return x


def term_contributions_xnn(model: XnnModel, x) -> np.ndarray:
    x = _check_x(model, x)
    if model.K == 0:
        return np.zeros(0)
    return model.gammas * model.activation(model.directions @ x)


def xnn_eval(model: XnnModel, x) -> float:
    total = model.mu
    for v in term_contributions_xnn(model, x):
        total += v
    return float(total)


@dataclass(frozen=True)
class XnnGradient:
    """Partials of the squared error ``(f(x) - y)^2``."""

    mu: float
    gammas: np.ndarray
    directions: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([[self.mu], self.gammas, self.directions.reshape(-1)])


def xnn_gradient(model: XnnModel, x, target: float) -> XnnGradient:
    x = _check_x(model, x)
    r = 2.0 * (xnn_eval(model, x) - target)
    if model.K == 0:
        return XnnGradient(r, np.zeros(0), np.zeros((0, x.shape[0])))
    z = model.directions @ x
    g_gamma = r * model.activation(z)
    g_dir = (r * model.gammas * model.activation.derivative(z))[:, None] * x[None, :]
    return XnnGradient(r, g_gamma, g_dir)
