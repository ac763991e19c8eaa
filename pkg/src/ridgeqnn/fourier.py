"""Exponential ridge model ``Re(sum_k c_k exp(i x.w_k))``.

Each term is ``a_k cos(x.w_k) - b_k sin(x.w_k)`` with ``c_k = a_k + i b_k``,
so every term is a real ridge function along ``w_k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ModelError


@dataclass(frozen=True)
class FourierRidgeModel:
    directions: np.ndarray  # (K, d) real
    coefficients: np.ndarray  # (K,) complex

    def __post_init__(self):
        w = np.array(self.directions, dtype=float)
        c = np.array(self.coefficients, dtype=complex).reshape(-1)
        if w.ndim != 2 or w.shape[0] < 1:
            raise ModelError("directions must be a non-empty (K, d) array")
        if c.shape[0] != w.shape[0]:
            raise ModelError(f"{w.shape[0]} directions but {c.shape[0]} coefficients")
        w.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "directions", w)
        object.__setattr__(self, "coefficients", c)

    @property
    def K(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def to_dict(self) -> dict:
        return {
            "directions": self.directions.tolist(),
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FourierRidgeModel":
        unknown = set(data) - {"directions", "coefficients"}
        if unknown:
            raise ModelError(f"unknown fourier model fields: {sorted(unknown)}")
        try:
            coeffs = [complex(re, im) for re, im in data["coefficients"]]
            return cls(np.asarray(data["directions"], dtype=float), np.asarray(coeffs))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"malformed fourier model: {exc}") from None


def load_model(path) -> FourierRidgeModel:
    with open(path) as fh:
        return FourierRidgeModel.from_dict(json.load(fh))


def fourier_feature(x, w) -> complex:
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if x.shape != w.shape:
        raise DimensionError(f"x has dimension {x.shape[0]}, w has {w.shape[0]}")
    return complex(np.exp(1j * float(x @ w)))


def _check_x(model: FourierRidgeModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.d:
        raise DimensionError(f"x has dimension {x.shape[0]}, model expects {model.d}")
    return x


def term_values(model: FourierRidgeModel, x) -> np.ndarray:
    """Real part of each ``c_k exp(i x.w_k)``."""
    z = model.directions @ _check_x(model, x)
    c = model.coefficients
    return c.real * np.cos(z) - c.imag * np.sin(z)


def model_eval(model: FourierRidgeModel, x) -> float:
    total = 0.0
    for v in term_values(model, x):
        total += v
    return float(total)


def model_eval_batch(model: FourierRidgeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise DimensionError(f"inputs must have shape (M, {model.d})")
    return np.array([model_eval(model, x) for x in X])


def design_matrix(directions, X) -> np.ndarray:
    """Columns ``[cos(X w_k) ..., -sin(X w_k) ...]`` for the real/imag split."""
    Z = np.asarray(X, dtype=float) @ np.asarray(directions, dtype=float).T
    return np.hstack([np.cos(Z), -np.sin(Z)])


@dataclass(frozen=True)
class FourierFit:
    model: FourierRidgeModel
    residual: float  # sum of squared errors
    rank: int
    rank_deficient: bool


def fit_least_squares(directions, inputs, targets) -> FourierFit:
    """Least-squares coefficients for fixed directions.

    Solved by SVD on the real design matrix, so rank-deficient systems get the
    minimum-norm solution (flagged in the result).
    """
    w = np.atleast_2d(np.asarray(directions, dtype=float))
    X = np.asarray(inputs, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[1] != w.shape[1]:
        raise DimensionError(f"inputs must have shape (M, {w.shape[1]})")
    if X.shape[0] != y.shape[0]:
        raise DimensionError("inputs and targets differ in length")
    A = design_matrix(w, X)
    sol, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    K = w.shape[0]
    model = FourierRidgeModel(w, sol[:K] + 1j * sol[K:])
    r = model_eval_batch(model, X) - y
    return FourierFit(model, float(r @ r), int(rank), bool(rank < 2 * K))
