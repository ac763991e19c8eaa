"""Model files and per-term explainability reports."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import block as blk
from .errors import ModelError
from .fourier import FourierRidgeModel, model_eval
from .quantum_core import ParamCircuit, run_circuit, selector_expectation
from .training import (
    CircuitModel,
    encode_input,
    flat_params,
    pad_normalize,
    term_breakdown,
    with_flat_params,
)
from .xnn import XnnModel, xnn_eval

REPORT_TOL = 1e-10


def detect_kind(data: dict) -> str:
    if not isinstance(data, dict):
        raise ModelError("model file must contain a JSON object")
    if "theta" in data and "circuit" in data:
        return "circuit"
    if "gates" in data:
        return "bare-circuit"
    if "rows" in data:
        return "block"
    if "coefficients" in data:
        return "fourier"
    if "mu" in data:
        return "xnn"
    raise ModelError("cannot tell which model kind this file holds")


def model_from_dict(kind: str, data: dict):
    if kind == "circuit":
        return CircuitModel.from_dict(data)
    if kind == "bare-circuit":
        return ParamCircuit.from_dict(data)
    if kind == "block":
        return blk.model_from_dict(data)
    if kind == "fourier":
        return FourierRidgeModel.from_dict(data)
    if kind == "xnn":
        return XnnModel.from_dict(data)
    raise ModelError(f"unknown model kind {kind!r}")


def model_to_dict(kind: str, model) -> dict:
    if kind == "block":
        return blk.model_to_dict(model)
    return model.to_dict()


def load_any(path, kind: str | None = None):
    """Return ``(kind, model)``; the kind is sniffed from the keys unless given."""
    with open(path) as fh:
        data = json.load(fh)
    found = detect_kind(data)
    if kind is not None and kind != found and not (kind == "circuit" and found == "bare-circuit"):
        raise ModelError(f"{path} holds a {found} model, not {kind}")
    return found, model_from_dict(found, data)


def write_json_atomic(path, payload) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_output(kind: str, model, x) -> float:
    """Model output through each kind's own evaluation path.

    Circuit and block outputs go through direct simulation and the
    block-diagonal construction respectively, not through the per-term sum,
    so the report invariant is a genuine cross-check.
    """
    if kind == "circuit":
        state = encode_input(x, model.circuit.n_qubits).state
        return selector_expectation(run_circuit(model.circuit, model.theta, state), model.selector)
    if kind == "block":
        return blk.block_output(model, pad_normalize(x, model.dimension)[0])
    if kind == "fourier":
        return model_eval(model, x)
    if kind == "xnn":
        return xnn_eval(model, x)
    raise ModelError(f"unknown model kind {kind!r}")


def parameter_owners(kind: str, model) -> list[int] | None:
    """Term index owning each parameter, where ownership is structural."""
    if kind == "block":
        return model.param_owner()
    return None


def sensitivity_matrix(kind: str, model, x, step: float = 1e-5) -> np.ndarray:
    """``S[i, j] = d term_i / d param_j`` by central differences."""
    base = flat_params(kind, model)
    n_terms = term_breakdown(kind, model, x).shape[0]
    S = np.zeros((n_terms, base.shape[0]))
    for j in range(base.shape[0]):
        up, down = base.copy(), base.copy()
        up[j] += step
        down[j] -= step
        t_up = term_breakdown(kind, with_flat_params(kind, model, up), x)
        t_down = term_breakdown(kind, with_flat_params(kind, model, down), x)
        S[:, j] = (t_up - t_down) / (2 * step)
    return S


@dataclass(frozen=True)
class ExplainReport:
    input_id: str
    x: np.ndarray
    kind: str
    dimensions: dict
    output: float
    mu: float | None
    contributions: np.ndarray
    sensitivity: np.ndarray
    owners: list[int] | None

    def check(self) -> None:
        total = self.mu if self.mu is not None else 0.0
        for c in self.contributions:
            total += c
        if abs(total - self.output) > REPORT_TOL:
            raise ModelError(f"contributions sum {total!r} does not reproduce output {self.output!r}")
        if self.owners is not None:
            for i in range(self.sensitivity.shape[0]):
                for j, owner in enumerate(self.owners):
                    if owner != i and self.sensitivity[i, j] != 0.0:
                        raise ModelError(f"sensitivity S[{i}][{j}] is nonzero across blocks")

    def to_dict(self) -> dict:
        d = {
            "input": self.input_id,
            "x": self.x.tolist(),
            "model_kind": self.kind,
            "dimensions": self.dimensions,
            "output": self.output,
            "contributions": self.contributions.tolist(),
            "sensitivity": self.sensitivity.tolist(),
        }
        if self.mu is not None:
            d["mu"] = self.mu
        if self.owners is not None:
            d["parameter_block"] = self.owners
        return d


def _dimensions(kind: str, model) -> dict:
    if kind == "circuit":
        return {"n_qubits": model.circuit.n_qubits, "n_params": model.circuit.n_params,
                "n_terms": len(model.selector)}
    if kind == "block":
        return {"N": model.dimension, "K": model.K, "n_params": int(model.flat_params().shape[0])}
    return {"d": model.d, "K": model.K}


def explain(kind: str, model, x, input_id: str = "", step: float = 1e-5) -> ExplainReport:
    x = np.asarray(x, dtype=float).reshape(-1)
    report = ExplainReport(
        input_id=input_id or "x=" + ",".join(repr(float(v)) for v in x),
        x=x,
        kind=kind,
        dimensions=_dimensions(kind, model),
        output=float(model_output(kind, model, x)),
        mu=model.mu if kind == "xnn" else None,
        contributions=np.asarray(term_breakdown(kind, model, x), dtype=float),
        sensitivity=sensitivity_matrix(kind, model, x, step),
        owners=parameter_owners(kind, model),
    )
    report.check()
    return report
