"""Command-line entry point.

Exit codes: 0 all checks passed, 1 checks ran and failed, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from math import pi

import numpy as np

from . import block as blk
from .errors import ModelError, RidgeQNNError, TrainingError
from .fourier import FourierRidgeModel
from .quantum_core import (
    MeasurementSelector,
    build_state,
    first_qubit_zero_selector,
    hardware_efficient_ansatz,
    load_circuit,
)
from .report import explain, load_any, model_to_dict, write_json_atomic
from .ridge import verify_equivalence
from .training import (
    MODEL_KINDS,
    CircuitModel,
    Dataset,
    TrainConfig,
    linear_dataset,
    load_dataset_csv,
    locality_experiment,
    mse_loss,
    pad_normalize,
    predict,
    save_dataset_csv,
    train,
    two_blobs,
)
from .xnn import Activation, XnnModel

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _emit(payload: dict, out: str | None) -> None:
    if out:
        write_json_atomic(out, payload)
    else:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise InputError(f"cannot parse {text!r} as comma-separated numbers") from None


def random_state(n_qubits: int, rng: np.random.Generator):
    N = 2**n_qubits
    return build_state(rng.normal(size=N) + 1j * rng.normal(size=N))


# -- verify -------------------------------------------------------------------------

def cmd_verify(args) -> int:
    circuit = load_circuit(args.circuit)
    selector = (MeasurementSelector(tuple(int(v) for v in _floats(args.selector)))
                if args.selector else first_qubit_zero_selector(circuit.n_qubits))
    selector.check(circuit.dimension)
    rng = np.random.default_rng(args.seed)
    trials = []
    for _ in range(args.trials):
        theta = rng.uniform(-pi, pi, size=circuit.n_params)
        x = random_state(circuit.n_qubits, rng)
        trials.append(verify_equivalence(circuit, theta, selector, x, args.tol).to_dict())
    n_pass = sum(t["pass"] for t in trials)
    payload = {
        "seed": args.seed,
        "tol": args.tol,
        "trials": len(trials),
        "passed": n_pass,
        "failed": len(trials) - n_pass,
        "max_abs_diff": max((t["abs_diff"] for t in trials), default=0.0),
        "all_pass": n_pass == len(trials),
        "results": trials,
    }
    _emit(payload, args.out)
    return EXIT_OK if payload["all_pass"] else EXIT_FAIL


# -- train ----------------------------------------------------------------------------

def rescale_targets(y: np.ndarray):
    """Affine map of targets into [0.05, 0.95] unless they already sit in [0, 1]."""
    lo, hi = float(y.min()), float(y.max())
    if lo >= 0.0 and hi <= 1.0:
        return y, None
    if hi == lo:
        scale, offset = 0.0, 0.5
    else:
        scale = 0.9 / (hi - lo)
        offset = 0.05 - scale * lo
    return scale * y + offset, {"scale": scale, "offset": offset}


def cmd_train(args) -> int:
    config = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config = TrainConfig(**{**config.__dict__, "seed": args.seed})
    found, model = load_any(args.model, args.kind)
    if found == "bare-circuit":
        model = CircuitModel.initial(model, config.seed)
    data = load_dataset_csv(args.dataset)
    transform = None
    if args.kind in ("circuit", "block"):
        y, transform = rescale_targets(np.asarray(data.targets))
        data = Dataset(data.inputs, y)
    trained, history = train(args.kind, model, data, config)
    write_json_atomic(args.out, model_to_dict(args.kind, trained))
    history_path = args.history or os.path.splitext(args.out)[0] + ".history.csv"
    history.to_csv(history_path)
    summary = {
        "kind": args.kind,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "seed": config.seed,
        "initial_loss": mse_loss(predict(args.kind, model, data.inputs), data.targets),
        "final_loss": history.final,
        "target_transform": transform,
        "model": args.out,
        "history": history_path,
    }
    _emit(summary, args.summary or os.path.splitext(args.out)[0] + ".summary.json")
    return EXIT_OK


# -- explain -------------------------------------------------------------------------------

def cmd_explain(args) -> int:
    kind, model = load_any(args.model, args.kind)
    if kind == "bare-circuit":
        raise InputError("explain needs a circuit model file with theta and selector")
    if args.x is not None:
        x, input_id = _floats(args.x), ""
    elif args.dataset is not None:
        data = load_dataset_csv(args.dataset)
        if not 0 <= args.row < len(data):
            raise InputError(f"row {args.row} out of range for {len(data)} samples")
        x, input_id = data.inputs[args.row], f"{os.path.basename(args.dataset)}#{args.row}"
    else:
        raise InputError("give --x or --dataset/--row")
    report = explain(kind, model, x, input_id, args.step)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


# -- locality --------------------------------------------------------------------------------

def cmd_locality(args) -> int:
    _, model = load_any(args.model, "block")
    if not model.parameterized:
        raise InputError("locality needs a block model with block_params")
    rng = np.random.default_rng(args.seed)
    if args.x is not None:
        x = pad_normalize(_floats(args.x), model.dimension)[0]
    else:
        x = rng.normal(size=model.dimension) + 1j * rng.normal(size=model.dimension)
        x = x / np.linalg.norm(x)
    if x.shape[0] != model.dimension:
        raise InputError(f"input dimension {x.shape[0]} != model dimension {model.dimension}")
    blocks = range(model.K) if args.sweep else [args.block]
    reports = []
    for k in blocks:
        if not 0 <= k < model.K:
            raise InputError(f"block {k} out of range for K={model.K}")
        delta = np.full(model.block_params[k].shape, args.delta)
        reports.append(locality_experiment(model, x, k, delta).to_dict())
    payload = {
        "seed": args.seed,
        "delta": args.delta,
        "K": model.K,
        "N": model.dimension,
        "all_pass": all(r["pass"] for r in reports),
        "results": reports,
    }
    _emit(payload, args.out)
    return EXIT_OK if payload["all_pass"] else EXIT_FAIL


# -- helpers for producing inputs -------------------------------------------------------------

def cmd_init(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "circuit":
        circuit = hardware_efficient_ansatz(args.n_qubits, args.layers)
        payload = circuit.to_dict() if args.bare else CircuitModel.initial(circuit, args.seed).to_dict()
    elif args.kind == "block":
        N = 2**args.n_qubits
        payload = blk.model_to_dict(blk.random_block_model(N, args.terms or N, args.layers, rng))
    elif args.kind == "fourier":
        K = args.terms or 4
        coeffs = 0.1 * (rng.normal(size=K) + 1j * rng.normal(size=K))
        payload = FourierRidgeModel(rng.normal(size=(K, args.dim)), coeffs).to_dict()
    else:
        K = args.terms or 2
        payload = XnnModel(0.0, rng.normal(size=K), rng.normal(size=(K, args.dim)),
                           Activation(args.activation)).to_dict()
    write_json_atomic(args.out, payload)
    return EXIT_OK


def cmd_dataset(args) -> int:
    if args.name == "blobs":
        data = two_blobs(args.points, args.seed)
    elif args.name == "linear":
        data = linear_dataset(args.points, args.dim, args.seed)
    else:
        x = np.linspace(-pi, pi, args.points)
        data = Dataset(x[:, None], np.cos(x))
    save_dataset_csv(data, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ridgeqnn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check direct vs ridge evaluation on random trials")
    v.add_argument("circuit")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-10)
    v.add_argument("--selector", help="comma-separated basis indices (default: first qubit in |0>)")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("train", help="full-batch gradient descent")
    t.add_argument("kind", choices=MODEL_KINDS)
    t.add_argument("model")
    t.add_argument("dataset")
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--history")
    t.add_argument("--summary")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("explain", help="per-term contributions and sensitivities")
    e.add_argument("model")
    e.add_argument("--kind", choices=MODEL_KINDS)
    e.add_argument("--x", help="comma-separated input vector")
    e.add_argument("--dataset")
    e.add_argument("--row", type=int, default=0)
    e.add_argument("--step", type=float, default=1e-5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_explain)

    lo = sub.add_parser("locality", help="perturb one block, check the others stay put")
    lo.add_argument("model")
    lo.add_argument("--sweep", action="store_true")
    lo.add_argument("--block", type=int, default=0)
    lo.add_argument("--delta", type=float, default=0.1)
    lo.add_argument("--x")
    lo.add_argument("--seed", type=int, default=0)
    lo.add_argument("--out")
    lo.set_defaults(func=cmd_locality)

    i = sub.add_parser("init", help="write a random starting model")
    i.add_argument("kind", choices=MODEL_KINDS)
    i.add_argument("--n-qubits", type=int, default=2)
    i.add_argument("--layers", type=int, default=2)
    i.add_argument("--terms", type=int)
    i.add_argument("--dim", type=int, default=2)
    i.add_argument("--activation", default="identity", choices=[a.value for a in Activation])
    i.add_argument("--bare", action="store_true", help="circuit only: write the bare circuit file")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_init)

    d = sub.add_parser("dataset", help="write a toy dataset CSV")
    d.add_argument("name", choices=("blobs", "linear", "cos"))
    d.add_argument("--points", type=int, default=100)
    d.add_argument("--dim", type=int, default=3)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (InputError, RidgeQNNError, ModelError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # exit-code contract: nothing outside {0, 1, 2}
        print(f"error: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
