import json

import numpy as np
import pytest

from oracles import max_relative_error, random_unit
from ridgeqnn import block as blk
from ridgeqnn.errors import DimensionError, ShiftRuleError, TrainingError
from ridgeqnn.fourier import FourierRidgeModel, fit_least_squares
from ridgeqnn.quantum_core import (
    GateKind,
    GateOp,
    MeasurementSelector,
    ParamCircuit,
    StateVector,
    basis_state,
    expectation,
    first_qubit_zero_selector,
    hardware_efficient_ansatz,
    random_circuit,
)
from ridgeqnn.training import (
    CircuitModel,
    Dataset,
    TrainConfig,
    encode_input,
    finite_diff_gradient,
    linear_dataset,
    load_dataset_csv,
    locality_experiment,
    mse_loss,
    parameter_shift_gradient,
    predict,
    save_dataset_csv,
    train,
    two_blobs,
)
from ridgeqnn.xnn import XnnModel

RY = ParamCircuit(1, (GateOp(GateKind.RY, (0,), 0),), 1)
SEL0 = MeasurementSelector((0,))


class TestEncode:
    def test_unit(self):
        e = encode_input([1, 0], 1)
        np.testing.assert_array_equal(e.state.amplitudes, [1, 0])
        assert e.norm == 1.0

    def test_normalize(self):
        e = encode_input([3, 4], 1)
        np.testing.assert_allclose(e.state.amplitudes, [0.6, 0.8], atol=1e-15)
        assert e.norm == 5.0

    def test_pad(self):
        e = encode_input([1, 1, 1], 2)
        np.testing.assert_allclose(e.state.amplitudes, np.array([1, 1, 1, 0]) / np.sqrt(3), atol=1e-15)
        assert e.state.amplitudes[3] == 0

    def test_errors(self):
        with pytest.raises(DimensionError):
            encode_input([0, 0], 1)
        with pytest.raises(DimensionError):
            encode_input([1, 2, 3], 1)

    def test_property(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            d = int(rng.integers(1, 2**n + 1))
            amps = encode_input(rng.normal(size=d) * 10, n).state.amplitudes
            assert abs(np.linalg.norm(amps) - 1) < 1e-12
            assert np.all(amps[d:] == 0)


class TestMse:
    @pytest.mark.parametrize("p,t,expected", [([1, 2], [1, 2], 0.0), ([0], [2], 4.0), ([0, 2], [1, 1], 1.0)])
    def test_values(self, p, t, expected):
        assert mse_loss(p, t) == expected

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            mse_loss([1, 2], [1])


class TestFiniteDiff:
    def test_quadratic(self):
        assert finite_diff_gradient(lambda t: t[0] ** 2, [3.0], 1e-5)[0] == pytest.approx(6, abs=1e-6)

    def test_constant(self):
        np.testing.assert_allclose(finite_diff_gradient(lambda t: 4.2, np.ones(3), 1e-5), 0, atol=1e-9)

    def test_cos_squared(self):
        g = finite_diff_gradient(lambda t: np.cos(t[0] / 2) ** 2, [np.pi / 2], 1e-5)
        assert g[0] == pytest.approx(-0.5, abs=1e-8)

    def test_step(self):
        with pytest.raises(ValueError):
            finite_diff_gradient(lambda t: 0.0, [1.0], 0.0)


class TestParameterShift:
    def test_ry_at_half_pi(self):
        g = parameter_shift_gradient(RY, [np.pi / 2], SEL0, basis_state(0, 1))
        assert g[0] == pytest.approx(-np.sin(np.pi / 2) / 2, abs=1e-15)

    def test_ry_at_zero(self):
        assert parameter_shift_gradient(RY, [0.0], SEL0, basis_state(0, 1))[0] == pytest.approx(0, abs=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_vs_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        c = random_circuit(4, 30, rng)
        theta = rng.uniform(-np.pi, np.pi, c.n_params)
        x = StateVector(random_unit(rng, 16), 4)
        sel = first_qubit_zero_selector(4)
        fd = finite_diff_gradient(lambda t: expectation(c, t, sel, x), theta, 1e-5)
        assert max_relative_error(parameter_shift_gradient(c, theta, sel, x), fd) < 1e-5

    def test_shared_slot(self):
        c = ParamCircuit(1, (GateOp(GateKind.RY, (0,), 0), GateOp(GateKind.RX, (0,), 0)), 1)
        with pytest.raises(ShiftRuleError, match="unique slots"):
            parameter_shift_gradient(c, [0.3], SEL0, basis_state(0, 1))

    def test_shared_slot_training_falls_back(self):
        c = ParamCircuit(1, (GateOp(GateKind.RY, (0,), 0), GateOp(GateKind.RX, (0,), 0)), 1)
        data = Dataset([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0])
        with pytest.warns(UserWarning, match="finite differences"):
            train("circuit", CircuitModel(c, [0.4], SEL0), data, TrainConfig(epochs=3))


class TestTrain:
    def test_zero_learning_rate(self):
        data = two_blobs(20, seed=1)
        m = CircuitModel.initial(hardware_efficient_ansatz(2, 1), seed=0)
        out, h = train("circuit", m, data, TrainConfig(learning_rate=0, epochs=5))
        assert len(h) == 5 and len(set(h.values)) == 1
        np.testing.assert_array_equal(out.theta, m.theta)

    def test_history_is_post_update_loss(self):
        data = linear_dataset(30, 2, seed=0)
        m = XnnModel(0.0, [0.5], [[1.0, -1.0]])
        out, h = train("xnn", m, data, TrainConfig(learning_rate=0.05, epochs=3))
        assert h.final == mse_loss(predict("xnn", out, data.inputs), data.targets)

    def test_xnn_linear_converges(self):
        data = linear_dataset(100, 3, seed=0)
        m = XnnModel(0.0, np.random.default_rng(3).normal(size=2), np.random.default_rng(4).normal(size=(2, 3)))
        _, h = train("xnn", m, data, TrainConfig(learning_rate=0.05, epochs=2000))
        assert h.final < 1e-6

    def test_fourier_cos_fixed_directions(self):
        x = np.linspace(-np.pi, np.pi, 50)[:, None]
        data = Dataset(x, np.cos(x[:, 0]))
        m = FourierRidgeModel([[1.0], [-1.0]], [0, 0])
        out, h = train("fourier", m, data, TrainConfig(learning_rate=0.2, epochs=2000, freeze_directions=True))
        floor = fit_least_squares(m.directions, x, data.targets).residual / len(data)
        assert h.final < 1e-8
        assert h.final >= floor - 1e-15
        np.testing.assert_array_equal(out.directions, m.directions)

    def test_nan_aborts_with_epoch(self):
        data = linear_dataset(20, 2, seed=0)
        m = XnnModel(0.0, [1.0], [[1.0, 1.0]])
        with pytest.raises(TrainingError, match="epoch") as info:
            train("xnn", m, data, TrainConfig(learning_rate=1e6, epochs=500))
        assert info.value.epoch is not None

    @pytest.mark.parametrize("kind", ["circuit", "block", "fourier", "xnn"])
    def test_deterministic(self, kind):
        data = two_blobs(30, seed=2)
        rng = np.random.default_rng(5)
        models = {
            "circuit": CircuitModel.initial(hardware_efficient_ansatz(1, 2), seed=5),
            "block": blk.random_block_model(2, 2, 2, rng),
            "fourier": FourierRidgeModel(rng.normal(size=(3, 2)), [0.1, 0.2j, -0.1]),
            "xnn": XnnModel(0.0, [0.3, -0.2], rng.normal(size=(2, 2)), "tanh"),
        }
        cfg = TrainConfig(learning_rate=0.1, epochs=20, seed=7)
        _, h1 = train(kind, models[kind], data, cfg)
        _, h2 = train(kind, models[kind], data, cfg)
        assert np.array(h1.values).tobytes() == np.array(h2.values).tobytes()

    def test_block_gradient_vs_finite_differences(self):
        data = two_blobs(10, seed=3)
        m = blk.random_block_model(4, 3, 1, np.random.default_rng(6))
        from ridgeqnn.training import _loss_gradient, flat_params, with_flat_params

        g = _loss_gradient("block", m, data, TrainConfig())
        fd = finite_diff_gradient(
            lambda p: mse_loss(predict("block", with_flat_params("block", m, p), data.inputs), data.targets),
            flat_params("block", m), 1e-5)
        assert max_relative_error(g, fd) < 1e-5

    def test_fourier_gradient_vs_finite_differences(self):
        data = two_blobs(10, seed=4)
        rng = np.random.default_rng(7)
        m = FourierRidgeModel(rng.normal(size=(3, 2)), rng.normal(size=3) + 1j * rng.normal(size=3))
        from ridgeqnn.training import _loss_gradient, flat_params, with_flat_params

        g = _loss_gradient("fourier", m, data, TrainConfig())
        fd = finite_diff_gradient(
            lambda p: mse_loss(predict("fourier", with_flat_params("fourier", m, p), data.inputs), data.targets),
            flat_params("fourier", m), 1e-5)
        assert max_relative_error(g, fd) < 1e-5

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            train("circuit", CircuitModel.initial(hardware_efficient_ansatz(1, 1), 0),
                  Dataset(np.ones((3, 3)), np.zeros(3)), TrainConfig(epochs=1))
        with pytest.raises(DimensionError):
            train("xnn", XnnModel(0.0, [1.0], [[1.0]]), Dataset(np.ones((3, 2)), np.zeros(3)), TrainConfig(epochs=1))


class TestLocality:
    def test_zero_delta(self):
        m = blk.random_block_model(4, 4, 1, np.random.default_rng(0))
        r = locality_experiment(m, random_unit(np.random.default_rng(1), 4), 2, np.zeros(4))
        assert r.passed and r.changed_terms == () and r.delta_zero

    def test_two_blocks(self):
        m = blk.random_block_model(2, 2, 2, np.random.default_rng(2))
        r = locality_experiment(m, random_unit(np.random.default_rng(3), 2), 1, np.full(4, 0.1))
        assert r.changes[0] == 0.0 and r.changes[1] != 0.0 and r.passed

    def test_sweep_k8(self):
        rng = np.random.default_rng(4)
        m = blk.random_block_model(8, 8, 1, rng)
        x = random_unit(rng, 8)
        for k in range(8):
            r = locality_experiment(m, x, k, rng.normal(size=6) * 0.1)
            assert r.changed_terms == (k,)
            assert r.passed

    def test_tied_fails(self):
        base = blk.random_block_model(4, 2, 1, np.random.default_rng(5))
        tied = blk.parameterized_model(4, base.block_params, [[(0, 0), (1, 0)]])
        r = locality_experiment(tied, random_unit(np.random.default_rng(6), 4), 0, np.full(4, 0.1))
        assert not r.passed and 1 in r.changed_terms

    def test_report_json(self):
        m = blk.random_block_model(2, 2, 1, np.random.default_rng(7))
        d = locality_experiment(m, np.array([1, 0]), 0, [0.1, 0.2]).to_dict()
        json.dumps(d)
        assert set(d) >= {"before", "after", "max_abs_change", "pass"}


class TestFiles:
    def test_dataset_csv(self, tmp_path):
        data = two_blobs(10, seed=0)
        save_dataset_csv(data, tmp_path / "d.csv")
        again = load_dataset_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(again.inputs, data.inputs)
        np.testing.assert_array_equal(again.targets, data.targets)

    def test_bad_header(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,b\n1,2\n")
        with pytest.raises(DimensionError):
            load_dataset_csv(tmp_path / "d.csv")

    def test_config_defaults(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"epochs": 3}))
        cfg = TrainConfig.from_json(tmp_path / "c.json")
        assert cfg.epochs == 3 and cfg.fd_step == 1e-5
        with pytest.raises(ValueError):
            TrainConfig.from_dict({"momentum": 0.9})
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
