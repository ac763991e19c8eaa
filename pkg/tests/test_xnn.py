import numpy as np
import pytest

from oracles import central_difference, max_relative_error
from ridgeqnn.errors import DimensionError, ModelError
from ridgeqnn.xnn import (
    Activation,
    XnnModel,
    term_contributions_xnn,
    xnn_eval,
    xnn_gradient,
)


def test_empty_sum():
    m = XnnModel(2.5, [], np.zeros((0, 3)))
    assert xnn_eval(m, [1, 2, 3]) == 2.5
    assert term_contributions_xnn(m, [1, 2, 3]).shape == (0,)


def test_substitution():
    m = XnnModel(1.0, [2.0], [[1.0, 1.0]], Activation.IDENTITY)
    assert xnn_eval(m, [1, 2]) == 7.0
    np.testing.assert_array_equal(term_contributions_xnn(m, [1, 2]), [6.0])


def test_tanh_zero():
    assert xnn_eval(XnnModel(0.0, [1.0], [[1.0, -1.0]], "tanh"), [2.0, 2.0]) == 0.0


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        xnn_eval(XnnModel(0.0, [1.0], [[1.0, 1.0]]), [1.0])
    with pytest.raises(ModelError):
        XnnModel(0.0, [1.0, 2.0], [[1.0, 1.0]])


def _random_model(rng, activation, K=3, d=4):
    return XnnModel(rng.normal(), rng.normal(size=K), rng.normal(size=(K, d)), activation)


@pytest.mark.parametrize("activation", list(Activation))
def test_contributions_exact(activation):
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = _random_model(rng, activation)
        x = rng.normal(size=4)
        total = m.mu
        for v in term_contributions_xnn(m, x):
            total += v
        assert total == xnn_eval(m, x)


@pytest.mark.parametrize("activation", list(Activation))
def test_gamma_linearity(activation):
    rng = np.random.default_rng(1)
    m = _random_model(rng, activation)
    x = rng.normal(size=4)
    s = 2.75
    scaled = XnnModel(s * m.mu, s * m.gammas, m.directions, activation)
    assert abs(xnn_eval(scaled, x) - s * xnn_eval(m, x)) < 1e-12


def test_mu_partial():
    m = XnnModel(0.5, [1.0], [[1.0]])
    g = xnn_gradient(m, [2.0], 1.0)
    assert g.mu == 2 * (2.5 - 1.0)


def test_identity_gamma_partial():
    m = XnnModel(0.5, [1.0, -2.0], [[1.0, 0.0], [0.5, 0.5]])
    x = np.array([2.0, 4.0])
    p = xnn_eval(m, x)
    g = xnn_gradient(m, x, 0.0)
    np.testing.assert_allclose(g.gammas, 2 * p * (m.directions @ x))


@pytest.mark.parametrize("activation", list(Activation))
def test_gradient_vs_finite_differences(activation):
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = _random_model(rng, activation)
        x, y = rng.normal(size=4), rng.normal()
        loss = lambda p: (xnn_eval(m.with_flat_params(p), x) - y) ** 2
        fd = central_difference(loss, m.flat_params(), 1e-5)
        assert max_relative_error(xnn_gradient(m, x, y).flat(), fd) < 1e-5


def test_json_round_trip():
    m = _random_model(np.random.default_rng(3), Activation.SINE)
    again = XnnModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(again.flat_params(), m.flat_params())
    assert again.activation is Activation.SINE
