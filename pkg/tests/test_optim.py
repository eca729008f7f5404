"""Adam: frozen first-step oracle, bias correction, weight decay, guards."""

import numpy as np
import pytest

from sgmm.autodiff import Tensor, backward, sum_all
from sgmm.errors import ConfigError, ShapeError
from sgmm.optim import Adam


def make_param(values):
    return Tensor(np.array(values, dtype=np.float64), requires_grad=True)


def test_first_step_frozen_oracle():
    # g=1, lr=0.1: m_hat=1, v_hat=1 -> theta -= 0.1 / (1 + 1e-8)
    p = make_param([0.0])
    opt = Adam({"p": p}, lr=0.1, weight_decay=0.0)
    p.grad = np.array([1.0])
    opt.step()
    expected = -0.1 / (1.0 + 1e-8)
    np.testing.assert_allclose(p.data, [expected], rtol=0, atol=1e-18)
    assert opt.t == 1


def test_constant_gradient_keeps_unit_ratio():
    # with constant g, m_hat = g and sqrt(v_hat) = |g|, so every step moves
    # by lr * g / (|g| + eps)
    p = make_param([0.0])
    opt = Adam({"p": p}, lr=0.01, weight_decay=0.0)
    for _ in range(5):
        p.grad = np.array([2.0])
        opt.step()
    np.testing.assert_allclose(p.data, [-5 * 0.01 * 2.0 / (2.0 + 1e-8)],
                               rtol=1e-7)
    assert opt.t == 5


def test_second_step_hand_value():
    p = make_param([0.0])
    opt = Adam({"p": p}, lr=0.1)
    theta = 0.0
    m = v = 0.0
    for t in (1, 2):
        g = 1.0 + 1e-7 * theta  # additive weight decay at the default 1e-7
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        m_hat = m / (1 - 0.9 ** t)
        v_hat = v / (1 - 0.999 ** t)
        theta -= 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        p.grad = np.array([1.0])
        opt.step()
        np.testing.assert_allclose(p.data, [theta], rtol=1e-12)


def test_weight_decay_shrinks_without_gradient():
    p = make_param([1.0])
    opt = Adam({"p": p}, lr=0.1, weight_decay=0.01)
    p.grad = np.array([0.0])
    opt.step()
    # effective gradient 0.01 -> m_hat=0.01, sqrt(v_hat)=0.01
    expected = 1.0 - 0.1 * 0.01 / (0.01 + 1e-8)
    np.testing.assert_allclose(p.data, [expected], rtol=1e-12)


def test_missing_grad_is_zero_gradient():
    p = make_param([1.0])
    q = make_param([1.0])
    opt = Adam({"p": p, "q": q}, lr=0.1, weight_decay=0.0)
    p.grad = np.array([1.0])
    q.grad = None
    opt.step()
    np.testing.assert_allclose(q.data, [1.0])  # untouched at wd=0
    assert p.data[0] < 1.0


def test_zero_grad_clears_all():
    p = make_param([1.0, 2.0])
    opt = Adam({"p": p})
    backward(sum_all(p * p))
    assert p.grad is not None
    opt.zero_grad()
    assert p.grad is None


def test_scalar_param_supported():
    p = Tensor(np.array(0.0), requires_grad=True)
    opt = Adam({"p": p}, lr=0.5)
    p.grad = np.array(1.0)
    opt.step()
    assert p.data.shape == ()
    assert float(p.data) < 0.0


def test_trajectory_is_deterministic():
    def run():
        p = make_param([0.3, -0.7])
        opt = Adam({"p": p}, lr=0.05)
        for step in range(20):
            backward(sum_all(p * p))
            opt.step()
            opt.zero_grad()
        return p.data.copy()

    np.testing.assert_array_equal(run(), run())


def test_minimizes_quadratic():
    p = make_param([5.0, -3.0])
    opt = Adam({"p": p}, lr=0.1, weight_decay=0.0)
    for _ in range(500):
        backward(sum_all(p * p))
        opt.step()
        opt.zero_grad()
    assert np.abs(p.data).max() < 1e-2


def test_shape_change_raises():
    p = make_param([1.0, 2.0])
    opt = Adam({"p": p})
    p.grad = np.array([1.0, 1.0])
    opt.step()
    p.data = np.zeros(3)
    p.grad = np.ones(3)
    with pytest.raises(ShapeError):
        opt.step()


def test_hyperparameter_validation():
    p = make_param([0.0])
    with pytest.raises(ConfigError):
        Adam({"p": p}, lr=-1.0)
    with pytest.raises(ConfigError):
        Adam({"p": p}, beta1=1.0)
    with pytest.raises(ConfigError):
        Adam({"p": p}, beta2=-0.1)
    with pytest.raises(ConfigError):
        Adam({"p": p}, epsilon=0.0)
    with pytest.raises(ConfigError):
        Adam({"p": p}, weight_decay=-1e-9)


def test_defaults_match_contract():
    p = make_param([0.0])
    opt = Adam({"p": p})
    assert opt.lr == 1e-5
    assert opt.weight_decay == 1e-7
    assert opt.beta1 == 0.9
    assert opt.beta2 == 0.999
    assert opt.epsilon == 1e-8
