"""Dense layers, residual stacks, and optimizer update rules."""

import numpy as np
import pytest

from density_softmax.autodiff import Tensor
from density_softmax.layers import Dense, DenseNet, l2_penalty
from density_softmax.optim import Adam, OptimizerSpec, SgdMomentum

from conftest import assert_grads_close, central_difference_grad


class TestDense:
    def test_forward_matches_tape_forward(self, rng):
        layer = Dense.init(rng, 3, 5, "tanh")
        x = rng.normal(size=(4, 3))
        np.testing.assert_array_equal(layer.forward(x),
                                      layer.forward_tape(Tensor(x)).data)

    def test_residual_requires_square(self, rng):
        with pytest.raises(ValueError):
            Dense.init(rng, 3, 5, "relu", residual=True)

    def test_residual_forward(self, rng):
        layer = Dense.init(rng, 4, 4, "relu", residual=True)
        x = rng.normal(size=(2, 4))
        inner = np.maximum(x @ layer.weight.data + layer.bias.data, 0.0)
        np.testing.assert_array_equal(layer.forward(x), x + inner)

    def test_unknown_activation(self, rng):
        with pytest.raises(ValueError):
            Dense.init(rng, 2, 2, "gelu")

    def test_zero_init_is_identity_under_residual(self, rng):
        layer = Dense.init(rng, 3, 3, "relu", residual=True, zero=True)
        x = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(layer.forward(x), x)


class TestDenseNet:
    def test_width_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            DenseNet([Dense.init(rng, 2, 3, "relu"), Dense.init(rng, 4, 2, "relu")])

    def test_param_count(self, rng):
        net = DenseNet([Dense.init(rng, 2, 4, "relu"),
                        Dense.init(rng, 4, 3, "linear", bias=False)])
        assert net.param_count() == 2 * 4 + 4 + 4 * 3

    def test_gradients_through_residual_stack(self, rng):
        net = DenseNet([Dense.init(rng, 3, 3, "relu", residual=True),
                        Dense.init(rng, 3, 3, "tanh")])
        x = rng.normal(size=(4, 3))
        params = net.params()

        def loss():
            return float(np.square(net.forward(x)).sum())

        out = net.forward_tape(Tensor(x)).square().sum()
        out.backward()
        assert_grads_close([p.grad for p in params],
                           central_difference_grad(loss, params))

    def test_l2_penalty_value_and_grad(self, rng):
        net = DenseNet([Dense.init(rng, 2, 2, "relu")])
        pen = l2_penalty(net.weight_tensors(), 0.01)
        assert pen.data == pytest.approx(0.01 * np.square(net.layers[0].weight.data).sum())
        assert l2_penalty(net.weight_tensors(), 0.0) is None


class TestSgd:
    def test_one_step_definition(self):
        p = Tensor(np.array(1.0))
        p.grad = np.array(2.0)
        SgdMomentum(lr=0.1).step([p])
        assert p.data == pytest.approx(0.8, abs=1e-15)

    def test_zero_grad_zero_l2_leaves_params(self, rng):
        p = Tensor(rng.normal(size=(3, 3)))
        before = p.data.copy()
        SgdMomentum(lr=0.5, momentum=0.9).step([p])
        np.testing.assert_array_equal(p.data, before)

    def test_momentum_accumulates(self):
        p = Tensor(np.array(0.0))
        opt = SgdMomentum(lr=1.0, momentum=0.5)
        for _ in range(2):
            p.grad = np.array(1.0)
            opt.step([p])
        # steps: v=1 -> p=-1; v=1.5 -> p=-2.5
        assert p.data == pytest.approx(-2.5)

    def test_l2_pulls_towards_zero(self):
        p = Tensor(np.array(2.0))
        p.grad = np.array(0.0)
        SgdMomentum(lr=0.1, l2=0.05).step([p])
        assert p.data == pytest.approx(2.0 - 0.1 * 2 * 0.05 * 2.0)

    def test_shape_mismatch_rejected(self):
        p = Tensor(np.zeros((2, 2)))
        p.grad = np.zeros(3)
        with pytest.raises(ValueError):
            SgdMomentum(lr=0.1).step([p])


class TestAdam:
    def test_first_step_magnitude_is_lr(self):
        for g in (0.5, -3.0, 100.0):
            p = Tensor(np.array(1.0))
            p.grad = np.array(g)
            Adam(lr=1e-3).step([p])
            step = p.data - 1.0
            assert np.sign(step) == -np.sign(g)
            assert abs(step) == pytest.approx(1e-3, rel=1e-4)

    def test_zero_grads_leave_params(self, rng):
        p = Tensor(rng.normal(size=4))
        before = p.data.copy()
        Adam(lr=0.1).step([p])
        np.testing.assert_array_equal(p.data, before)

    def test_state_shapes_mirror_params(self, rng):
        p = Tensor(rng.normal(size=(2, 5)))
        p.grad = rng.normal(size=(2, 5))
        opt = Adam(lr=0.01)
        opt.step([p])
        assert opt._m[id(p)].shape == (2, 5)
        assert opt._v[id(p)].shape == (2, 5)


class TestOptimizerSpec:
    def test_build_kinds(self):
        assert isinstance(OptimizerSpec(kind="adam").build(), Adam)
        assert isinstance(OptimizerSpec(kind="sgd_momentum").build(), SgdMomentum)
        with pytest.raises(ValueError):
            OptimizerSpec(kind="rmsprop").build()
