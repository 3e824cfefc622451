"""Tests for Parameter/Module bookkeeping and the stateful layers."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.errors import ConfigurationError
from tensor_ops.modules import BatchNorm, Conv2d, Linear, Module, Parameter


class TestParameter:

    def test_accumulate_sums(self):
        p = Parameter(np.zeros(3))
        p.accumulate(np.ones(3))
        p.accumulate(np.full(3, 2.0))
        assert_array_equal(p.grad, [3.0, 3.0, 3.0])
        p.zero_grad()
        assert_array_equal(p.grad, 0.0)

    def test_accumulate_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            Parameter(np.zeros(3)).accumulate(np.zeros(4))


class TestModule:

    def _nested(self, rng):
        root = Module()
        root.add_module("conv", Conv2d(2, 3, 3, rng=rng))
        root.add_module("bn", BatchNorm(3))
        return root

    def test_named_parameters_are_dotted(self, rng):
        names = [name for name, _ in self._nested(rng).named_parameters()]
        assert names == ["conv.weight", "bn.gamma", "bn.beta"]

    def test_state_dict_includes_buffers(self, rng):
        state = self._nested(rng).state_dict()
        assert set(state) == {"conv.weight", "bn.gamma", "bn.beta",
                              "bn.running_mean", "bn.running_var"}

    def test_load_state_dict_casts_and_copies(self, rng):
        source = self._nested(rng)
        target = Module()
        target.add_module("conv", Conv2d(2, 3, 3, rng=np.random.default_rng(9), dtype=np.float32))
        target.add_module("bn", BatchNorm(3, dtype=np.float32))
        state = source.state_dict()
        target.load_state_dict(state)
        loaded = target.state_dict()
        assert loaded["conv.weight"].dtype == np.float32
        assert_allclose(loaded["conv.weight"], state["conv.weight"], rtol=1e-6)
        state["bn.gamma"][0] = 42.0
        assert loaded["bn.gamma"][0] == 1.0

    def test_num_parameters(self, rng):
        assert self._nested(rng).num_parameters() == 3 * 3 * 2 * 3 + 3 + 3


class TestLayers:

    def test_conv_gradient_accumulates_over_calls(self, rng):
        conv = Conv2d(2, 2, 3, rng=rng)
        x = rng.standard_normal((2, 2, 4, 4))
        out = conv.forward(x)
        conv.backward(np.ones_like(out))
        first = conv.weight.grad.copy()
        conv.forward(x)
        conv.backward(np.ones_like(out))
        assert_allclose(conv.weight.grad, 2 * first)

    def test_conv_same_padding_keeps_size(self, rng):
        assert Conv2d(2, 5, 3, rng=rng).forward(rng.standard_normal((1, 2, 6, 6))).shape \
            == (1, 5, 6, 6)

    def test_batch_norm_updates_buffers_only_in_training(self, rng):
        bn = BatchNorm(2)
        x = rng.standard_normal((4, 2)) + 5.0
        bn.forward(x, training=False)
        assert_array_equal(bn.state_dict()["running_mean"], 0.0)
        bn.forward(x, training=True)
        assert np.all(bn.state_dict()["running_mean"] > 0.0)

    def test_linear_bias_init(self, rng):
        layer = Linear(3, 2, rng=rng, bias_init=1.5)
        assert_array_equal(layer.bias.data, 1.5)
        assert layer.forward(np.zeros((4, 3))).shape == (4, 2)
