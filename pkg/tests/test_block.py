"""Tests for the MSGC block."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.data_models import MsgcBlockConfig
from core.errors import ConfigurationError
from msgc.block import MsgcBlock
from msgc.macs import block_original_macs
from tensor_ops import functional as F
from tensor_ops.conv import conv2d_forward
from tensor_ops.gradcheck import check_parameters, finite_diff_check


def identity_block(rng, attention=(1, 2), bias_init=3.0):
    config = MsgcBlockConfig([8, 8, 8], [2, 4], reduction=4, attention_layers=attention,
                             input_size=(5, 5))
    return MsgcBlock(config, rng, saliency_bias_init=bias_init)


def downsample_block(rng):
    config = MsgcBlockConfig([4, 8, 8], [1, 4], strides=[2, 1], reduction=2,
                             attention_layers=[2], input_size=(6, 6))
    return MsgcBlock(config, rng, shortcut=True, saliency_bias_init=0.0)


class TestForward:

    def test_output_shape_and_ledger(self, rng):
        block = downsample_block(rng)
        out, ledger = block.forward(rng.standard_normal((3, 4, 6, 6)))
        assert out.shape == (3, 8, 3, 3)
        assert ledger.num_samples == 3
        assert ledger.m_ori == block_original_macs(block.config)
        assert np.all(ledger.achieved <= ledger.m_ori)
        assert_allclose(block.last_costs, ledger.achieved)

    def test_eval_is_deterministic(self, rng):
        block = identity_block(rng, bias_init=0.0)
        x = rng.standard_normal((2, 8, 5, 5))
        a, la = block.forward(x)
        b, lb = block.forward(x)
        assert_array_equal(a, b)
        assert_array_equal(la.achieved, lb.achieved)

    def test_force_ones_is_dense_basic_block(self, rng):
        block = identity_block(rng)
        x = rng.standard_normal((2, 8, 5, 5))
        out, ledger = block.forward(x, force_ones=True)
        assert_array_equal(ledger.achieved, ledger.m_ori)

        h = x
        for i in range(2):
            w = block.convs[i].bank().concatenate()
            z = conv2d_forward(h, w, None, 1, 1)[0]
            bn = block.bns[i].state_dict()
            z = F.batch_norm_forward(z, bn["gamma"], bn["beta"], bn["running_mean"],
                                     bn["running_var"], training=False)[0]
            h = np.maximum(z, 0.0) if i == 0 else z
        assert_allclose(out, np.maximum(h + x, 0.0), atol=1e-12)

    def test_attention_layers(self, rng):
        block = downsample_block(rng)
        assert block.has_attention
        block.forward(rng.standard_normal((2, 4, 6, 6)))
        assert block.last_attention[0] is None
        assert block.last_attention[1].shape == (2, 4, 8)
        assert np.all((block.last_attention[1] > 0) & (block.last_attention[1] < 1))

    def test_force_ones_skips_attention(self, rng):
        block = downsample_block(rng)
        block.forward(rng.standard_normal((2, 4, 6, 6)), force_ones=True)
        assert block.last_attention == [None, None]

    def test_train_mode_needs_rng(self, rng):
        block = identity_block(rng)
        with pytest.raises(ConfigurationError):
            block.forward(rng.standard_normal((2, 8, 5, 5)), mode="train")

    def test_unknown_mode(self, rng):
        block = identity_block(rng)
        with pytest.raises(ConfigurationError):
            block.forward(rng.standard_normal((2, 8, 5, 5)), mode="fast")

    def test_input_width_checked(self, rng):
        block = identity_block(rng)
        with pytest.raises(ConfigurationError):
            block.forward(rng.standard_normal((2, 4, 5, 5)))

    def test_identity_shortcut_needs_matching_shapes(self, rng):
        config = MsgcBlockConfig([4, 8, 8], [1, 4], input_size=(5, 5))
        with pytest.raises(ConfigurationError):
            MsgcBlock(config, rng)

    def test_parameter_scopes(self, rng):
        names = [name for name, _ in downsample_block(rng).named_parameters()]
        assert "gate.layer1.fc1.weight" in names
        assert "attention.layer2.fc2.bias" in names
        assert "conv1.group0.weight" in names
        assert "shortcut.weight" in names
        assert not any(name.startswith("attention.layer1") for name in names)


class TestBackward:

    def test_relaxed_gradients(self, rng):
        block = downsample_block(rng)
        x = rng.standard_normal((3, 4, 6, 6))
        r = rng.standard_normal((3, 8, 3, 3))
        c = rng.standard_normal(3) * 1e-3

        def loss():
            out, _ = block.forward(x, "relaxed", np.random.default_rng(21))
            return float(np.sum(out * r) + np.sum(block.last_costs * c))

        block.zero_grad()
        block.forward(x, "relaxed", np.random.default_rng(21))
        grad_x = block.backward(r, c)
        errors = check_parameters(loss, dict(block.named_parameters()), 4,
                                  np.random.default_rng(0))
        assert max(errors.values()) < 1e-4
        assert finite_diff_check(lambda _: loss(), x, grad_x,
                                 [(0, 0, 0, 0), (1, 2, 3, 4), (2, 3, 5, 5)]) < 1e-4

    def test_eval_mode_leaves_gates_without_gradient(self, rng):
        block = identity_block(rng)
        x = rng.standard_normal((2, 8, 5, 5))
        out, _ = block.forward(x)
        block.zero_grad()
        block.backward(np.ones_like(out))
        gate_grads = [p.grad for name, p in block.named_parameters() if name.startswith("gate.")]
        assert all(np.all(g == 0.0) for g in gate_grads)
