"""Tests for the plain host network, the MSGC network and the converter."""

import inspect

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from backbones import msgc_net
from backbones.msgc_net import build_msgc, convert_to_msgc, network_forward_with_ledger
from backbones.tiny_net import build_plain, plain_mac_table
from core.config import DEFAULT_RUN_CONFIG
from core.data_models import MsgcNetConfig, TinyNetConfig
from core.errors import ConfigurationError
from oracles import MultiplyCounter
from tensor_ops import functional as F
from tensor_ops import modules
from tensor_ops.gradcheck import check_parameters


def images(rng, config, n=4):
    return rng.standard_normal((n, config.in_channels, config.input_size, config.input_size))


class TestPlainNet:

    def test_zero_weights_give_bias_logits(self, rng, tiny_net_config):
        net = build_plain(tiny_net_config)
        for name, param in net.named_parameters():
            if name.endswith("weight"):
                param.data[...] = 0.0
        bias = rng.standard_normal(tiny_net_config.num_classes)
        net.head.fc.bias.data[...] = bias
        logits = net.forward(images(rng, tiny_net_config))
        assert_allclose(logits, np.tile(bias, (4, 1)))

    def test_parameter_count(self, tiny_net_config):
        conv3 = 3 * 3 * 8 * 8
        expected = (3 * 3 * 3 * 8 + 2 * 8          # stem conv + bn
                    + 2 * (conv3 + 2 * 8)          # block 0
                    + 2 * (conv3 + 2 * 8)          # block 1
                    + 8 * 8 + 2 * 8                # block 1 projection + bn
                    + 8 * 4 + 4)                   # classifier
        assert build_plain(tiny_net_config).num_parameters() == expected

    def test_projection_only_where_shape_changes(self, tiny_net_config):
        net = build_plain(tiny_net_config)
        assert net.blocks[0].shortcut is None
        assert net.blocks[1].shortcut is not None

    def test_gradients(self, rng, tiny_net_config):
        net = build_plain(tiny_net_config)
        x = images(rng, tiny_net_config)
        y = rng.integers(0, tiny_net_config.num_classes, size=4)

        def loss():
            return F.softmax_cross_entropy_forward(net.forward(x, training=True), y)[0]

        net.zero_grad()
        _, cache = F.softmax_cross_entropy_forward(net.forward(x, training=True), y)
        net.backward(F.softmax_cross_entropy_backward(cache))
        errors = check_parameters(loss, dict(net.named_parameters()), 4, np.random.default_rng(0))
        assert max(errors.values()) < 1e-4

    def test_original_macs_match_multiply_counter(self, rng, tiny_net_config, monkeypatch):
        counter = MultiplyCounter()
        monkeypatch.setattr(modules, "conv2d_forward", counter.wrap_conv(modules.conv2d_forward))
        monkeypatch.setattr(F, "linear_forward", counter.wrap_linear(F.linear_forward))
        net = build_plain(tiny_net_config)
        net.forward(images(rng, tiny_net_config, n=3))
        assert counter.per_sample() == net.original_macs()

    def test_conv_macs_scale_quadratically_with_width(self):
        narrow = dict(plain_mac_table(TinyNetConfig(stem_width=8, widths=(8, 16), strides=(1, 2))))
        wide = dict(plain_mac_table(TinyNetConfig(stem_width=16, widths=(16, 32), strides=(1, 2))))
        for name in ("blocks.0.conv1", "blocks.0.conv2", "blocks.1.conv1", "blocks.1.conv2"):
            assert wide[name] == 4 * narrow[name]


class TestMsgcNet:

    def test_forced_ones_match_plain_network(self, rng, tiny_msgc_config):
        plain = build_plain(tiny_msgc_config.net, seed=3)
        msgc = convert_to_msgc(plain, tiny_msgc_config, seed=3)
        x = images(rng, tiny_msgc_config.net)
        logits, ledger = msgc.forward(x, force_ones=True)
        assert_allclose(logits, plain.forward(x), rtol=0, atol=1e-10)
        assert_array_equal(ledger.achieved, ledger.m_ori)
        assert ledger.m_ori == plain.original_macs()

    def test_conversion_keeps_backbone_parameter_count(self, tiny_msgc_config):
        plain = build_plain(tiny_msgc_config.net)
        msgc = convert_to_msgc(plain, tiny_msgc_config)
        assert msgc.backbone_parameter_count() == plain.num_parameters()
        assert msgc.num_parameters() > plain.num_parameters()

    def test_conversion_copies_running_statistics(self, rng, tiny_msgc_config):
        plain = build_plain(tiny_msgc_config.net)
        plain.forward(images(rng, tiny_msgc_config.net), training=True)
        msgc = convert_to_msgc(plain, tiny_msgc_config)
        assert_array_equal(msgc.state_dict()["blocks.1.bn2.running_mean"],
                           plain.state_dict()["blocks.1.bn2.running_mean"])

    def test_config_mismatch_rejected(self, tiny_msgc_config):
        other = TinyNetConfig(in_channels=3, input_size=8, stem_width=8, widths=(8, 16),
                              strides=(1, 2), num_classes=4)
        with pytest.raises(ConfigurationError):
            convert_to_msgc(build_plain(other), tiny_msgc_config)

    def test_input_size_mismatch_rejected(self, tiny_msgc_config):
        net = tiny_msgc_config.net
        other = TinyNetConfig(in_channels=net.in_channels, input_size=net.input_size * 2,
                              stem_width=net.stem_width, widths=net.widths, strides=net.strides,
                              num_classes=net.num_classes)
        with pytest.raises(ConfigurationError, match="does not describe"):
            convert_to_msgc(build_plain(other), tiny_msgc_config)

    def test_backbone_does_not_depend_on_optimizer(self):
        source = inspect.getsource(msgc_net)
        assert "from optim" not in source
        assert "import optim" not in source

    def test_ledger_is_additive(self, rng, tiny_msgc_config):
        net = build_msgc(MsgcNetConfig(tiny_msgc_config.net, saliency_bias_init=0.0))
        _, ledger = network_forward_with_ledger(net, images(rng, tiny_msgc_config.net))
        assert_array_equal(sum(ledger.per_layer.values()), ledger.achieved)
        assert ledger.m_ori == sum(macs for _, macs in net.mac_table())
        assert_allclose(net.last_costs, ledger.achieved)

    def test_positive_bias_starts_fully_selected(self, rng, tiny_msgc_config):
        net = build_msgc(tiny_msgc_config)
        _, ledger = net.forward(images(rng, tiny_msgc_config.net))
        assert_allclose(ledger.ratio(), 1.0)

    def test_train_mode_masks_vary_per_sample(self, rng, tiny_msgc_config):
        net = build_msgc(MsgcNetConfig(tiny_msgc_config.net, saliency_bias_init=0.0))
        _, ledger = net.forward(images(rng, tiny_msgc_config.net, n=8), "train",
                                np.random.default_rng(0))
        assert np.std(ledger.achieved) > 0

    def test_mlp_overhead_is_small_on_default_config(self):
        net_config = TinyNetConfig(
            DEFAULT_RUN_CONFIG["in_channels"], DEFAULT_RUN_CONFIG["input_size"],
            DEFAULT_RUN_CONFIG["stem_width"], DEFAULT_RUN_CONFIG["widths"],
            DEFAULT_RUN_CONFIG["strides"], DEFAULT_RUN_CONFIG["num_classes"])
        net = build_msgc(MsgcNetConfig(net_config))
        assert net.mlp_overhead() / net.original_macs() < 0.01

    def test_mac_table_matches_plain(self, tiny_msgc_config):
        assert build_msgc(tiny_msgc_config).mac_table() == plain_mac_table(tiny_msgc_config.net)

    def test_mlp_parameters_are_scoped(self, tiny_msgc_config):
        names = [name for name, _ in build_msgc(tiny_msgc_config).named_parameters()]
        assert "blocks.0.gate.layer1.fc1.weight" in names
        assert "blocks.1.attention.layer2.fc2.weight" in names
