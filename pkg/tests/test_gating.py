"""Tests for saliency binarization and the mask generator."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.special import expit

from core.data_models import MsgcBlockConfig
from msgc import gating
from tensor_ops.gradcheck import finite_diff_check


class TestBinarizeEval:

    def test_sign_of_zero_is_one(self):
        mask = gating.binarize_eval(np.array([-1e-9, 0.0, 1e-9]))
        assert_array_equal(mask.hard, [0.0, 1.0, 1.0])
        assert mask.soft is None

    def test_eval_masks_are_not_trainable(self):
        mask = gating.binarize_eval(np.zeros(3))
        with pytest.raises(ValueError):
            gating.binarize_backward(np.ones(3), mask)


class TestBinarizeTrain:

    @pytest.mark.parametrize("s", [-2.0, -1.0, 0.0, 1.0, 2.0])
    def test_selection_frequency_is_sigmoid(self, s):
        saliency = np.full(100_000, s)
        mask = gating.binarize_train(saliency, np.random.default_rng(7))
        assert abs(mask.hard.mean() - expit(s)) < 0.01

    def test_frequency_does_not_depend_on_temperature(self):
        saliency = np.full(100_000, 1.0)
        hot = gating.binarize_train(saliency, np.random.default_rng(3), temperature=5.0)
        cold = gating.binarize_train(saliency, np.random.default_rng(3), temperature=0.1)
        assert_array_equal(hot.hard, cold.hard)

    def test_same_generator_state_gives_same_mask(self, rng):
        saliency = rng.standard_normal((4, 2, 6))
        a = gating.binarize_train(saliency, np.random.default_rng(11))
        b = gating.binarize_train(saliency, np.random.default_rng(11))
        assert_array_equal(a.hard, b.hard)
        assert_array_equal(a.soft, b.soft)

    def test_forward_value_is_binary(self, rng):
        mask = gating.binarize_train(rng.standard_normal((3, 5)), rng)
        assert set(np.unique(mask.value)) <= {0.0, 1.0}
        assert_array_equal(mask.value, mask.hard)

    def test_relaxed_forwards_soft_value(self, rng):
        mask = gating.binarize_train(rng.standard_normal((3, 5)), rng, relaxed=True)
        assert_array_equal(mask.value, mask.soft)
        assert_array_equal(mask.hard, (mask.soft >= 0.5).astype(float))

    def test_backward_formula(self, rng):
        saliency = rng.standard_normal((2, 3, 4))
        mask = gating.binarize_train(saliency, rng, temperature=0.5)
        grad = rng.standard_normal(saliency.shape)
        expected = grad * mask.soft * (1 - mask.soft) / 0.5
        assert_allclose(gating.binarize_backward(grad, mask), expected)

    def test_backward_matches_relaxed_finite_differences(self, rng):
        saliency = rng.standard_normal((2, 3, 4))
        r = rng.standard_normal(saliency.shape)

        def loss(_):
            relaxed = gating.binarize_train(saliency, np.random.default_rng(5), relaxed=True)
            return float(np.sum(relaxed.value * r))

        mask = gating.binarize_train(saliency, np.random.default_rng(5), relaxed=True)
        assert finite_diff_check(loss, saliency, gating.binarize_backward(r, mask)) < 1e-6

    def test_non_positive_temperature_rejected(self, rng):
        with pytest.raises(ValueError):
            gating.binarize_train(np.zeros(2), rng, temperature=0.0)

    def test_logistic_noise_is_finite(self, rng):
        noise = gating.sample_logistic_noise((10_000,), rng)
        assert np.all(np.isfinite(noise))
        assert abs(noise.mean()) < 0.1


class TestMaskGenerator:

    def test_output_shape_and_bias_init(self, rng):
        mlp = gating.MaskGenerator(8, 2, groups=4, channels=8, rng=rng, bias_init=3.0)
        out = mlp.forward(rng.standard_normal((5, 8)), training=True)
        assert out.shape == (5, 4, 8)
        # small fc2 weights: saliency starts near the bias
        assert np.all(out > 2.0)

    def test_resnet18_stage_parameter_count(self, rng):
        config = MsgcBlockConfig([64, 64, 64], [4, 4], reduction=16)
        assert config.hidden_width == 4
        mlp = gating.MaskGenerator(64, config.hidden_width, groups=4, channels=64, rng=rng)
        out = mlp.forward(rng.standard_normal((2, 64)), training=True)
        assert out.shape == (2, 4, 64)

        counted = {name: p.data.size for name, p in mlp.named_parameters()}
        assert counted == {
            "fc1.weight": 64 * 4,
            "bn.gamma": 4,
            "bn.beta": 4,
            "fc2.weight": 4 * 256,
            "fc2.bias": 256,
        }
        # 64*4 + 4*256 weights, BN affine pair, and the saliency bias of fc2
        assert mlp.num_parameters() == 64 * 4 + 4 * 256 + 2 * 4 + 256

    def test_macs(self, rng):
        mlp = gating.MaskGenerator(16, 4, groups=2, channels=16, rng=rng)
        assert mlp.macs() == 16 * 4 + 4 * 2 * 16

    def test_backward(self, rng):
        mlp = gating.MaskGenerator(6, 3, groups=2, channels=4, rng=rng, bias_init=0.0)
        pooled = rng.standard_normal((4, 6))
        r = rng.standard_normal((4, 2, 4))
        mlp.zero_grad()
        mlp.forward(pooled, training=True)
        grad_pooled = mlp.backward(r)

        def loss(_):
            return float(np.sum(mlp.forward(pooled, training=True) * r))

        assert finite_diff_check(loss, pooled, grad_pooled) < 1e-5
        weight = mlp.fc1.weight
        assert finite_diff_check(loss, weight.data, weight.grad.copy()) < 1e-5
