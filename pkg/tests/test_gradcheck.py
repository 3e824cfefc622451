"""Tests for the finite-difference checker itself."""

import numpy as np
import pytest

from tensor_ops.gradcheck import (
    check_parameters, finite_diff_check, relative_error, sample_coords,
)
from tensor_ops.modules import Linear


class TestFiniteDiffCheck:

    def test_quadratic_passes(self, rng):
        theta = rng.standard_normal((3, 4))
        assert finite_diff_check(lambda t: float(np.sum(t ** 2)), theta, 2 * theta) < 1e-8

    def test_restores_theta(self, rng):
        theta = rng.standard_normal(5)
        before = theta.copy()
        finite_diff_check(lambda t: float(np.sum(t ** 3)), theta, 3 * theta ** 2)
        np.testing.assert_array_equal(theta, before)

    def test_wrong_gradient_is_caught(self, rng):
        theta = rng.standard_normal(4)
        assert finite_diff_check(lambda t: float(np.sum(t ** 2)), theta, 3 * theta) > 0.1

    def test_float32_rejected(self):
        theta = np.ones(3, dtype=np.float32)
        with pytest.raises(TypeError):
            finite_diff_check(lambda t: float(np.sum(t)), theta, np.ones(3, dtype=np.float32))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_check(lambda t: float(np.sum(t)), np.ones(3), np.ones(4))

    def test_non_finite_loss_is_infinite_error(self):
        assert finite_diff_check(lambda t: float("nan"), np.ones(2), np.ones(2)) == float("inf")

    def test_both_zero_is_zero_error(self):
        assert relative_error(0.0, 0.0) == 0.0


class TestCheckParameters:

    def test_bias_only_dependence_passes(self, rng):
        layer = Linear(3, 2, rng=rng)
        x = np.zeros((4, 3))

        def loss():
            return float(np.sum(layer.forward(x) ** 2))

        layer.zero_grad()
        out = layer.forward(x)
        layer.backward(2 * out)
        errors = check_parameters(loss, dict(layer.named_parameters()), None)
        assert set(errors) == {"weight", "bias"}
        assert max(errors.values()) < 1e-6

    def test_sample_coords(self, rng):
        assert len(sample_coords((2, 2), 10, rng)) == 4
        coords = sample_coords((10, 10), 6, rng)
        assert len(set(coords)) == 6
