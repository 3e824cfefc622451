"""
Mask generation: saliency MLPs, binarization and attention.

Binarization follows the logistic form of the Gumbel-Softmax trick for a
binary variable: with L = log(v / (1 - v)), v ~ U(0, 1),

    P = sigmoid((S + L) / tau),   forward = Sign(P - 0.5),   backward via P.

Sign(0) = 1, so an element is selected iff S + L >= 0 and the selection
frequency at fixed S is sigmoid(S).
"""

from typing import List, Optional, Tuple

import numpy as np

from core.config import GATING_PARAMS, MLP_PARAM_SCOPES
from core.data_models import GatingMask, SaliencySet
from tensor_ops import functional as F
from tensor_ops.modules import BatchNorm, Linear, Module


def is_mlp_parameter(name: str) -> bool:
    """Mask-generator and attention MLP parameters live under gate./attention. scopes."""
    return any(part in MLP_PARAM_SCOPES for part in name.split("."))


class MaskGenerator(Module):
    """
    Light MLP mapping pooled block input to one layer's G x C saliency.

    fc1 (C_1 -> h, no bias) -> BN -> ReLU -> fc2 (h -> G*C, bias) -> reshape
    """

    def __init__(self, c_pooled: int, hidden: int, groups: int, channels: int,
                 rng: np.random.Generator, dtype=np.float64,
                 bias_init: float = GATING_PARAMS["saliency_bias_init"],
                 weight_std: float = GATING_PARAMS["mlp_weight_std"]):
        super().__init__()
        self.groups = groups
        self.channels = channels
        self.fc1 = self.add_module("fc1", Linear(c_pooled, hidden, bias=False, rng=rng, dtype=dtype))
        self.bn = self.add_module("bn", BatchNorm(hidden, dtype=dtype))
        self.fc2 = self.add_module("fc2", Linear(hidden, groups * channels, bias=True, rng=rng,
                                                 dtype=dtype, weight_std=weight_std,
                                                 bias_init=bias_init))
        self._relu_cache = None

    def forward(self, pooled: np.ndarray, training: bool) -> np.ndarray:
        hidden = self.bn.forward(self.fc1.forward(pooled), training)
        hidden, self._relu_cache = F.relu_forward(hidden)
        out = self.fc2.forward(hidden)
        return out.reshape(pooled.shape[0], self.groups, self.channels)

    def backward(self, grad_saliency: np.ndarray) -> np.ndarray:
        grad = self.fc2.backward(grad_saliency.reshape(grad_saliency.shape[0], -1))
        grad = F.relu_backward(grad, self._relu_cache)
        return self.fc1.backward(self.bn.backward(grad))

    def macs(self) -> int:
        """Multiply-accumulates of one forward pass for a single sample."""
        w1, w2 = self.fc1.weight.shape, self.fc2.weight.shape
        return int(w1[0] * w1[1] + w2[0] * w2[1])


def generate_saliency(
    block_input: np.ndarray,
    gates: List[MaskGenerator],
    attention: List[Optional[MaskGenerator]],
    training: bool,
) -> Tuple[SaliencySet, tuple]:
    """
    GAP the block input and run every layer's MLP on it.

    Returns:
        Tuple of (SaliencySet, pooling cache for the backward pass)
    """
    pooled, gap_cache = F.global_avg_pool_forward(block_input)
    gating = [gate.forward(pooled, training) for gate in gates]
    att = [mlp.forward(pooled, training) if mlp is not None else None for mlp in attention]
    return SaliencySet(gating, att), gap_cache


def binarize_eval(saliency: np.ndarray) -> GatingMask:
    """Deterministic Sign: 1 where S >= 0, else 0."""
    hard = (saliency >= 0).astype(saliency.dtype)
    return GatingMask(value=hard, hard=hard)


def sample_logistic_noise(shape: Tuple[int, ...], rng: np.random.Generator,
                          dtype=np.float64) -> np.ndarray:
    """Standard logistic draws log(v / (1 - v)) with v ~ U(0, 1)."""
    v = rng.random(shape)
    bad = (v <= 0.0) | (v >= 1.0)
    while bad.any():
        v[bad] = rng.random(int(bad.sum()))
        bad = (v <= 0.0) | (v >= 1.0)
    return np.log(v / (1.0 - v)).astype(dtype)


def binarize_train(
    saliency: np.ndarray,
    rng: np.random.Generator,
    temperature: float = GATING_PARAMS["gumbel_temperature"],
    relaxed: bool = False,
) -> GatingMask:
    """
    Stochastic binarization with a straight-through soft probability.

    Args:
        saliency: S, any shape
        rng: noise source (identical generator state gives identical masks)
        temperature: relaxation temperature (> 0)
        relaxed: forward the soft probability instead of the hard value

    Returns:
        GatingMask with ``hard`` in {0, 1} and ``soft`` = sigmoid((S + L) / tau)
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    noise = sample_logistic_noise(saliency.shape, rng, saliency.dtype)
    soft, _ = F.sigmoid_forward((saliency + noise) / temperature)
    hard = (soft >= 0.5).astype(saliency.dtype)
    value = soft if relaxed else hard
    return GatingMask(value=value, hard=hard, soft=soft, temperature=temperature)


def binarize_backward(grad_value: np.ndarray, mask: GatingMask) -> np.ndarray:
    """Gradient w.r.t. the saliency, routed through the soft probability."""
    if mask.soft is None:
        raise ValueError("no soft probability stored; masks from binarize_eval are not trainable")
    return grad_value * mask.soft * (1.0 - mask.soft) / mask.temperature


def attention_forward(raw: np.ndarray) -> Tuple[np.ndarray, tuple]:
    """Squash raw attention scores into (0, 1)."""
    return F.sigmoid_forward(raw)


def attention_backward(grad_out: np.ndarray, cache: tuple) -> np.ndarray:
    return F.sigmoid_backward(grad_out, cache)
