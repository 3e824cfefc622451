"""
Masked grouped convolution.

For sample n and group g, the group's output channels are the convolution of
the input scaled channel-wise by scale[n, g, :] (mask value times optional
attention) with that group's filters. A zero scale removes a channel's
contribution exactly.
"""

from typing import List, Optional, Tuple

import numpy as np

from core.errors import ConfigurationError
from msgc.plug_in import GroupFilterBank
from tensor_ops.conv import conv2d_backward, conv2d_forward
from tensor_ops.modules import Module


def regular_partition_mask(batch: int, groups: int, channels: int, dtype=np.float64) -> np.ndarray:
    """Mask where group g selects its contiguous C/G slice (standard grouped conv)."""
    if channels % groups != 0:
        raise ConfigurationError(f"{groups} groups do not divide {channels} input channels")
    width = channels // groups
    mask = np.zeros((batch, groups, channels), dtype=dtype)
    for g in range(groups):
        mask[:, g, g * width:(g + 1) * width] = 1.0
    return mask


def masked_grouped_conv_forward(
    x: np.ndarray,
    filters: List[np.ndarray],
    scale: np.ndarray,
    biases: Optional[List[np.ndarray]] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tuple[np.ndarray, tuple]:
    """
    Args:
        x: input (N, C_in, H, W)
        filters: G arrays (k, k, C_in, C_out / G)
        scale: (N, G, C_in) mask value, optionally times attention
        biases: optional G arrays (C_out / G,)
        stride, padding: conv geometry shared by all groups

    Returns:
        Tuple of (output (N, C_out, H_out, W_out), cache)
    """
    if x.ndim != 4:
        raise ConfigurationError(f"input must be (N, C, H, W), got {x.shape}")
    groups = len(filters)
    expected = (x.shape[0], groups, x.shape[1])
    if scale.shape != expected:
        raise ConfigurationError(f"mask shape {scale.shape} != {expected}")
    if biases is not None and len(biases) != groups:
        raise ConfigurationError(f"{len(biases)} biases for {groups} groups")

    outputs, caches = [], []
    for g, w in enumerate(filters):
        x_g = x * scale[:, g, :, None, None]
        bias = biases[g] if biases is not None else None
        out_g, cache_g = conv2d_forward(x_g, w, bias, stride, padding)
        outputs.append(out_g)
        caches.append((x_g, cache_g))
    out = np.concatenate(outputs, axis=1)
    return out, (x, scale, caches, biases is not None)


def masked_grouped_conv_backward(
    grad_out: np.ndarray, cache: tuple
) -> Tuple[np.ndarray, List[np.ndarray], np.ndarray, Optional[List[np.ndarray]]]:
    """
    Returns:
        Tuple of (grad_x, per-group filter grads, grad_scale, per-group bias grads)
    """
    x, scale, caches, has_bias = cache
    groups = len(caches)
    width = grad_out.shape[1] // groups
    grad_x = np.zeros_like(x)
    grad_scale = np.zeros_like(scale)
    grad_filters, grad_biases = [], []
    for g, (_, cache_g) in enumerate(caches):
        grad_xg, grad_w, grad_b = conv2d_backward(grad_out[:, g * width:(g + 1) * width], cache_g)
        grad_x += grad_xg * scale[:, g, :, None, None]
        grad_scale[:, g, :] = (grad_xg * x).sum(axis=(2, 3))
        grad_filters.append(grad_w)
        grad_biases.append(grad_b)
    return grad_x, grad_filters, grad_scale, (grad_biases if has_bias else None)


class MaskedGroupedConv(Module):
    """Trainable per-group filters of one MSGC layer (bias-free)."""

    def __init__(self, bank: GroupFilterBank, stride: int = 1, padding: Optional[int] = None):
        super().__init__()
        self.stride = stride
        self.padding = bank.kernel_size // 2 if padding is None else padding
        self.weights = [self.add_parameter(f"group{g}.weight", w)
                        for g, w in enumerate(bank.filters)]
        self._cache = None

    @property
    def groups(self) -> int:
        return len(self.weights)

    def bank(self) -> GroupFilterBank:
        return GroupFilterBank([p.data for p in self.weights])

    def forward(self, x: np.ndarray, scale: np.ndarray) -> np.ndarray:
        out, self._cache = masked_grouped_conv_forward(
            x, [p.data for p in self.weights], scale, None, self.stride, self.padding
        )
        return out

    def backward(self, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        grad_x, grad_filters, grad_scale, _ = masked_grouped_conv_backward(grad_out, self._cache)
        for param, grad in zip(self.weights, grad_filters):
            param.accumulate(grad)
        return grad_x, grad_scale
