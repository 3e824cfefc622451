"""
2D convolution (cross-correlation) via im2col.

Weights use the (k, k, C_in, C_out) layout. The column view is built with
``as_strided`` so the forward pass is a single tensordot; the backward pass
scatters column gradients back with one strided add per kernel offset.
"""

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import as_strided

from core.data_models import conv_output_size
from core.errors import ConfigurationError


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def im2col(x_padded: np.ndarray, k: int, stride: int, h_out: int, w_out: int) -> np.ndarray:
    """
    Read-only column view with shape (N, C, k, k, H_out, W_out).

    cols[n, c, p, q, i, j] = x_padded[n, c, i*stride + p, j*stride + q]
    """
    x_padded = np.ascontiguousarray(x_padded)
    n, c, _, _ = x_padded.shape
    s0, s1, s2, s3 = x_padded.strides
    return as_strided(
        x_padded,
        shape=(n, c, k, k, h_out, w_out),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )


def col2im(cols: np.ndarray, padded_shape: Tuple[int, ...], stride: int) -> np.ndarray:
    """Adjoint of im2col: sum column entries back into a padded image."""
    _, _, k, _, h_out, w_out = cols.shape
    out = np.zeros(padded_shape, dtype=cols.dtype)
    for p in range(k):
        for q in range(k):
            out[:, :, p:p + stride * h_out:stride, q:q + stride * w_out:stride] += cols[:, :, p, q]
    return out


def check_conv_shapes(x: np.ndarray, w: np.ndarray, bias: Optional[np.ndarray]) -> None:
    if x.ndim != 4:
        raise ConfigurationError(f"conv input must be (N, C, H, W), got {x.shape}")
    if w.ndim != 4 or w.shape[0] != w.shape[1]:
        raise ConfigurationError(f"conv weight must be (k, k, C_in, C_out), got {w.shape}")
    if w.shape[0] % 2 != 1:
        raise ConfigurationError(f"conv kernel size must be odd, got {w.shape[0]}")
    if x.shape[1] != w.shape[2]:
        raise ConfigurationError(
            f"conv input has {x.shape[1]} channels but weight expects {w.shape[2]}"
        )
    if bias is not None and bias.shape != (w.shape[3],):
        raise ConfigurationError(f"conv bias shape {bias.shape} != {(w.shape[3],)}")


def conv2d_forward(
    x: np.ndarray,
    w: np.ndarray,
    bias: Optional[np.ndarray] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tuple[np.ndarray, tuple]:
    """
    Standard cross-correlation.

    Args:
        x: input (N, C_in, H, W)
        w: weights (k, k, C_in, C_out)
        bias: optional (C_out,)
        stride: spatial stride
        padding: zero padding on every side

    Returns:
        Tuple of (output (N, C_out, H_out, W_out), cache)
    """
    check_conv_shapes(x, w, bias)
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"invalid stride {stride} / padding {padding}")
    k = w.shape[0]
    h_out = conv_output_size(x.shape[2], k, stride, padding)
    w_out = conv_output_size(x.shape[3], k, stride, padding)

    x_padded = _pad(x, padding)
    cols = im2col(x_padded, k, stride, h_out, w_out)
    # (N, H_out, W_out, C_out) -> (N, C_out, H_out, W_out)
    out = np.tensordot(cols, w, axes=([1, 2, 3], [2, 0, 1])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias[None, :, None, None]
    out = np.ascontiguousarray(out)
    cache = (cols, w, x_padded.shape, stride, padding, bias is not None)
    return out, cache


def conv2d_backward(
    grad_out: np.ndarray, cache: tuple
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Exact gradients of conv2d_forward w.r.t. input, weights and bias."""
    cols, w, padded_shape, stride, padding, has_bias = cache
    n, _, _, _, h_out, w_out = cols.shape
    expected = (n, w.shape[3], h_out, w_out)
    if grad_out.shape != expected:
        raise ConfigurationError(f"conv gradient shape {grad_out.shape} != {expected}")

    # (C_in, k, k, C_out) -> (k, k, C_in, C_out)
    grad_w = np.tensordot(cols, grad_out, axes=([0, 4, 5], [0, 2, 3])).transpose(1, 2, 0, 3)
    grad_b = grad_out.sum(axis=(0, 2, 3)) if has_bias else None

    # (k, k, C_in, N, H_out, W_out) -> (N, C_in, k, k, H_out, W_out)
    grad_cols = np.tensordot(w, grad_out, axes=([3], [1])).transpose(3, 2, 0, 1, 4, 5)
    grad_padded = col2im(grad_cols, padded_shape, stride)
    if padding:
        grad_x = grad_padded[:, :, padding:-padding, padding:-padding]
    else:
        grad_x = grad_padded
    return np.ascontiguousarray(grad_x), np.ascontiguousarray(grad_w), grad_b


def conv2d_macs(c_in: int, c_out: int, k: int, h_out: int, w_out: int) -> int:
    """Multiply-accumulates of a dense convolution."""
    return int(k * k * c_in * c_out * h_out * w_out)
