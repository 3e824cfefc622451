"""
Pure forward/backward pairs for the dense ops used by MSGC.

Every forward returns its output together with a cache tuple; the matching
backward takes the upstream gradient and that cache. Nothing here mutates
its inputs.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import expit, log_softmax, softmax

from core.config import BATCH_NORM_PARAMS
from core.errors import ConfigurationError, EmptyBatchError, LabelRangeError


def _require_rank(x: np.ndarray, rank: int, name: str) -> None:
    if x.ndim != rank:
        raise ConfigurationError(f"{name} must have rank {rank}, got shape {x.shape}")


# ---------------------------------------------------------------------------
# Global average pooling
# ---------------------------------------------------------------------------

def global_avg_pool_forward(x: np.ndarray) -> Tuple[np.ndarray, tuple]:
    """(N, C, H, W) -> (N, C) mean over the spatial dims."""
    _require_rank(x, 4, "global_avg_pool input")
    if x.shape[2] < 1 or x.shape[3] < 1:
        raise ConfigurationError(f"empty spatial dims {x.shape}")
    return x.mean(axis=(2, 3)), (x.shape,)


def global_avg_pool_backward(grad_out: np.ndarray, cache: tuple) -> np.ndarray:
    (shape,) = cache
    n, c, h, w = shape
    if grad_out.shape != (n, c):
        raise ConfigurationError(f"gradient shape {grad_out.shape} != {(n, c)}")
    return np.broadcast_to(grad_out[:, :, None, None] / (h * w), shape).copy()


# ---------------------------------------------------------------------------
# Linear
# ---------------------------------------------------------------------------

def linear_forward(
    x: np.ndarray, w: np.ndarray, bias: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, tuple]:
    """out = x @ w + bias, with x (N, F_in) and w (F_in, F_out)."""
    _require_rank(x, 2, "linear input")
    _require_rank(w, 2, "linear weight")
    if x.shape[1] != w.shape[0]:
        raise ConfigurationError(f"linear: inner dims differ, {x.shape} @ {w.shape}")
    out = x @ w
    if bias is not None:
        if bias.shape != (w.shape[1],):
            raise ConfigurationError(f"linear: bias shape {bias.shape} != {(w.shape[1],)}")
        out = out + bias
    return out, (x, w, bias is not None)


def linear_backward(
    grad_out: np.ndarray, cache: tuple
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    x, w, has_bias = cache
    grad_x = grad_out @ w.T
    grad_w = x.T @ grad_out
    grad_b = grad_out.sum(axis=0) if has_bias else None
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------

def _bn_axes(x: np.ndarray) -> Tuple[int, ...]:
    if x.ndim == 2:
        return (0,)
    if x.ndim == 4:
        return (0, 2, 3)
    raise ConfigurationError(f"batch_norm expects rank 2 or 4 input, got shape {x.shape}")


def _bn_broadcast(v: np.ndarray, ndim: int) -> np.ndarray:
    return v if ndim == 2 else v[None, :, None, None]


def batch_norm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    eps: float = BATCH_NORM_PARAMS["eps"],
    momentum: float = BATCH_NORM_PARAMS["momentum"],
) -> Tuple[np.ndarray, tuple, Tuple[np.ndarray, np.ndarray]]:
    """
    Batch normalization over the feature axis (axis 1).

    Returns:
        Tuple of (output, cache, (new_running_mean, new_running_var)). In
        eval mode the running statistics are returned unchanged.
    """
    axes = _bn_axes(x)
    features = x.shape[1]
    for name, v in (("gamma", gamma), ("beta", beta),
                    ("running_mean", running_mean), ("running_var", running_var)):
        if v.shape != (features,):
            raise ConfigurationError(f"batch_norm: {name} shape {v.shape} != {(features,)}")

    if training:
        if x.shape[0] < 2:
            raise ConfigurationError("batch_norm in train mode needs a batch of at least 2")
        count = x.size // features
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        unbiased = var * count / max(count - 1, 1)
        new_mean = (1.0 - momentum) * running_mean + momentum * mean
        new_var = (1.0 - momentum) * running_var + momentum * unbiased
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - _bn_broadcast(mean, x.ndim)) * _bn_broadcast(inv_std, x.ndim)
    out = x_hat * _bn_broadcast(gamma, x.ndim) + _bn_broadcast(beta, x.ndim)
    cache = (x_hat, gamma, inv_std, training, axes)
    return out, cache, (new_mean, new_var)


def batch_norm_backward(
    grad_out: np.ndarray, cache: tuple
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_hat, gamma, inv_std, training, axes = cache
    ndim = x_hat.ndim
    grad_gamma = (grad_out * x_hat).sum(axis=axes)
    grad_beta = grad_out.sum(axis=axes)
    g_hat = grad_out * _bn_broadcast(gamma, ndim)
    if not training:
        return g_hat * _bn_broadcast(inv_std, ndim), grad_gamma, grad_beta

    count = x_hat.size // x_hat.shape[1]
    sum_g = _bn_broadcast(g_hat.sum(axis=axes), ndim)
    sum_gx = _bn_broadcast((g_hat * x_hat).sum(axis=axes), ndim)
    grad_x = _bn_broadcast(inv_std, ndim) / count * (count * g_hat - sum_g - x_hat * sum_gx)
    return grad_x, grad_gamma, grad_beta


# ---------------------------------------------------------------------------
# Elementwise nonlinearities
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, tuple]:
    return np.maximum(x, 0.0), (x > 0,)


def relu_backward(grad_out: np.ndarray, cache: tuple) -> np.ndarray:
    (positive,) = cache
    return grad_out * positive


def sigmoid_forward(x: np.ndarray) -> Tuple[np.ndarray, tuple]:
    out = expit(x)
    return out, (out,)


def sigmoid_backward(grad_out: np.ndarray, cache: tuple) -> np.ndarray:
    (out,) = cache
    return grad_out * out * (1.0 - out)


# ---------------------------------------------------------------------------
# Softmax cross entropy
# ---------------------------------------------------------------------------

def softmax_cross_entropy_forward(
    logits: np.ndarray, labels: np.ndarray
) -> Tuple[float, tuple]:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    _require_rank(logits, 2, "logits")
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ConfigurationError(f"labels shape {labels.shape} != {(n,)}")
    if n == 0:
        raise EmptyBatchError("cross entropy of an empty batch is undefined")
    if labels.min() < 0 or labels.max() >= k:
        raise LabelRangeError(f"labels must lie in [0, {k}), got range "
                              f"[{labels.min()}, {labels.max()}]")
    labels = labels.astype(np.int64)
    log_p = log_softmax(logits, axis=1)
    loss = -float(np.mean(log_p[np.arange(n), labels]))
    return loss, (logits, labels)


def softmax_cross_entropy_backward(cache: tuple, grad_loss: float = 1.0) -> np.ndarray:
    logits, labels = cache
    n = logits.shape[0]
    grad = softmax(logits, axis=1)
    grad[np.arange(n), labels] -= 1.0
    return grad * (grad_loss / n)
