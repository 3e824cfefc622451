"""
Independent reference implementations used only by the tests.

Deliberately loop-based: they share no code path with the im2col kernels.
"""

import numpy as np


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=np.result_type(a, b))
    for i in range(n):
        for j in range(m):
            total = 0.0
            for t in range(k):
                total += a[i, t] * b[t, j]
            out[i, j] = total
    return out


def naive_conv2d(x, w, bias=None, stride=1, padding=0):
    """Direct cross-correlation with (k, k, C_in, C_out) weights."""
    n, c_in, h, wd = x.shape
    k, _, _, c_out = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, c_out, h_out, w_out), dtype=np.result_type(x, w))
    for b in range(n):
        for o in range(c_out):
            for i in range(h_out):
                for j in range(w_out):
                    total = 0.0
                    for c in range(c_in):
                        for p in range(k):
                            for q in range(k):
                                total += xp[b, c, i * stride + p, j * stride + q] * w[p, q, c, o]
                    out[b, o, i, j] = total + (bias[o] if bias is not None else 0.0)
    return out


def direct_grouped_conv(x, group_weights, stride=1, padding=0):
    """
    Textbook grouped convolution: group g reads input slice g only.

    Args:
        group_weights: G arrays (k, k, C_in / G, C_out / G)
    """
    groups = len(group_weights)
    width = x.shape[1] // groups
    outs = [naive_conv2d(x[:, g * width:(g + 1) * width], w, None, stride, padding)
            for g, w in enumerate(group_weights)]
    return np.concatenate(outs, axis=1)


def counted_masked_conv(x, filters, mask, live, stride=1, padding=1):
    """
    Brute-force masked grouped convolution that tallies every scalar multiply.

    Output channel o (group o // width) is computed only where ``live[b, o]``;
    it multiplies only the input channels its group selects.

    Args:
        x: (N, C_in, H, W)
        filters: G arrays (k, k, C_in, C_out / G)
        mask: binary (N, G, C_in)
        live: binary (N, C_out)

    Returns:
        Tuple of (output (N, C_out, H_out, W_out), (N,) multiplies per sample)
    """
    n, c_in, h, wd = x.shape
    groups = len(filters)
    k, width = filters[0].shape[0], filters[0].shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, groups * width, h_out, w_out), dtype=x.dtype)
    multiplies = np.zeros(n, dtype=np.int64)
    for b in range(n):
        for g in range(groups):
            w = filters[g]
            for j in range(width):
                o = g * width + j
                if not live[b, o]:
                    continue
                for i0 in range(h_out):
                    for j0 in range(w_out):
                        total = 0.0
                        for c in range(c_in):
                            if not mask[b, g, c]:
                                continue
                            for p in range(k):
                                for q in range(k):
                                    total += xp[b, c, i0 * stride + p, j0 * stride + q] * w[p, q, c, j]
                                    multiplies[b] += 1
                        out[b, o, i0, j0] = total
    return out, multiplies


def count_block_multiplies(x, banks, masks, strides, paddings=None):
    """
    Run a chain of masked grouped convs (ReLU in between) with the counter on.

    A layer's output channel is live if some group of the next layer reads it;
    every output of the last layer is live.

    Returns:
        Tuple of (per-layer outputs, (N,) multiplies per sample)
    """
    paddings = paddings or [1] * len(banks)
    n = x.shape[0]
    multiplies = np.zeros(n, dtype=np.int64)
    outputs = []
    h = x
    for i, filters in enumerate(banks):
        c_out = len(filters) * filters[0].shape[3]
        if i + 1 < len(banks):
            live = masks[i + 1].astype(bool).any(axis=1)
        else:
            live = np.ones((n, c_out), dtype=bool)
        out, counted = counted_masked_conv(h, filters, masks[i], live, strides[i], paddings[i])
        multiplies += counted
        outputs.append(out)
        h = np.maximum(out, 0.0)
    return outputs, multiplies

class MultiplyCounter:
    """
    Counts dense-layer multiplies from the shapes seen at run time.

    Wraps conv2d_forward / linear_forward: a conv output element costs
    k * k * C_in multiplies, a linear output element costs F_in.
    """

    def __init__(self):
        self.total = 0
        self.samples = 0

    def wrap_conv(self, conv_forward):
        def counted(x, w, bias=None, stride=1, padding=0):
            out, cache = conv_forward(x, w, bias, stride, padding)
            self.samples = x.shape[0]
            self.total += out.size * w.shape[0] * w.shape[1] * w.shape[2]
            return out, cache
        return counted

    def wrap_linear(self, linear_forward):
        def counted(x, w, bias=None):
            out, cache = linear_forward(x, w, bias)
            self.total += out.size * w.shape[0]
            return out, cache
        return counted

    def per_sample(self) -> int:
        return self.total // self.samples
