"""
MAC accounting for MSGC blocks.

Cost of layer i for one sample:

    unit_i * sum_g  selected_i[g] * alive_i[g]

where unit_i = k_i * k_i * H_out,i * W_out,i, selected_i[g] is the number of
input channels group g keeps, and alive_i[g] counts the group's output
channels that some group of layer i+1 still reads (all of them for the last
layer). "Some group reads o" is the noisy-OR 1 - prod_g (1 - B_{i+1}[g, o]),
so the cost is a multilinear polynomial in the mask entries: exact on binary
masks and smooth on soft ones.
"""

from typing import Dict, List, Tuple

import numpy as np

from core.data_models import MacLedger, MsgcBlockConfig
from core.errors import ConfigurationError


def layer_units(config: MsgcBlockConfig) -> List[int]:
    """k*k*H_out*W_out of every layer."""
    return [k * k * h * w for k, (h, w) in zip(config.kernel_sizes, config.layer_sizes())]


def block_original_macs(config: MsgcBlockConfig) -> int:
    """MACs of the block with all masks set to one."""
    units = layer_units(config)
    return int(sum(u * config.channels[i] * config.channels[i + 1] for i, u in enumerate(units)))


def mlp_overhead_macs(config: MsgcBlockConfig) -> int:
    """MACs of the gating MLPs plus attention MLPs, per sample."""
    c1, h = config.channels[0], config.hidden_width
    total = 0
    for i, (g, c) in enumerate(zip(config.groups, config.channels[:-1])):
        per_mlp = c1 * h + h * g * c
        total += per_mlp
        if config.has_attention(i + 1):
            total += per_mlp
    return int(total)


def _check_masks(masks: List[np.ndarray], config: MsgcBlockConfig) -> int:
    if len(masks) != config.num_layers:
        raise ConfigurationError(f"{len(masks)} masks for {config.num_layers} layers")
    n = masks[0].shape[0]
    for i, m in enumerate(masks):
        expected = (n, config.groups[i], config.channels[i])
        if m.shape != expected:
            raise ConfigurationError(f"layer {i + 1} mask shape {m.shape} != {expected}")
    return n


def _alive(next_mask: np.ndarray) -> np.ndarray:
    """(N, C) indicator that some group of the next layer reads each channel."""
    return 1 - np.prod(1 - next_mask, axis=1)


def _layer_terms(masks: List[np.ndarray], config: MsgcBlockConfig):
    n = _check_masks(masks, config)
    terms = []
    for i, mask in enumerate(masks):
        g, c_out = config.groups[i], config.channels[i + 1]
        if i + 1 < len(masks):
            alive = _alive(masks[i + 1])
        else:
            alive = np.ones((n, c_out), dtype=mask.dtype)
        alive_per_group = alive.reshape(n, g, c_out // g).sum(axis=2)
        selected = mask.sum(axis=2)
        terms.append((selected, alive_per_group))
    return terms


def compute_block_macs(masks: List[np.ndarray], config: MsgcBlockConfig,
                       prefix: str = "") -> MacLedger:
    """
    Integer MAC ledger of one block from binary masks.

    Args:
        masks: per layer, binary array (N, G_i, C_i)
        config: block configuration
        prefix: name prefix for the per-layer breakdown (e.g. "blocks.0.")
    """
    masks = [np.asarray(m) for m in masks]
    if any(((m != 0) & (m != 1)).any() for m in masks):
        raise ConfigurationError("MAC ledger needs binary masks")
    int_masks = [m.astype(np.int64) for m in masks]
    units = layer_units(config)
    per_layer: Dict[str, np.ndarray] = {}
    achieved = None
    for i, (selected, alive) in enumerate(_layer_terms(int_masks, config)):
        cost = units[i] * (selected * alive).sum(axis=1)
        per_layer[f"{prefix}conv{i + 1}"] = cost
        achieved = cost if achieved is None else achieved + cost
    return MacLedger(achieved, block_original_macs(config), per_layer, mlp_overhead_macs(config))


def block_cost_forward(mask_values: List[np.ndarray],
                       config: MsgcBlockConfig) -> Tuple[np.ndarray, tuple]:
    """Per-sample MAC cost as a float polynomial of (possibly soft) masks."""
    units = layer_units(config)
    terms = _layer_terms(mask_values, config)
    cost = sum(units[i] * (selected * alive).sum(axis=1) for i, (selected, alive) in enumerate(terms))
    return np.asarray(cost, dtype=np.float64), (mask_values, terms, units, config)


def block_cost_backward(grad_cost: np.ndarray, cache: tuple) -> List[np.ndarray]:
    """Gradient of the per-sample cost w.r.t. every layer's mask values."""
    mask_values, terms, units, config = cache
    grads = [np.zeros_like(m) for m in mask_values]
    gc = np.asarray(grad_cost)[:, None]
    for i, (selected, alive) in enumerate(terms):
        grads[i] += (gc * units[i] * alive)[:, :, None]
        if i + 1 == len(mask_values):
            continue
        width = config.channels[i + 1] // config.groups[i]
        grad_alive = np.repeat(gc * units[i] * selected, width, axis=1)   # (N, C_{i+1})
        nxt = mask_values[i + 1]
        for g in range(nxt.shape[1]):
            others = np.delete(nxt, g, axis=1)
            grads[i + 1][:, g, :] += grad_alive * np.prod(1 - others, axis=1)
    return grads


def pyramid_counts(mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Split each sample's input channels by how many groups select them.

    Args:
        mask: binary (N, G, C)

    Returns:
        Tuple of (canonical, partial, discarded) int arrays of shape (N,):
        selected by all G groups, by 1..G-1 groups, by none
    """
    groups = mask.shape[1]
    count = np.asarray(mask).astype(np.int64).sum(axis=1)      # (N, C)
    canonical = (count == groups).sum(axis=1)
    discarded = (count == 0).sum(axis=1)
    partial = mask.shape[2] - canonical - discarded
    return canonical, partial, discarded
