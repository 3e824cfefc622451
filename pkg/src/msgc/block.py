"""
MSGC basic block: mask generation, gated grouped convolutions and shortcut.

    x -> GAP -> MLP_i -> S_i -> B_i (and optional A_i)
    x -> [masked grouped conv_i -> BN_i -> ReLU] x M  (+ shortcut) -> ReLU

The last layer's ReLU is applied after the shortcut addition, as in a
ResNet basic block.
"""

from typing import List, Optional, Tuple

import numpy as np

from core.config import GATING_PARAMS
from core.data_models import GatingMask, MacLedger, MsgcBlockConfig
from core.errors import ConfigurationError
from msgc import gating
from msgc.grouped_conv import MaskedGroupedConv
from msgc.macs import (
    block_cost_backward, block_cost_forward, block_original_macs, compute_block_macs,
)
from msgc.plug_in import GroupFilterBank, plug_in
from tensor_ops import functional as F
from tensor_ops.modules import BatchNorm, Conv2d, Module, he_normal

MODES = ("eval", "train", "relaxed")


class MsgcBlock(Module):
    """
    An MSGC-equipped block.

    Attributes:
        config: MsgcBlockConfig of the block
        last_saliency: SaliencySet of the latest forward call
        last_masks: GatingMask per layer of the latest forward call
        last_attention: attention values per layer (None where absent)
        last_costs: differentiable per-sample MAC cost of the latest call
    """

    def __init__(
        self,
        config: MsgcBlockConfig,
        rng: Optional[np.random.Generator] = None,
        banks: Optional[List[GroupFilterBank]] = None,
        shortcut: bool = False,
        dtype=np.float64,
        saliency_bias_init: float = GATING_PARAMS["saliency_bias_init"],
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.config = config
        self.dtype = dtype
        m, c = config.num_layers, config.channels

        if banks is None:
            banks = []
            for i in range(m):
                k = config.kernel_sizes[i]
                full = he_normal(rng, (k, k, c[i], c[i + 1]), k * k * c[i], dtype)
                banks.append(plug_in(full, config.groups[i]))
        if len(banks) != m:
            raise ConfigurationError(f"{len(banks)} filter banks for {m} layers")

        self.convs = []
        self.bns = []
        for i, bank in enumerate(banks):
            if bank.groups != config.groups[i] or bank.in_channels != c[i] \
                    or bank.out_channels != c[i + 1]:
                raise ConfigurationError(f"layer {i + 1}: filter bank {bank!r} does not fit {config!r}")
            self.convs.append(self.add_module(
                f"conv{i + 1}", MaskedGroupedConv(bank, config.strides[i], config.paddings[i])))
            self.bns.append(self.add_module(f"bn{i + 1}", BatchNorm(c[i + 1], dtype=dtype)))

        hidden = config.hidden_width
        gate_root = self.add_module("gate", Module())
        att_root = self.add_module("attention", Module())
        self.gates = []
        self.attention_mlps: List[Optional[gating.MaskGenerator]] = []
        for i in range(m):
            self.gates.append(gate_root.add_module(f"layer{i + 1}", gating.MaskGenerator(
                c[0], hidden, config.groups[i], c[i], rng, dtype, bias_init=saliency_bias_init)))
            if config.has_attention(i + 1):
                self.attention_mlps.append(att_root.add_module(f"layer{i + 1}", gating.MaskGenerator(
                    c[0], hidden, config.groups[i], c[i], rng, dtype,
                    bias_init=GATING_PARAMS["attention_bias_init"])))
            else:
                self.attention_mlps.append(None)

        self.shortcut_conv = None
        self.shortcut_bn = None
        if shortcut:
            stride = int(np.prod(config.strides))
            self.shortcut_conv = self.add_module("shortcut", Conv2d(
                c[0], c[-1], 1, stride=stride, padding=0, rng=rng, dtype=dtype))
            self.shortcut_bn = self.add_module("shortcut_bn", BatchNorm(c[-1], dtype=dtype))
        elif c[0] != c[-1] or any(s != 1 for s in config.strides):
            raise ConfigurationError("identity shortcut needs equal widths and unit strides")

        self.ledger_prefix = ""
        self.last_saliency = None
        self.last_masks: List[GatingMask] = []
        self.last_attention: List[Optional[np.ndarray]] = []
        self.last_costs = None
        self._cache = None

    @property
    def has_attention(self) -> bool:
        return any(mlp is not None for mlp in self.attention_mlps)

    def _binarize(self, saliency: np.ndarray, mode: str, rng, force_ones: bool) -> GatingMask:
        if force_ones:
            ones = np.ones_like(saliency)
            return GatingMask(value=ones, hard=ones)
        if mode == "eval":
            return gating.binarize_eval(saliency)
        if rng is None:
            raise ConfigurationError(f"mode '{mode}' needs an rng for the logistic noise")
        return gating.binarize_train(saliency, rng, self.config.gumbel_temperature,
                                     relaxed=(mode == "relaxed"))

    def forward(
        self,
        x: np.ndarray,
        mode: str = "eval",
        rng: Optional[np.random.Generator] = None,
        force_ones: bool = False,
    ) -> Tuple[np.ndarray, MacLedger]:
        """
        Run the block.

        Args:
            x: block input (N, C_1, H, W)
            mode: "eval" (Sign), "train" (logistic STE) or "relaxed"
                (forward the soft probability, used for gradient checks)
            rng: noise source for train/relaxed modes
            force_ones: run every layer unmasked and without attention
                (the converted network then computes the plain one)

        Returns:
            Tuple of (block output, per-sample MacLedger)
        """
        if mode not in MODES:
            raise ConfigurationError(f"unknown mode '{mode}', expected one of {MODES}")
        if x.ndim != 4 or x.shape[1] != self.config.channels[0]:
            raise ConfigurationError(
                f"block expects (N, {self.config.channels[0]}, H, W) input, got {x.shape}")
        training = mode != "eval"
        m = self.config.num_layers

        saliency, gap_cache = gating.generate_saliency(x, self.gates, self.attention_mlps, training)
        masks = [self._binarize(s, mode, rng, force_ones) for s in saliency.gating]
        attention, att_caches = [], []
        for raw in saliency.attention:
            if raw is None or force_ones:
                attention.append(None)
                att_caches.append(None)
            else:
                values, cache = gating.attention_forward(raw)
                attention.append(values)
                att_caches.append(cache)

        h = x
        relu_caches = []
        z = None
        for i in range(m):
            scale = masks[i].value if attention[i] is None else masks[i].value * attention[i]
            z = self.bns[i].forward(self.convs[i].forward(h, scale), training)
            if i + 1 < m:
                h, relu_cache = F.relu_forward(z)
                relu_caches.append(relu_cache)

        if self.shortcut_conv is not None:
            identity = self.shortcut_bn.forward(self.shortcut_conv.forward(x), training)
        else:
            identity = x
        out, out_cache = F.relu_forward(z + identity)

        costs, cost_cache = block_cost_forward([mk.value for mk in masks], self.config)
        ledger = compute_block_macs([mk.hard for mk in masks], self.config, self.ledger_prefix)

        self.last_saliency = saliency
        self.last_masks = masks
        self.last_attention = attention
        self.last_costs = costs
        self._cache = (mode, force_ones, gap_cache, masks, attention, att_caches,
                       relu_caches, out_cache, cost_cache)
        return out, ledger

    def backward(self, grad_out: np.ndarray, grad_cost: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Backpropagate through the block.

        Args:
            grad_out: gradient w.r.t. the block output
            grad_cost: gradient w.r.t. the per-sample MAC cost (budget loss)

        Returns:
            Gradient w.r.t. the block input
        """
        (mode, force_ones, gap_cache, masks, attention, att_caches,
         relu_caches, out_cache, cost_cache) = self._cache
        m = self.config.num_layers

        grad = F.relu_backward(grad_out, out_cache)
        if self.shortcut_conv is not None:
            grad_x = self.shortcut_conv.backward(self.shortcut_bn.backward(grad))
        else:
            grad_x = grad.copy()

        grad_values = [None] * m
        grad_attention = [None] * m
        grad_z = grad
        for i in reversed(range(m)):
            grad_h, grad_scale = self.convs[i].backward(self.bns[i].backward(grad_z))
            if attention[i] is None:
                grad_values[i] = grad_scale
            else:
                grad_values[i] = grad_scale * attention[i]
                grad_attention[i] = grad_scale * masks[i].value
            if i > 0:
                grad_z = F.relu_backward(grad_h, relu_caches[i - 1])
            else:
                grad_x += grad_h

        trainable_masks = mode != "eval" and not force_ones
        if grad_cost is not None and trainable_masks:
            for i, g in enumerate(block_cost_backward(grad_cost, cost_cache)):
                grad_values[i] = grad_values[i] + g

        grad_pooled = None
        for i in range(m):
            contributions = []
            if trainable_masks:
                grad_s = gating.binarize_backward(grad_values[i], masks[i])
                contributions.append(self.gates[i].backward(grad_s))
            if attention[i] is not None:
                grad_raw = gating.attention_backward(grad_attention[i], att_caches[i])
                contributions.append(self.attention_mlps[i].backward(grad_raw))
            for c in contributions:
                grad_pooled = c if grad_pooled is None else grad_pooled + c

        if grad_pooled is not None:
            grad_x += F.global_avg_pool_backward(grad_pooled, gap_cache)
        return grad_x

    def original_macs(self) -> int:
        return block_original_macs(self.config)
