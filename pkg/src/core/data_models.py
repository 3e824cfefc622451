"""
Core data models for MSGC networks.

Classes:
    MsgcBlockConfig: Static description of one MSGC block (layers, widths, groups)
    TinyNetConfig: Channel plan of the desk-scale host network
    MsgcNetConfig: TinyNetConfig plus the MSGC settings applied to every block
    SaliencySet: Per-layer saliency (and optional attention) scores for a batch
    GatingMask: Binary gating masks for one layer, with the soft probabilities
    MacLedger: Per-sample achieved MACs against the original-model MACs
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.config import GATING_PARAMS
from core.errors import ConfigurationError


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """Spatial output size of a convolution (floor convention)."""
    span = size + 2 * padding - kernel
    if span < 0:
        raise ConfigurationError(
            f"kernel {kernel} with padding {padding} does not fit input size {size}"
        )
    return span // stride + 1


class MsgcBlockConfig:
    """
    Static description of an MSGC block with M consecutive conv layers.

    Layer indices are 1-based in ``attention_layers`` (layer 1 is the first
    conv of the block); list fields are indexed from 0.

    Attributes:
        channels: [C_1, ..., C_{M+1}] input/output widths
        groups: [G_1, ..., G_M]
        kernel_sizes, strides, paddings: per-layer conv geometry
        reduction: reduction rate R of the mask-generator MLPs
        attention_layers: layers (1-based) that get an attention MLP
        gumbel_temperature: temperature of the logistic relaxation
        input_size: (H, W) of the block input, needed for MAC accounting
    """

    def __init__(
        self,
        channels: Sequence[int],
        groups: Sequence[int],
        kernel_sizes: Optional[Sequence[int]] = None,
        strides: Optional[Sequence[int]] = None,
        paddings: Optional[Sequence[int]] = None,
        reduction: int = 16,
        attention_layers: Sequence[int] = (),
        gumbel_temperature: float = GATING_PARAMS["gumbel_temperature"],
        input_size: Tuple[int, int] = (32, 32),
    ):
        self.channels = [int(c) for c in channels]
        self.groups = [int(g) for g in groups]
        m = len(self.groups)
        self.kernel_sizes = [int(k) for k in (kernel_sizes or [3] * m)]
        self.strides = [int(s) for s in (strides or [1] * m)]
        if paddings is None:
            paddings = [k // 2 for k in self.kernel_sizes]
        self.paddings = [int(p) for p in paddings]
        self.reduction = int(reduction)
        self.attention_layers = sorted({int(i) for i in attention_layers})
        self.gumbel_temperature = float(gumbel_temperature)
        self.input_size = (int(input_size[0]), int(input_size[1]))
        self.validate()

    @property
    def num_layers(self) -> int:
        return len(self.groups)

    @property
    def hidden_width(self) -> int:
        """Hidden width ceil(C_1 / R) of every mask-generator MLP."""
        return max(1, math.ceil(self.channels[0] / self.reduction))

    def validate(self) -> None:
        """Raise ConfigurationError if any block invariant is violated."""
        m = self.num_layers
        if m < 1:
            raise ConfigurationError("an MSGC block needs at least one layer")
        if len(self.channels) != m + 1:
            raise ConfigurationError(
                f"expected {m + 1} channel widths for {m} layers, got {len(self.channels)}"
            )
        for name, values in (("kernel_sizes", self.kernel_sizes),
                             ("strides", self.strides),
                             ("paddings", self.paddings)):
            if len(values) != m:
                raise ConfigurationError(f"{name} needs {m} entries, got {len(values)}")
        for i in range(m):
            c_in, c_out, g = self.channels[i], self.channels[i + 1], self.groups[i]
            if not 1 <= g <= c_in:
                raise ConfigurationError(
                    f"layer {i + 1}: group count {g} must lie in [1, {c_in}]"
                )
            if c_out % g != 0:
                raise ConfigurationError(
                    f"layer {i + 1}: group count {g} does not divide {c_out} output channels"
                )
            if self.kernel_sizes[i] % 2 != 1:
                raise ConfigurationError(f"layer {i + 1}: kernel size must be odd")
            if self.strides[i] < 1 or self.paddings[i] < 0:
                raise ConfigurationError(f"layer {i + 1}: invalid stride/padding")
        if self.reduction < 1:
            raise ConfigurationError("reduction rate R must be a positive integer")
        for layer in self.attention_layers:
            if not 1 <= layer <= m:
                raise ConfigurationError(f"attention layer {layer} outside 1..{m}")
        if self.gumbel_temperature <= 0:
            raise ConfigurationError("gumbel temperature must be positive")
        self.layer_sizes()

    def layer_sizes(self) -> List[Tuple[int, int]]:
        """Output (H, W) of every layer, in order."""
        sizes = []
        h, w = self.input_size
        for k, s, p in zip(self.kernel_sizes, self.strides, self.paddings):
            h = conv_output_size(h, k, s, p)
            w = conv_output_size(w, k, s, p)
            sizes.append((h, w))
        return sizes

    def has_attention(self, layer: int) -> bool:
        return layer in self.attention_layers

    def __repr__(self):
        return (f"MsgcBlockConfig(channels={self.channels}, groups={self.groups}, "
                f"R={self.reduction}, attention={self.attention_layers}, "
                f"input={self.input_size})")


class TinyNetConfig:
    """
    Channel plan of the desk-scale ResNet-style host.

    Attributes:
        in_channels: image channels
        input_size: square image side
        stem_width: output width of the stem conv
        widths: output width of each basic block
        strides: stride of the first conv of each basic block
        num_classes: classifier outputs
    """

    def __init__(
        self,
        in_channels: int = 3,
        input_size: int = 32,
        stem_width: int = 16,
        widths: Sequence[int] = (16, 32, 64),
        strides: Sequence[int] = (1, 2, 2),
        num_classes: int = 8,
    ):
        self.in_channels = int(in_channels)
        self.input_size = int(input_size)
        self.stem_width = int(stem_width)
        self.widths = [int(w) for w in widths]
        self.strides = [int(s) for s in strides]
        self.num_classes = int(num_classes)
        self.validate()

    def validate(self) -> None:
        if len(self.widths) != len(self.strides):
            raise ConfigurationError(
                f"{len(self.widths)} block widths but {len(self.strides)} strides"
            )
        if not self.widths:
            raise ConfigurationError("network needs at least one block")
        if min([self.in_channels, self.stem_width, self.num_classes] + self.widths) < 1:
            raise ConfigurationError("all widths must be positive")
        if self.num_classes < 2:
            raise ConfigurationError("need at least two classes")
        self.block_plan()

    def block_plan(self) -> List[Tuple[int, int, int, int]]:
        """(in_width, out_width, stride, input_side) of every basic block."""
        plan = []
        c_in, side = self.stem_width, self.input_size
        for c_out, stride in zip(self.widths, self.strides):
            plan.append((c_in, c_out, stride, side))
            side = conv_output_size(side, 3, stride, 1)
            c_in = c_out
        return plan

    def __repr__(self):
        return (f"TinyNetConfig(input={self.in_channels}x{self.input_size}x{self.input_size}, "
                f"stem={self.stem_width}, widths={self.widths}, strides={self.strides}, "
                f"classes={self.num_classes})")


class MsgcNetConfig:
    """
    Host network plus the MSGC settings shared by all its blocks.

    Attributes:
        net: TinyNetConfig of the host
        groups: group counts {G_1, G_2} used by every basic block
        attention_layers: block layers (1-based) with attention MLPs
        reduction: MLP reduction rate R
        gumbel_temperature: logistic relaxation temperature
        saliency_bias_init: initial bias of the gating saliency output
    """

    def __init__(
        self,
        net: TinyNetConfig,
        groups: Sequence[int] = (1, 4),
        attention_layers: Sequence[int] = (1, 2),
        reduction: int = 4,
        gumbel_temperature: float = GATING_PARAMS["gumbel_temperature"],
        saliency_bias_init: float = GATING_PARAMS["saliency_bias_init"],
    ):
        self.net = net
        self.groups = [int(g) for g in groups]
        self.attention_layers = [int(a) for a in attention_layers]
        self.reduction = int(reduction)
        self.gumbel_temperature = float(gumbel_temperature)
        self.saliency_bias_init = float(saliency_bias_init)
        self.block_configs()

    def block_configs(self) -> List[MsgcBlockConfig]:
        """One MsgcBlockConfig per basic block (two 3x3 convs each)."""
        configs = []
        for c_in, c_out, stride, side in self.net.block_plan():
            configs.append(MsgcBlockConfig(
                channels=[c_in, c_out, c_out],
                groups=self.groups,
                kernel_sizes=[3, 3],
                strides=[stride, 1],
                paddings=[1, 1],
                reduction=self.reduction,
                attention_layers=self.attention_layers,
                gumbel_temperature=self.gumbel_temperature,
                input_size=(side, side),
            ))
        return configs

    def __repr__(self):
        return (f"MsgcNetConfig({self.net!r}, groups={self.groups}, "
                f"attention={self.attention_layers}, R={self.reduction})")


class SaliencySet:
    """
    Saliency scores of one block for a batch.

    Attributes:
        gating: per layer, S_i with shape (N, G_i, C_i)
        attention: per layer, A_i raw scores (N, G_i, C_i) or None
    """

    def __init__(self, gating: List[np.ndarray], attention: List[Optional[np.ndarray]]):
        self.gating = gating
        self.attention = attention

    def __repr__(self):
        shapes = [s.shape for s in self.gating]
        return f"SaliencySet(layers={len(self.gating)}, shapes={shapes})"


class GatingMask:
    """
    Binary gating mask B_i of one layer for a batch.

    Attributes:
        value: forward value, shape (N, G_i, C_i); exactly 0/1 except in
            relaxed mode where it equals the soft probability
        hard: the binary mask (always 0/1)
        soft: P(B = 1) after the logistic relaxation, or None at inference
        temperature: relaxation temperature used to produce ``soft``
    """

    def __init__(
        self,
        value: np.ndarray,
        hard: np.ndarray,
        soft: Optional[np.ndarray] = None,
        temperature: float = GATING_PARAMS["gumbel_temperature"],
    ):
        self.value = value
        self.hard = hard
        self.soft = soft
        self.temperature = temperature

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.hard.shape

    def __repr__(self):
        return (f"GatingMask(shape={self.hard.shape}, "
                f"selected={self.hard.mean():.3f}, soft={self.soft is not None})")


class MacLedger:
    """
    Per-sample MAC accounting.

    Attributes:
        achieved: achieved MACs per sample (int64 array)
        m_ori: MACs of the original, unmasked model
        per_layer: per-layer achieved MACs per sample (name -> int64 array)
        mlp_overhead: MACs of the mask/attention MLPs (excluded from ratios)
    """

    def __init__(
        self,
        achieved: np.ndarray,
        m_ori: int,
        per_layer: Optional[Dict[str, np.ndarray]] = None,
        mlp_overhead: int = 0,
    ):
        self.achieved = np.asarray(achieved, dtype=np.int64)
        self.m_ori = int(m_ori)
        self.per_layer = per_layer or {}
        self.mlp_overhead = int(mlp_overhead)

    @property
    def num_samples(self) -> int:
        return len(self.achieved)

    def ratio(self) -> np.ndarray:
        """Achieved / M_ori per sample, MLP overhead excluded."""
        return self.achieved / float(self.m_ori)

    def ratio_with_overhead(self) -> np.ndarray:
        """(Achieved + overhead) / (M_ori + overhead) per sample."""
        total = float(self.m_ori + self.mlp_overhead)
        return (self.achieved + self.mlp_overhead) / total

    def mean_ratio(self) -> float:
        return float(np.mean(self.ratio())) if self.num_samples else 0.0

    @staticmethod
    def combine(ledgers: List["MacLedger"], static_macs: int = 0,
                static_layers: Optional[Dict[str, int]] = None) -> "MacLedger":
        """
        Sum block ledgers and fixed-cost layers into a network ledger.

        Args:
            ledgers: block ledgers over the same samples
            static_macs: MACs of layers that are never masked
            static_layers: optional per-layer breakdown of ``static_macs``
        """
        n = ledgers[0].num_samples
        achieved = np.full(n, static_macs, dtype=np.int64)
        m_ori = static_macs
        overhead = 0
        per_layer = {name: np.full(n, macs, dtype=np.int64)
                     for name, macs in (static_layers or {}).items()}
        for ledger in ledgers:
            achieved += ledger.achieved
            m_ori += ledger.m_ori
            overhead += ledger.mlp_overhead
            per_layer.update(ledger.per_layer)
        return MacLedger(achieved, m_ori, per_layer, overhead)

    def __repr__(self):
        return (f"MacLedger(samples={self.num_samples}, m_ori={self.m_ori}, "
                f"mean_ratio={self.mean_ratio():.4f}, overhead={self.mlp_overhead})")
