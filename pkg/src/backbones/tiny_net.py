"""
Desk-scale ResNet-style host network.

    stem: conv3x3 -> BN -> ReLU
    blocks: [conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN] + shortcut -> ReLU
    head: GAP -> linear

A block gets a 1x1 projection shortcut (conv + BN) whenever its width or
resolution changes, otherwise the identity.
"""

from typing import List, Tuple

import numpy as np

from core.data_models import TinyNetConfig, conv_output_size
from tensor_ops import functional as F
from tensor_ops.conv import conv2d_macs
from tensor_ops.modules import BatchNorm, Conv2d, Linear, Module


def needs_projection(c_in: int, c_out: int, stride: int) -> bool:
    return c_in != c_out or stride != 1


class Stem(Module):
    """conv3x3 -> BN -> ReLU on the raw image."""

    def __init__(self, in_channels: int, width: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.conv = self.add_module("conv", Conv2d(in_channels, width, 3, 1, 1, rng=rng, dtype=dtype))
        self.bn = self.add_module("bn", BatchNorm(width, dtype=dtype))
        self._relu_cache = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        out, self._relu_cache = F.relu_forward(self.bn.forward(self.conv.forward(x), training))
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad = F.relu_backward(grad_out, self._relu_cache)
        return self.conv.backward(self.bn.backward(grad))


class Head(Module):
    """GAP -> linear classifier."""

    def __init__(self, width: int, num_classes: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.fc = self.add_module("fc", Linear(width, num_classes, bias=True, rng=rng, dtype=dtype))
        self._gap_cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        pooled, self._gap_cache = F.global_avg_pool_forward(x)
        return self.fc.forward(pooled)

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        return F.global_avg_pool_backward(self.fc.backward(grad_logits), self._gap_cache)


class BasicBlock(Module):
    """Two 3x3 convs with BN, plus identity or projection shortcut."""

    def __init__(self, c_in: int, c_out: int, stride: int, rng: np.random.Generator,
                 dtype=np.float64):
        super().__init__()
        self.c_in, self.c_out, self.stride = c_in, c_out, stride
        self.conv1 = self.add_module("conv1", Conv2d(c_in, c_out, 3, stride, 1, rng=rng, dtype=dtype))
        self.bn1 = self.add_module("bn1", BatchNorm(c_out, dtype=dtype))
        self.conv2 = self.add_module("conv2", Conv2d(c_out, c_out, 3, 1, 1, rng=rng, dtype=dtype))
        self.bn2 = self.add_module("bn2", BatchNorm(c_out, dtype=dtype))
        self.shortcut = None
        self.shortcut_bn = None
        if needs_projection(c_in, c_out, stride):
            self.shortcut = self.add_module(
                "shortcut", Conv2d(c_in, c_out, 1, stride, 0, rng=rng, dtype=dtype))
            self.shortcut_bn = self.add_module("shortcut_bn", BatchNorm(c_out, dtype=dtype))
        self._caches = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        h, relu1 = F.relu_forward(self.bn1.forward(self.conv1.forward(x), training))
        z = self.bn2.forward(self.conv2.forward(h), training)
        if self.shortcut is not None:
            identity = self.shortcut_bn.forward(self.shortcut.forward(x), training)
        else:
            identity = x
        out, relu_out = F.relu_forward(z + identity)
        self._caches = (relu1, relu_out)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        relu1, relu_out = self._caches
        grad = F.relu_backward(grad_out, relu_out)
        if self.shortcut is not None:
            grad_x = self.shortcut.backward(self.shortcut_bn.backward(grad))
        else:
            grad_x = grad.copy()
        grad_h = self.conv2.backward(self.bn2.backward(grad))
        grad_h = F.relu_backward(grad_h, relu1)
        grad_x += self.conv1.backward(self.bn1.backward(grad_h))
        return grad_x


class PlainNet(Module):
    """
    Plain host network.

    Attributes:
        config: TinyNetConfig
        stem, blocks, head: network stages (blocks registered as blocks.{j})
    """

    def __init__(self, config: TinyNetConfig, rng: np.random.Generator = None, dtype=np.float64):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.config = config
        self.dtype = dtype
        self.stem = self.add_module("stem", Stem(config.in_channels, config.stem_width, rng, dtype))
        blocks_root = self.add_module("blocks", Module())
        self.blocks: List[BasicBlock] = []
        for j, (c_in, c_out, stride, _) in enumerate(config.block_plan()):
            self.blocks.append(blocks_root.add_module(str(j), BasicBlock(c_in, c_out, stride, rng, dtype)))
        self.head = self.add_module("head", Head(config.widths[-1], config.num_classes, rng, dtype))

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        h = self.stem.forward(x.astype(self.dtype, copy=False), training)
        for block in self.blocks:
            h = block.forward(h, training)
        return self.head.forward(h)

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = self.head.backward(grad_logits)
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        return self.stem.backward(grad)

    def mac_table(self) -> List[Tuple[str, int]]:
        return plain_mac_table(self.config)

    def original_macs(self) -> int:
        return int(sum(macs for _, macs in self.mac_table()))


def static_mac_table(config: TinyNetConfig) -> List[Tuple[str, int]]:
    """Layers that MSGC never masks: stem, projection shortcuts and classifier."""
    side = config.input_size
    rows = [("stem.conv", conv2d_macs(config.in_channels, config.stem_width, 3, side, side))]
    for j, (c_in, c_out, stride, side_in) in enumerate(config.block_plan()):
        if needs_projection(c_in, c_out, stride):
            out = conv_output_size(side_in, 1, stride, 0)
            rows.append((f"blocks.{j}.shortcut", conv2d_macs(c_in, c_out, 1, out, out)))
    rows.append(("head.fc", config.widths[-1] * config.num_classes))
    return rows


def plain_mac_table(config: TinyNetConfig) -> List[Tuple[str, int]]:
    """Per-layer MACs of the plain network in forward order."""
    static = dict(static_mac_table(config))
    rows = [("stem.conv", static["stem.conv"])]
    for j, (c_in, c_out, stride, side_in) in enumerate(config.block_plan()):
        side1 = conv_output_size(side_in, 3, stride, 1)
        rows.append((f"blocks.{j}.conv1", conv2d_macs(c_in, c_out, 3, side1, side1)))
        rows.append((f"blocks.{j}.conv2", conv2d_macs(c_out, c_out, 3, side1, side1)))
        if f"blocks.{j}.shortcut" in static:
            rows.append((f"blocks.{j}.shortcut", static[f"blocks.{j}.shortcut"]))
    rows.append(("head.fc", static["head.fc"]))
    return rows


def build_plain(config: TinyNetConfig, seed: int = 0, dtype=np.float64) -> PlainNet:
    """Build a freshly initialized plain network."""
    return PlainNet(config, np.random.default_rng(seed), dtype)
