"""
MSGC-equipped host network and the plug-in converter.

Every basic block of the plain network becomes an MsgcBlock with the same
stem, head, batch norms and shortcut; only the two 3x3 convs of each block
are gated. Stem, shortcut and classifier contribute fixed MACs.
"""

from typing import List, Optional, Tuple

import numpy as np

from backbones.tiny_net import (
    Head, PlainNet, Stem, build_plain, needs_projection, static_mac_table,
)
from core.data_models import MacLedger, MsgcNetConfig
from core.errors import ConfigurationError
from msgc.block import MsgcBlock
from msgc.gating import is_mlp_parameter
from msgc.macs import mlp_overhead_macs
from msgc.plug_in import GroupFilterBank, plug_in
from tensor_ops.modules import Module


class MsgcNet(Module):
    """
    Attributes:
        config: MsgcNetConfig
        stem, blocks, head: network stages (blocks registered as blocks.{j})
        last_costs: differentiable per-sample MAC cost of the latest forward
    """

    def __init__(
        self,
        config: MsgcNetConfig,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float64,
        banks: Optional[List[List[GroupFilterBank]]] = None,
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        net = config.net
        self.config = config
        self.dtype = dtype
        self.stem = self.add_module("stem", Stem(net.in_channels, net.stem_width, rng, dtype))
        blocks_root = self.add_module("blocks", Module())
        self.blocks: List[MsgcBlock] = []
        for j, (block_config, (c_in, c_out, stride, _)) in enumerate(
                zip(config.block_configs(), net.block_plan())):
            block = MsgcBlock(
                block_config, rng,
                banks=banks[j] if banks is not None else None,
                shortcut=needs_projection(c_in, c_out, stride),
                dtype=dtype,
                saliency_bias_init=config.saliency_bias_init,
            )
            block.ledger_prefix = f"blocks.{j}."
            self.blocks.append(blocks_root.add_module(str(j), block))
        self.head = self.add_module("head", Head(net.widths[-1], net.num_classes, rng, dtype))
        self.last_costs = None

    @property
    def has_attention(self) -> bool:
        return any(block.has_attention for block in self.blocks)

    def forward(
        self,
        x: np.ndarray,
        mode: str = "eval",
        rng: Optional[np.random.Generator] = None,
        force_ones: bool = False,
    ) -> Tuple[np.ndarray, MacLedger]:
        """
        Returns:
            Tuple of (logits (N, classes), network MacLedger)
        """
        training = mode != "eval"
        h = self.stem.forward(x.astype(self.dtype, copy=False), training)
        ledgers = []
        for block in self.blocks:
            h, ledger = block.forward(h, mode, rng, force_ones)
            ledgers.append(ledger)
        logits = self.head.forward(h)
        static = static_mac_table(self.config.net)
        self.last_costs = self.static_macs() + sum(block.last_costs for block in self.blocks)
        return logits, MacLedger.combine(ledgers, self.static_macs(), dict(static))

    def backward(self, grad_logits: np.ndarray, grad_cost: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Args:
            grad_logits: gradient w.r.t. the logits
            grad_cost: gradient w.r.t. each sample's MAC cost, shape (N,)
        """
        grad = self.head.backward(grad_logits)
        for block in reversed(self.blocks):
            grad = block.backward(grad, grad_cost)
        return self.stem.backward(grad)

    def static_macs(self) -> int:
        return int(sum(macs for _, macs in static_mac_table(self.config.net)))

    def original_macs(self) -> int:
        return self.static_macs() + int(sum(block.original_macs() for block in self.blocks))

    def mlp_overhead(self) -> int:
        return int(sum(mlp_overhead_macs(block.config) for block in self.blocks))

    def mac_table(self) -> List[Tuple[str, int]]:
        """Per-layer M_ori in forward order (masked and static layers)."""
        static = dict(static_mac_table(self.config.net))
        rows = [("stem.conv", static["stem.conv"])]
        for j, block in enumerate(self.blocks):
            cfg = block.config
            for i, (k, (h, w)) in enumerate(zip(cfg.kernel_sizes, cfg.layer_sizes())):
                rows.append((f"blocks.{j}.conv{i + 1}",
                             k * k * h * w * cfg.channels[i] * cfg.channels[i + 1]))
            if f"blocks.{j}.shortcut" in static:
                rows.append((f"blocks.{j}.shortcut", static[f"blocks.{j}.shortcut"]))
        rows.append(("head.fc", static["head.fc"]))
        return rows

    def backbone_parameter_count(self) -> int:
        return int(sum(p.data.size for name, p in self.named_parameters()
                       if not is_mlp_parameter(name)))


def network_forward_with_ledger(
    network: MsgcNet,
    x: np.ndarray,
    mode: str = "eval",
    rng: Optional[np.random.Generator] = None,
    force_ones: bool = False,
) -> Tuple[np.ndarray, MacLedger]:
    """Forward a batch and return the logits with the per-sample MAC ledger."""
    return network.forward(x, mode, rng, force_ones)


def convert_to_msgc(plain: PlainNet, config: MsgcNetConfig, seed: int = 0) -> MsgcNet:
    """
    Wrap a plain network's blocks with MSGC.

    Block convs are split into per-group filters with plug_in; stem, head,
    batch norms, shortcuts and running statistics are copied. Mask and
    attention MLPs are freshly initialized from ``seed``.
    """
    net = config.net
    if (plain.config.widths != net.widths or plain.config.strides != net.strides
            or plain.config.stem_width != net.stem_width
            or plain.config.in_channels != net.in_channels
            or plain.config.input_size != net.input_size
            or plain.config.num_classes != net.num_classes):
        raise ConfigurationError(f"{net!r} does not describe the plain network {plain.config!r}")

    banks = []
    for block, block_config in zip(plain.blocks, config.block_configs()):
        banks.append([
            plug_in(block.conv1.weight.data.copy(), block_config.groups[0]),
            plug_in(block.conv2.weight.data.copy(), block_config.groups[1]),
        ])
    msgc = MsgcNet(config, np.random.default_rng(seed), plain.dtype, banks)

    state = msgc.state_dict()
    for name, value in plain.state_dict().items():
        if name in state:
            state[name] = value.copy()
    msgc.load_state_dict(state)
    return msgc


def build_msgc(config: MsgcNetConfig, seed: int = 0, dtype=np.float64) -> MsgcNet:
    """Freshly initialized MSGC network (equivalent to converting a fresh plain one)."""
    return convert_to_msgc(build_plain(config.net, seed, dtype), config, seed)
