"""Middle spectrum grouped convolution: gating, masked grouped conv and MAC accounting."""

from .block import MsgcBlock
from .gating import binarize_eval, binarize_train
from .grouped_conv import MaskedGroupedConv, masked_grouped_conv_forward
from .macs import compute_block_macs, pyramid_counts
from .plug_in import plug_in

__all__ = [
    "MsgcBlock",
    "binarize_eval",
    "binarize_train",
    "MaskedGroupedConv",
    "masked_grouped_conv_forward",
    "compute_block_macs",
    "pyramid_counts",
    "plug_in"
]
