"""Desk-scale host networks, plain and MSGC-equipped."""

from .tiny_net import PlainNet, build_plain
from .msgc_net import MsgcNet, build_msgc, convert_to_msgc, network_forward_with_ledger

__all__ = [
    "PlainNet",
    "build_plain",
    "MsgcNet",
    "build_msgc",
    "convert_to_msgc",
    "network_forward_with_ledger"
]
