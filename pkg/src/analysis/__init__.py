"""Group, layer, sample and attention analysis of trained MSGC networks."""

from .dynamics import GatingRecord, collect_gating
from .report import write_analysis

__all__ = [
    "GatingRecord",
    "collect_gating",
    "write_analysis"
]
