"""Core data models, configuration and errors for MSGC."""

from .data_models import (
    GatingMask,
    MacLedger,
    MsgcBlockConfig,
    MsgcNetConfig,
    SaliencySet,
    TinyNetConfig,
)
from .errors import MsgcError
from .config import (
    BUDGET_PARAMS,
    GATING_PARAMS,
    OPTIMIZER_PARAMS,
    DEFAULT_RUN_CONFIG
)

__all__ = [
    "GatingMask",
    "MacLedger",
    "MsgcBlockConfig",
    "MsgcNetConfig",
    "SaliencySet",
    "TinyNetConfig",
    "MsgcError",
    "BUDGET_PARAMS",
    "GATING_PARAMS",
    "OPTIMIZER_PARAMS",
    "DEFAULT_RUN_CONFIG"
]
