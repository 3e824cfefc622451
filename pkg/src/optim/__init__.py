"""Budget loss, tau / learning-rate schedules and grouped SGD."""

from .schedule import BudgetSchedule, budget_loss, lr_at
from .sgd import SGD, OptimizerConfig, build_param_groups, sgd_step

__all__ = [
    "BudgetSchedule",
    "budget_loss",
    "lr_at",
    "SGD",
    "OptimizerConfig",
    "build_param_groups",
    "sgd_step"
]
