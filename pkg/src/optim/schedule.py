"""
Budget loss and the tau / learning-rate schedules.

    L_bgt = max(lambda * (M_b / M_ori - tau), 0)

tau starts at 1.0 and descends linearly to tau_end over the first
warm_fraction of training; learning rates follow a cosine curve to 0.
Epoch arguments may be fractional (epoch + iteration / iterations_per_epoch).
"""

import math
from typing import Tuple

from core.config import BUDGET_PARAMS
from core.errors import ConfigurationError


class BudgetSchedule:
    """
    Attributes:
        lam: weight lambda of the budget loss
        tau_start: initial target remaining rate (1.0)
        tau_end: final target remaining rate
        warm_fraction: fraction of training over which tau descends
        total_epochs: length of training
    """

    def __init__(
        self,
        total_epochs: int,
        lam: float = BUDGET_PARAMS["lambda"],
        tau_end: float = BUDGET_PARAMS["tau_end"],
        tau_start: float = BUDGET_PARAMS["tau_start"],
        warm_fraction: float = BUDGET_PARAMS["warm_fraction"],
    ):
        self.total_epochs = int(total_epochs)
        self.lam = float(lam)
        self.tau_start = float(tau_start)
        self.tau_end = float(tau_end)
        self.warm_fraction = float(warm_fraction)
        if self.total_epochs < 1:
            raise ConfigurationError("total_epochs must be at least 1")
        if self.lam < 0:
            raise ConfigurationError("lambda must be non-negative")
        if not 0 < self.tau_end <= self.tau_start:
            raise ConfigurationError(f"need 0 < tau_end <= tau_start, got {self.tau_end}")
        if not 0 < self.warm_fraction <= 1:
            raise ConfigurationError(f"warm_fraction must lie in (0, 1], got {self.warm_fraction}")

    @property
    def warm_epochs(self) -> float:
        return self.warm_fraction * self.total_epochs

    def tau_at(self, epoch: float) -> float:
        """Linear descent from tau_start to tau_end, then constant."""
        if epoch >= self.warm_epochs:
            return self.tau_end
        progress = max(epoch, 0.0) / self.warm_epochs
        return self.tau_start + (self.tau_end - self.tau_start) * progress

    def lr_at(self, epoch: float, base_lr: float) -> float:
        return lr_at(epoch, base_lr, self.total_epochs)

    def __repr__(self):
        return (f"BudgetSchedule(lambda={self.lam}, tau={self.tau_start}->{self.tau_end}, "
                f"warm={self.warm_fraction}, epochs={self.total_epochs})")


def lr_at(epoch: float, base_lr: float, total_epochs: int) -> float:
    """Cosine annealing from base_lr (epoch 0) to 0 (epoch total_epochs)."""
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def budget_loss(mean_batch_macs: float, m_ori: float, lam: float, tau: float) -> Tuple[float, float]:
    """
    Hinge budget loss.

    Returns:
        Tuple of (loss, d loss / d mean_batch_macs)
    """
    if m_ori <= 0:
        raise ConfigurationError("original MACs must be positive")
    if mean_batch_macs < 0:
        raise ConfigurationError("mean MACs cannot be negative")
    excess = lam * (mean_batch_macs / m_ori - tau)
    if excess > 0:
        return float(excess), lam / m_ori
    return 0.0, 0.0
