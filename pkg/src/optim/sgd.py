"""
SGD with momentum and per-group learning rate / weight decay.

    v <- momentum * v + g + wd * theta
    theta <- theta - lr * v
"""

from typing import Dict, List, Optional

import numpy as np

from core.config import OPTIMIZER_PARAMS
from core.errors import NonFiniteError
from msgc.gating import is_mlp_parameter
from tensor_ops.modules import Module, Parameter


class ParamGroup:
    """
    Attributes:
        name: group name ("mlp" or "backbone")
        params: parameter name -> Parameter
        lr: current learning rate
        base_lr: learning rate at epoch 0
        momentum: momentum coefficient
        weight_decay: L2 coefficient added to the gradient
    """

    def __init__(self, name: str, params: Dict[str, Parameter], base_lr: float,
                 momentum: float = OPTIMIZER_PARAMS["momentum"], weight_decay: float = 0.0):
        self.name = name
        self.params = params
        self.base_lr = float(base_lr)
        self.lr = float(base_lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)

    def __repr__(self):
        return (f"ParamGroup('{self.name}', tensors={len(self.params)}, lr={self.lr:.5g}, "
                f"wd={self.weight_decay})")


class OptimizerConfig:
    """Hyperparameters of the two parameter groups."""

    def __init__(
        self,
        lr_mlp: float = OPTIMIZER_PARAMS["lr_mlp"],
        lr_backbone: float = OPTIMIZER_PARAMS["lr_backbone"],
        momentum: float = OPTIMIZER_PARAMS["momentum"],
        weight_decay_backbone: float = OPTIMIZER_PARAMS["weight_decay_backbone"],
        weight_decay_mlp: float = OPTIMIZER_PARAMS["weight_decay_mlp"],
    ):
        self.lr_mlp = lr_mlp
        self.lr_backbone = lr_backbone
        self.momentum = momentum
        self.weight_decay_backbone = weight_decay_backbone
        self.weight_decay_mlp = weight_decay_mlp


def build_param_groups(network: Module, config: OptimizerConfig) -> List[ParamGroup]:
    """Split a network's parameters into the mlp and backbone groups."""
    mlp, backbone = {}, {}
    for name, param in network.named_parameters():
        (mlp if is_mlp_parameter(name) else backbone)[name] = param
    groups = [ParamGroup("backbone", backbone, config.lr_backbone, config.momentum,
                         config.weight_decay_backbone)]
    if mlp:
        groups.insert(0, ParamGroup("mlp", mlp, config.lr_mlp, config.momentum,
                                    config.weight_decay_mlp))
    return groups


def sgd_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: Dict[str, np.ndarray],
    lr: float,
    momentum: float = OPTIMIZER_PARAMS["momentum"],
    weight_decay: float = 0.0,
) -> Dict[str, np.ndarray]:
    """
    One momentum step over plain arrays.

    Args:
        params: name -> current values
        grads: name -> gradients
        state: name -> velocity (missing entries start at zero; updated in place)
        lr, momentum, weight_decay: hyperparameters of this group

    Returns:
        name -> updated values

    Raises:
        NonFiniteError: if any gradient holds NaN/Inf (no parameter is updated)
    """
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NonFiniteError(f"non-finite gradient in {', '.join(sorted(bad))}")
    updated = {}
    for name, theta in params.items():
        v = state.get(name)
        if v is None:
            v = np.zeros_like(theta)
        v = momentum * v + grads[name] + weight_decay * theta
        state[name] = v
        updated[name] = theta - lr * v
    return updated


class SGD:
    """Momentum SGD over named parameter groups."""

    def __init__(self, groups: List[ParamGroup]):
        self.groups = groups
        self.velocity: Dict[str, np.ndarray] = {}

    def group(self, name: str) -> Optional[ParamGroup]:
        for group in self.groups:
            if group.name == name:
                return group
        return None

    def step(self) -> None:
        for group in self.groups:
            bad = [n for n, p in group.params.items() if not np.all(np.isfinite(p.grad))]
            if bad:
                raise NonFiniteError(f"non-finite gradient in {', '.join(sorted(bad))}")
        for group in self.groups:
            updated = sgd_step(
                {n: p.data for n, p in group.params.items()},
                {n: p.grad for n, p in group.params.items()},
                self.velocity, group.lr, group.momentum, group.weight_decay,
            )
            for name, value in updated.items():
                param = group.params[name]
                param.data = value.astype(param.data.dtype, copy=False)

    def zero_grad(self) -> None:
        for group in self.groups:
            for param in group.params.values():
                param.zero_grad()
