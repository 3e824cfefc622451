"""
Central finite-difference gradient checking.
"""

from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from core.config import GRADCHECK_PARAMS
from tensor_ops.modules import Parameter


def relative_error(fd: float, analytic: float) -> float:
    return abs(fd - analytic) / max(1e-8, abs(fd) + abs(analytic))


def _central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray,
                        index: Tuple[int, ...], step: float) -> float:
    original = theta[index]
    h = step * max(1.0, abs(original))
    theta[index] = original + h
    f_plus = f(theta)
    theta[index] = original - h
    f_minus = f(theta)
    theta[index] = original
    return (f_plus - f_minus) / (2.0 * h)


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    theta: np.ndarray,
    analytic_grad: np.ndarray,
    coords: Optional[Iterable[Tuple[int, ...]]] = None,
    step: float = GRADCHECK_PARAMS["step"],
) -> float:
    """
    Max relative error between ``analytic_grad`` and central differences of f.

    Args:
        f: scalar function of the parameter tensor
        theta: point of evaluation (perturbed in place, restored afterwards)
        analytic_grad: gradient to verify, same shape as theta
        coords: optional subset of indices to check (all by default)
        step: relative step, h = step * max(1, |theta_j|)

    Returns:
        max_j |g_fd - g_an| / max(1e-8, |g_fd| + |g_an|); inf if any
        evaluation was non-finite
    """
    theta = np.asarray(theta)
    if theta.dtype != np.float64:
        raise TypeError("finite differences need float64 parameters")
    if analytic_grad.shape != theta.shape:
        raise ValueError(f"gradient shape {analytic_grad.shape} != {theta.shape}")
    if coords is None:
        coords = np.ndindex(*theta.shape)

    worst = 0.0
    for index in coords:
        index = tuple(int(i) for i in index)
        fd = _central_difference(f, theta, index, step)
        an = float(analytic_grad[index])
        if not (np.isfinite(fd) and np.isfinite(an)):
            return float("inf")
        worst = max(worst, relative_error(fd, an))
    return worst


def sample_coords(shape: Sequence[int], count: int,
                  rng: np.random.Generator) -> Sequence[Tuple[int, ...]]:
    """Up to ``count`` distinct random indices into an array of ``shape``."""
    size = int(np.prod(shape))
    if size <= count:
        return list(np.ndindex(*shape))
    flat = rng.choice(size, size=count, replace=False)
    return [np.unravel_index(int(i), shape) for i in flat]


def check_parameters(
    loss_fn: Callable[[], float],
    named_params: Dict[str, Parameter],
    coords_per_tensor: Optional[int] = GRADCHECK_PARAMS["coords_per_tensor"],
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """
    Finite-difference check of every parameter's accumulated ``grad``.

    ``loss_fn`` must recompute the loss from the current parameter values
    and be deterministic (frozen noise). The analytic gradients are read
    from ``Parameter.grad`` before any perturbation happens.

    Returns:
        Dictionary of parameter name -> max relative error
    """
    rng = rng or np.random.default_rng(0)
    errors = {}
    for name, param in named_params.items():
        analytic = param.grad.copy()

        def f(theta, param=param):
            param.data = theta
            return loss_fn()

        coords = None
        if coords_per_tensor is not None:
            coords = sample_coords(param.shape, coords_per_tensor, rng)
        errors[name] = finite_diff_check(f, param.data, analytic, coords)
    return errors
