"""
Inference-gate calibration.

Training selects a channel when S + L >= 0 with logistic noise L, so the
budget is met on average over noisy masks. Inference uses Sign(S), and the
two cost ratios drift apart. After the last epoch every mask generator's
saliency bias is moved by one common shift, found by bisection, so that the
eval-mode MAC ratio on training samples lands on the trained ratio.
"""

from typing import List, Optional

import numpy as np

from backbones.msgc_net import MsgcNet
from core.config import CALIBRATION_PARAMS
from core.errors import ConfigurationError
from data_io.dataset import Dataset
from tensor_ops.modules import Parameter


class CalibrationResult:
    """
    Attributes:
        shift: offset added to every gate saliency bias
        ratio_before, ratio_after: eval MAC ratio without / with the shift
        target: ratio the bisection aimed for
    """

    def __init__(self, shift: float, ratio_before: float, ratio_after: float, target: float):
        self.shift = float(shift)
        self.ratio_before = float(ratio_before)
        self.ratio_after = float(ratio_after)
        self.target = float(target)

    def __repr__(self):
        return (f"CalibrationResult(shift={self.shift:+.4f}, "
                f"ratio={self.ratio_before:.4f}->{self.ratio_after:.4f}, target={self.target:.4f})")


def gate_biases(network: MsgcNet) -> List[Parameter]:
    """Saliency biases (fc2.bias) of every gating MLP; attention MLPs are left out."""
    return [gate.fc2.bias for block in network.blocks for gate in block.gates]


def calibration_subset(dataset: Dataset, max_samples: int) -> Dataset:
    """Evenly strided samples spanning the whole set (class-sorted files keep every class)."""
    if len(dataset) <= max_samples:
        return dataset
    indices = np.linspace(0, len(dataset) - 1, max_samples).round().astype(np.int64)
    return dataset.subset(np.unique(indices))


def eval_mac_ratio(network: MsgcNet, dataset: Dataset, batch_size: int = 256) -> float:
    """Mean achieved MACs over M_ori with deterministic masks."""
    achieved = [network.forward(x, "eval")[1].achieved for x, _ in dataset.batches(batch_size)]
    return float(np.concatenate(achieved).mean()) / float(network.original_macs())


def calibrate_gates(
    network: MsgcNet,
    dataset: Dataset,
    target: float,
    batch_size: int = 256,
    max_shift: float = CALIBRATION_PARAMS["max_shift"],
    steps: int = CALIBRATION_PARAMS["steps"],
    tolerance: float = CALIBRATION_PARAMS["tolerance"],
    max_samples: Optional[int] = CALIBRATION_PARAMS["max_samples"],
    verbose: bool = True,
) -> CalibrationResult:
    """
    Shift every gate saliency bias so the eval MAC ratio meets ``target``.

    The ratio grows with the shift, so the search runs on [-max_shift, 0]
    when the network is too expensive and on [0, max_shift] otherwise. The
    best shift seen is applied to the network in place.

    Raises:
        ConfigurationError: network without gates, target outside (0, 1],
            or an empty dataset
    """
    if not isinstance(network, MsgcNet):
        raise ConfigurationError("gate calibration needs an MSGC network")
    if not 0.0 < target <= 1.0:
        raise ConfigurationError(f"calibration target must lie in (0, 1], got {target}")
    if len(dataset) == 0:
        raise ConfigurationError("gate calibration needs at least one sample")
    if max_samples is not None:
        dataset = calibration_subset(dataset, max_samples)

    biases = gate_biases(network)
    base = [bias.data.copy() for bias in biases]

    def ratio_at(shift: float) -> float:
        for bias, b0 in zip(biases, base):
            bias.data[...] = b0 + shift
        return eval_mac_ratio(network, dataset, batch_size)

    before = ratio_at(0.0)
    best_shift, best_ratio = 0.0, before
    if abs(before - target) > tolerance:
        lo, hi = (-max_shift, 0.0) if before > target else (0.0, max_shift)
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            ratio = ratio_at(mid)
            if abs(ratio - target) < abs(best_ratio - target):
                best_shift, best_ratio = mid, ratio
            if abs(ratio - target) <= tolerance:
                break
            if ratio > target:
                hi = mid
            else:
                lo = mid
    after = ratio_at(best_shift)

    result = CalibrationResult(best_shift, before, after, target)
    if verbose:
        print(f"[train] gate calibration: shift={result.shift:+.4f} ratio "
              f"{result.ratio_before:.4f} -> {result.ratio_after:.4f} (target {target:.4f})")
    return result
