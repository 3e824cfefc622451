"""
Plug-in conversion of dense filters into per-group filter banks.

A dense (k, k, C_in, C_out) filter is sliced along its output axis into G
groups; every group keeps all input channels so the gating masks can later
choose any subset of them.
"""

from typing import List

import numpy as np

from core.errors import ConfigurationError


class GroupFilterBank:
    """
    Filters of one layer split into output-channel groups.

    Attributes:
        filters: list of G arrays, each (k, k, C_in, C_out / G)
    """

    def __init__(self, filters: List[np.ndarray]):
        if not filters:
            raise ConfigurationError("a filter bank needs at least one group")
        first = filters[0].shape
        for w in filters:
            if w.ndim != 4 or w.shape != first:
                raise ConfigurationError(
                    f"all group filters must share shape {first}, got {w.shape}"
                )
        self.filters = filters

    @property
    def groups(self) -> int:
        return len(self.filters)

    @property
    def kernel_size(self) -> int:
        return self.filters[0].shape[0]

    @property
    def in_channels(self) -> int:
        return self.filters[0].shape[2]

    @property
    def out_channels(self) -> int:
        return self.filters[0].shape[3] * self.groups

    def concatenate(self) -> np.ndarray:
        """Reassemble the dense (k, k, C_in, C_out) filter."""
        return np.concatenate(self.filters, axis=3)

    def __repr__(self):
        return (f"GroupFilterBank(groups={self.groups}, k={self.kernel_size}, "
                f"in={self.in_channels}, out={self.out_channels})")


def plug_in(full_weights: np.ndarray, groups: int) -> GroupFilterBank:
    """
    Split dense filters into ``groups`` contiguous output-channel slices.

    Group g (0-based) receives output channels [g*C_out/G, (g+1)*C_out/G).

    Raises:
        ConfigurationError: if G does not divide C_out
    """
    if full_weights.ndim != 4:
        raise ConfigurationError(f"expected (k, k, C_in, C_out) weights, got {full_weights.shape}")
    c_out = full_weights.shape[3]
    if groups < 1 or c_out % groups != 0:
        raise ConfigurationError(f"group count {groups} does not divide {c_out} output channels")
    width = c_out // groups
    return GroupFilterBank([
        full_weights[:, :, :, g * width:(g + 1) * width].copy() for g in range(groups)
    ])
