"""SVG plots of the analysis tables and training logs."""

from .plots import (
    HAS_PLOTTING,
    plot_attention,
    plot_group_curves,
    plot_histogram,
    plot_layers,
    plot_pyramid,
    plot_training_log
)

__all__ = [
    "HAS_PLOTTING",
    "plot_attention",
    "plot_group_curves",
    "plot_histogram",
    "plot_layers",
    "plot_pyramid",
    "plot_training_log"
]
