"""
SVG figures rendered from the analysis and training-log tables.

Plots are conveniences; the CSVs are the contract. Without matplotlib and
seaborn every function prints a notice and returns None.
"""

from pathlib import Path
from typing import Optional

import pandas as pd

from core.config import VISUALIZATION_PARAMS

try:
    import matplotlib
    matplotlib.use("Agg")  # Non-interactive backend
    import matplotlib.pyplot as plt
    import seaborn as sns
    HAS_PLOTTING = True
except ImportError:
    HAS_PLOTTING = False

# SVG output embeds a date and random ids by default
_SVG_META = {"Date": None}


def _figure(rows: int = 1, cols: int = 1, height_scale: float = 1.0):
    sns.set_style("whitegrid")
    plt.rcParams["svg.hashsalt"] = "msgc"
    return plt.subplots(rows, cols, figsize=(VISUALIZATION_PARAMS["figure_width"],
                                             VISUALIZATION_PARAMS["figure_height"] * height_scale))


def _save(fig, output_file: Path) -> Path:
    fig.tight_layout()
    fig.savefig(output_file, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return output_file


def _skip(name: str) -> None:
    print(f"[analyze] notice: matplotlib/seaborn not installed, skipping {name}")


def plot_group_curves(frame: pd.DataFrame, output_file: Path) -> Optional[Path]:
    """Descending at-least-g selection probability per layer."""
    if not HAS_PLOTTING:
        _skip(output_file.name)
        return None
    fig, ax = _figure()
    palette = VISUALIZATION_PARAMS["color_palette"]
    for n, ((block, layer, g), part) in enumerate(frame.groupby(["block", "layer", "g"])):
        ax.plot(part["rank"], part["probability"], color=palette[(g - 1) % len(palette)],
                alpha=0.7, label=f"b{block}.l{layer} g>={g}" if n < 12 else None)
    ax.set_xlabel("channel rank")
    ax.set_ylabel("P(selected by at least g groups)")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=6, ncol=2)
    return _save(fig, output_file)


def plot_pyramid(frame: pd.DataFrame, output_file: Path) -> Optional[Path]:
    """Stacked canonical / partial / discarded fractions per layer."""
    if not HAS_PLOTTING:
        _skip(output_file.name)
        return None
    fig, ax = _figure()
    labels = [f"b{b}.l{l}" for b, l in zip(frame["block"], frame["layer"])]
    total = (frame["channels"] * frame["samples"]).clip(lower=1)
    bottom = 0
    for column, color in (("canonical", "tab:blue"), ("partial", "tab:orange"),
                          ("discarded", "tab:gray")):
        share = frame[column] / total
        ax.bar(labels, share, bottom=bottom, color=color, label=column)
        bottom = bottom + share
    ax.set_ylabel("fraction of channels")
    ax.legend()
    return _save(fig, output_file)


def plot_layers(frame: pd.DataFrame, output_file: Path) -> Optional[Path]:
    if not HAS_PLOTTING:
        _skip(output_file.name)
        return None
    fig, ax = _figure()
    labels = [f"b{b}.l{l}" for b, l in zip(frame["block"], frame["layer"])]
    sns.barplot(x=labels, y=frame["remaining_rate"], color="tab:blue", ax=ax)
    ax.set_ylabel("remaining rate")
    ax.set_ylim(0, 1.02)
    return _save(fig, output_file)


def plot_histogram(frame: pd.DataFrame, output_file: Path) -> Optional[Path]:
    """MAC histogram with the per-bin accuracy on a second axis."""
    if not HAS_PLOTTING:
        _skip(output_file.name)
        return None
    fig, ax = _figure()
    centers = (frame["bin_low"] + frame["bin_high"]) / 2
    width = (frame["bin_high"] - frame["bin_low"]).iloc[0] if len(frame) else 1.0
    ax.bar(centers, frame["count"], width=width * 0.9, color="tab:blue", alpha=0.6)
    ax.set_xlabel("MACs")
    ax.set_ylabel("samples")
    twin = ax.twinx()
    twin.plot(centers, frame["accuracy"], color="tab:red", marker="o")
    twin.set_ylabel("accuracy")
    twin.set_ylim(0, 1.02)
    return _save(fig, output_file)


def plot_attention(frame: pd.DataFrame, output_file: Path) -> Optional[Path]:
    """Heatmaps of selection frequency and mean attention, one row per layer."""
    if not HAS_PLOTTING:
        _skip(output_file.name)
        return None
    layers = list(frame.groupby(["block", "layer"]))
    fig, axes = _figure(len(layers), 2, height_scale=0.6 * len(layers))
    axes = axes.reshape(len(layers), 2)
    for row, ((block, layer), part) in enumerate(layers):
        for col, column in enumerate(("gating_probability", "attention")):
            pivot = part.pivot(index="group", columns="channel", values=column)
            sns.heatmap(pivot, ax=axes[row, col], vmin=0, vmax=1,
                        cmap=VISUALIZATION_PARAMS["heatmap_cmap"], cbar=col == 1)
            axes[row, col].set_title(f"block {block} layer {layer}: {column}", fontsize=8)
    return _save(fig, output_file)


def plot_training_log(frame: pd.DataFrame, output_file: Path) -> Optional[Path]:
    """MAC ratio against tau, and validation accuracy, per epoch."""
    if not HAS_PLOTTING:
        _skip(output_file.name)
        return None
    fig, axes = _figure(2, 1, height_scale=1.5)
    axes[0].plot(frame["epoch"], frame["train_mac_ratio"], label="train MAC ratio")
    axes[0].plot(frame["epoch"], frame["val_mac_ratio"], label="val MAC ratio")
    axes[0].plot(frame["epoch"], frame["tau"], linestyle="--", color="gray", label="tau")
    axes[0].legend()
    axes[1].plot(frame["epoch"], frame["val_accuracy"], color="tab:green")
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("val accuracy")
    return _save(fig, output_file)
