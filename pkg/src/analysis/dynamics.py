"""
Gating dynamics of a trained MSGC network.

A single deterministic pass over a dataset records every layer's binary
masks (and attention values); the group, layer, sample and attention
records are all computed from that pass.
"""

from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from backbones.msgc_net import MsgcNet
from core.config import ANALYSIS_PARAMS
from core.errors import AnalysisError
from data_io.dataset import Dataset
from msgc.macs import pyramid_counts
from training.trainer import EvalResult

LayerKey = Tuple[int, int]

GROUP_COLUMNS = ["block", "layer", "g", "rank", "probability"]
PYRAMID_COLUMNS = ["block", "layer", "channels", "canonical", "partial", "discarded", "samples"]
LAYER_COLUMNS = ["block", "layer", "channels", "groups", "mean_channels_per_group",
                 "remaining_rate"]
SAMPLE_COLUMNS = ["index", "label", "prediction", "correct", "macs", "mac_ratio"]
HISTOGRAM_COLUMNS = ["bin_low", "bin_high", "count", "correct", "accuracy"]
EXEMPLAR_COLUMNS = ["kind", "rank", "index", "macs", "correct"]
ATTENTION_COLUMNS = ["block", "layer", "group", "channel", "gating_probability", "attention"]


class GatingRecord:
    """
    Masks and attention of every MSGC layer over an evaluation set.

    Attributes:
        result: EvalResult of the pass
        masks: (block, layer) -> int8 array (N, G, C), layers 1-based
        attention: (block, layer) -> float array (N, G, C) where present
    """

    def __init__(self, result: EvalResult, masks: Dict[LayerKey, np.ndarray],
                 attention: Dict[LayerKey, np.ndarray]):
        self.result = result
        self.masks = masks
        self.attention = attention

    @property
    def num_samples(self) -> int:
        return len(self.result.labels)

    def __repr__(self):
        return (f"GatingRecord(samples={self.num_samples}, layers={len(self.masks)}, "
                f"attention_layers={len(self.attention)})")


def collect_gating(network: MsgcNet, dataset: Dataset, batch_size: int = 256) -> GatingRecord:
    """Run the eval-mode forward and keep every layer's masks."""
    if not isinstance(network, MsgcNet):
        raise AnalysisError("gating analysis needs an MSGC checkpoint, got a plain network")
    if len(dataset) == 0:
        raise AnalysisError("gating analysis needs a non-empty dataset")

    masks: Dict[LayerKey, list] = {}
    attention: Dict[LayerKey, list] = {}
    predictions, macs = [], []
    for x, _ in dataset.batches(batch_size):
        logits, ledger = network.forward(x, "eval")
        predictions.append(np.argmax(logits, axis=1))
        macs.append(ledger.achieved)
        for j, block in enumerate(network.blocks):
            for i, mask in enumerate(block.last_masks):
                masks.setdefault((j, i + 1), []).append(mask.hard.astype(np.int8))
                if block.last_attention[i] is not None:
                    attention.setdefault((j, i + 1), []).append(block.last_attention[i])

    result = EvalResult(dataset.labels, np.concatenate(predictions), np.concatenate(macs),
                        network.original_macs())
    return GatingRecord(
        result,
        {key: np.concatenate(parts) for key, parts in masks.items()},
        {key: np.concatenate(parts) for key, parts in attention.items()},
    )


def group_frame(record: GatingRecord) -> pd.DataFrame:
    """
    Per layer and g = 1..G, the probability of each channel being selected
    by at least g groups, sorted in descending order (rank 0 = highest).
    """
    rows = []
    for (block, layer), mask in record.masks.items():
        count = mask.astype(np.int64).sum(axis=1)                 # (N, C)
        for g in range(1, mask.shape[1] + 1):
            probability = np.sort((count >= g).mean(axis=0))[::-1]
            for rank, p in enumerate(probability):
                rows.append({"block": block, "layer": layer, "g": g, "rank": rank,
                             "probability": float(p)})
    return pd.DataFrame(rows, columns=GROUP_COLUMNS)


def pyramid_frame(record: GatingRecord) -> pd.DataFrame:
    """Canonical / partial / discarded channel totals per layer."""
    rows = []
    for (block, layer), mask in record.masks.items():
        canonical, partial, discarded = pyramid_counts(mask)
        channels = mask.shape[2]
        if np.any(canonical + partial + discarded != channels):
            raise AnalysisError(f"block {block} layer {layer}: pyramid counts do not partition "
                                f"the {channels} channels")
        rows.append({"block": block, "layer": layer, "channels": channels,
                     "canonical": int(canonical.sum()), "partial": int(partial.sum()),
                     "discarded": int(discarded.sum()), "samples": len(mask)})
    return pd.DataFrame(rows, columns=PYRAMID_COLUMNS)


def layer_frame(record: GatingRecord) -> pd.DataFrame:
    """Mean channels kept per group and remaining rate of every layer."""
    rows = []
    for (block, layer), mask in record.masks.items():
        per_group = float(mask.sum(axis=2).mean())
        rows.append({"block": block, "layer": layer, "channels": mask.shape[2],
                     "groups": mask.shape[1], "mean_channels_per_group": per_group,
                     "remaining_rate": per_group / mask.shape[2]})
    return pd.DataFrame(rows, columns=LAYER_COLUMNS)


def sample_frame(result: EvalResult) -> pd.DataFrame:
    return pd.DataFrame({
        "index": np.arange(len(result.labels)),
        "label": result.labels,
        "prediction": result.predictions,
        "correct": result.correct.astype(np.int64),
        "macs": result.macs,
        "mac_ratio": result.mac_ratios,
    }, columns=SAMPLE_COLUMNS)


def histogram_frame(result: EvalResult,
                    bins: int = ANALYSIS_PARAMS["histogram_bins"]) -> pd.DataFrame:
    """
    MAC histogram with per-bin accuracy (0 for empty bins), so that
    sum(count * accuracy) / sum(count) is the overall accuracy.
    """
    counts, edges = np.histogram(result.macs, bins=bins)
    bin_index = np.clip(np.searchsorted(edges, result.macs, side="right") - 1, 0, bins - 1)
    correct = np.bincount(bin_index, weights=result.correct, minlength=bins).astype(np.int64)
    accuracy = np.divide(correct, counts, out=np.zeros(bins), where=counts > 0)
    return pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:], "count": counts,
                         "correct": correct, "accuracy": accuracy}, columns=HISTOGRAM_COLUMNS)


def exemplar_frame(result: EvalResult,
                   count: int = ANALYSIS_PARAMS["exemplars"]) -> pd.DataFrame:
    """Indices of the lowest- and highest-MAC samples (ties broken by index)."""
    ascending = np.lexsort((np.arange(len(result.macs)), result.macs))
    descending = np.lexsort((np.arange(len(result.macs)), -result.macs))
    rows = []
    for kind, order in (("lowest", ascending), ("highest", descending)):
        for rank, index in enumerate(order[:count]):
            rows.append({"kind": kind, "rank": rank, "index": int(index),
                         "macs": int(result.macs[index]),
                         "correct": int(result.correct[index])})
    return pd.DataFrame(rows, columns=EXEMPLAR_COLUMNS)


def attention_frame(record: GatingRecord) -> pd.DataFrame:
    """Selection frequency and mean attention per (layer, group, channel)."""
    if not record.attention:
        raise AnalysisError("checkpoint has no attention layers")
    rows = []
    for (block, layer), values in record.attention.items():
        gating = record.masks[(block, layer)].mean(axis=0)
        mean_attention = values.mean(axis=0)
        groups, channels = gating.shape
        for g in range(groups):
            for c in range(channels):
                rows.append({"block": block, "layer": layer, "group": g, "channel": c,
                             "gating_probability": float(gating[g, c]),
                             "attention": float(mean_attention[g, c])})
    return pd.DataFrame(rows, columns=ATTENTION_COLUMNS)


def mac_dynamism(result: EvalResult) -> Dict[str, Optional[float]]:
    """Spread of per-sample MACs and mean MACs of correct vs misclassified samples."""
    correct = result.correct
    return {
        "mac_std": float(np.std(result.macs)),
        "mean_macs_correct": float(result.macs[correct].mean()) if correct.any() else None,
        "mean_macs_wrong": float(result.macs[~correct].mean()) if (~correct).any() else None,
    }
