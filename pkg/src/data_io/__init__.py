"""Dataset, checkpoint and RunConfig formats, and the synthetic texture generator."""

from .dataset import Dataset, load_dataset, save_dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .run_config import parse_config, write_config
from .synth import synth_generate

__all__ = [
    "Dataset",
    "load_dataset",
    "save_dataset",
    "load_checkpoint",
    "save_checkpoint",
    "parse_config",
    "write_config",
    "synth_generate"
]
