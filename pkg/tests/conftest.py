"""Shared fixtures: import paths, seeded generators and small network configs."""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "scripts"))
sys.path.insert(0, str(Path(__file__).parent))

from core.data_models import MsgcNetConfig, TinyNetConfig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_net_config():
    """Two-block, 8-channel host on 8x8 images."""
    return TinyNetConfig(in_channels=3, input_size=8, stem_width=8, widths=(8, 8),
                         strides=(1, 2), num_classes=4)


@pytest.fixture
def tiny_msgc_config(tiny_net_config):
    return MsgcNetConfig(tiny_net_config, groups=(1, 4), attention_layers=(1, 2), reduction=4)


@pytest.fixture
def small_run_config(tmp_path):
    """RunConfig dictionary for a seconds-long training run."""
    from core.config import DEFAULT_RUN_CONFIG
    config = dict(DEFAULT_RUN_CONFIG)
    config.update({
        "data": str(tmp_path / "train.msgd"),
        "val_data": str(tmp_path / "val.msgd"),
        "widths": [8, 8],
        "strides": [1, 2],
        "stem_width": 8,
        "input_size": 8,
        "num_classes": 4,
        "epochs": 2,
        "batch_size": 8,
        "output": str(tmp_path / "model.ckpt"),
        "log": str(tmp_path / "train_log.csv"),
        "gradcheck_trials": 1,
    })
    return config


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full training runs (deselect with -m 'not slow')")
