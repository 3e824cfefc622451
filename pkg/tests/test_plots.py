"""Tests for the SVG figures."""

import numpy as np
import pandas as pd
import pytest

from analysis import dynamics
from backbones.msgc_net import build_msgc
from data_io.synth import synth_generate
from visualization import plots


@pytest.fixture
def record(tiny_msgc_config):
    textures = synth_generate(5, 2, classes=4, size=8)
    return dynamics.collect_gating(build_msgc(tiny_msgc_config), textures, batch_size=4)


@pytest.fixture
def training_log():
    return pd.DataFrame({
        "epoch": [0, 1, 2],
        "tau": [1.0, 0.75, 0.5],
        "train_mac_ratio": [1.0, 0.8, 0.55],
        "val_mac_ratio": [1.0, 0.82, np.nan],
        "val_accuracy": [0.25, 0.5, np.nan],
    })


def _frames(record):
    return [
        (plots.plot_group_curves, dynamics.group_frame(record)),
        (plots.plot_pyramid, dynamics.pyramid_frame(record)),
        (plots.plot_layers, dynamics.layer_frame(record)),
        (plots.plot_histogram, dynamics.histogram_frame(record.result)),
        (plots.plot_attention, dynamics.attention_frame(record)),
    ]


def test_every_figure_is_written_as_svg(record, training_log, tmp_path):
    pytest.importorskip("matplotlib")
    pytest.importorskip("seaborn")
    figures = _frames(record) + [(plots.plot_training_log, training_log)]
    for n, (plotter, frame) in enumerate(figures):
        path = plotter(frame, tmp_path / f"figure{n}.svg")
        assert path == tmp_path / f"figure{n}.svg"
        assert "<svg" in path.read_text()


def test_missing_plotting_libraries_skip_with_notice(record, training_log, tmp_path,
                                                      monkeypatch, capsys):
    monkeypatch.setattr(plots, "HAS_PLOTTING", False)
    figures = _frames(record) + [(plots.plot_training_log, training_log)]
    for plotter, frame in figures:
        assert plotter(frame, tmp_path / "skipped.svg") is None
    assert not (tmp_path / "skipped.svg").exists()
    assert capsys.readouterr().out.count("skipping skipped.svg") == len(figures)
