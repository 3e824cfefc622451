"""
Analysis reports: CSV tables (and SVG figures) for one evaluation pass.
"""

from pathlib import Path
from typing import List

import pandas as pd

from analysis import dynamics
from core.config import ANALYSIS_PARAMS
from core.errors import AnalysisError
from visualization import plots

ANALYSES = ("group", "layer", "sample", "attention")


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=ANALYSIS_PARAMS["float_format"])
    return path


def write_analysis(record: dynamics.GatingRecord, which: str, out_dir: Path,
                   with_plots: bool = True) -> List[Path]:
    """
    Write the tables of one analysis dimension.

    Args:
        record: masks and predictions of the evaluation pass
        which: "group", "layer", "sample" or "attention"
        out_dir: output directory (created if missing)
        with_plots: also render SVG figures next to the CSVs

    Returns:
        Paths of the written CSV files
    """
    if which not in ANALYSES:
        raise AnalysisError(f"unknown analysis '{which}', expected one of {ANALYSES}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if which == "group":
        tables = [("group", dynamics.group_frame(record), plots.plot_group_curves),
                  ("pyramid", dynamics.pyramid_frame(record), plots.plot_pyramid)]
    elif which == "layer":
        tables = [("layer", dynamics.layer_frame(record), plots.plot_layers)]
    elif which == "sample":
        tables = [("sample", dynamics.sample_frame(record.result), None),
                  ("histogram", dynamics.histogram_frame(record.result), plots.plot_histogram),
                  ("exemplars", dynamics.exemplar_frame(record.result), None)]
    else:
        tables = [("attention", dynamics.attention_frame(record), plots.plot_attention)]

    written = []
    for name, frame, plotter in tables:
        written.append(write_table(frame, out_dir / f"{name}.csv"))
        if with_plots and plotter is not None:
            plotter(frame, out_dir / f"{name}.svg")
    print_summary(record, which, written)
    return written


def print_summary(record: dynamics.GatingRecord, which: str, written: List[Path]) -> None:
    result = record.result
    print(f"\n{'='*60}")
    print(f"[analyze] {which}: {record.num_samples} samples, accuracy {result.accuracy:.4f}, "
          f"mean MAC ratio {result.mean_mac_ratio:.4f}")
    if which == "sample":
        spread = dynamics.mac_dynamism(result)
        print(f"[analyze] MAC std {spread['mac_std']:.1f}; mean MACs correct "
              f"{spread['mean_macs_correct']}, misclassified {spread['mean_macs_wrong']}")
    for path in written:
        print(f"[analyze] wrote {path}")
    print(f"{'='*60}")
