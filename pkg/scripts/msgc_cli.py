#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MSGC command-line interface

Trains, evaluates, verifies and analyses networks with middle spectrum
grouped convolution on the desk-scale synthetic texture task.

Usage:
    python scripts/msgc_cli.py synth --seed 0 --out data/train.msgd
    python scripts/msgc_cli.py train --config runs/default.cfg
    python scripts/msgc_cli.py eval --ckpt runs/model.ckpt --data data/val.msgd
    python scripts/msgc_cli.py macs --config runs/default.cfg
    python scripts/msgc_cli.py gradcheck --config runs/default.cfg --seed 0
    python scripts/msgc_cli.py analyze --ckpt runs/model.ckpt --data data/val.msgd \
        --which group --out runs/analysis

Failures print one line ``error category=<category> message=<text>`` on
stderr and exit with the category's code. MSGC_THREADS caps BLAS threads.
"""

import os
import sys
from pathlib import Path

# Thread caps must be exported before numpy is first imported
_THREADS = os.environ.get("MSGC_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _THREADS

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import argparse  # noqa: E402

import pandas as pd  # noqa: E402

from analysis.dynamics import collect_gating  # noqa: E402
from analysis.report import ANALYSES, write_analysis  # noqa: E402
from backbones.msgc_net import MsgcNet  # noqa: E402
from core.config import EXIT_CODES, SYNTH_PARAMS  # noqa: E402
from core.errors import CheckpointMismatchError, MsgcError  # noqa: E402
from data_io.checkpoint import load_checkpoint, load_checkpoint_config, load_into  # noqa: E402
from data_io.dataset import load_dataset  # noqa: E402
from data_io.run_config import parse_config  # noqa: E402
from data_io.synth import synth_generate  # noqa: E402
from training.trainer import (  # noqa: E402
    build_network, evaluate, numpy_dtype, train_from_config,
)
from training.verification import miniature_config, run_gradcheck  # noqa: E402
from visualization.plots import plot_training_log  # noqa: E402


def load_trained(ckpt: Path, seed=None):
    """Rebuild a network from its sidecar config and load the checkpoint."""
    config = load_checkpoint_config(ckpt, verbose=False)
    network = build_network(config, seed)
    load_into(network, load_checkpoint(ckpt))
    return network, config


def load_matching_dataset(path: Path, config: dict):
    dataset = load_dataset(path, numpy_dtype(config))
    expected = (config["in_channels"], config["input_size"], config["input_size"])
    if dataset.image_shape != expected:
        raise CheckpointMismatchError(
            f"dataset images are {dataset.image_shape}, network expects {expected}")
    if dataset.num_classes > config["num_classes"]:
        raise CheckpointMismatchError(
            f"dataset has {dataset.num_classes} classes, network has {config['num_classes']}")
    return dataset


def cmd_train(args) -> int:
    config = parse_config(args.config)
    train = load_dataset(config["data"], verbose=True)
    val = None
    if Path(config["val_data"]).exists():
        val = load_dataset(config["val_data"], verbose=True)
    else:
        print(f"[train] notice: validation set {config['val_data']} not found, skipping validation")
    trainer = train_from_config(config, train, val)
    frame = pd.DataFrame(trainer.history)
    plot_training_log(frame, Path(config["log"]).with_suffix(".svg"))
    print(f"[train] checkpoint: {config['output']}")
    print(f"[train] log: {config['log']}")
    return 0


def cmd_eval(args) -> int:
    network, config = load_trained(Path(args.ckpt))
    dataset = load_matching_dataset(Path(args.data), config)
    result = evaluate(network, dataset, config["batch_size"], force_ones=args.force_ones)
    print(f"[eval] samples={len(dataset)} accuracy={result.accuracy:.6f} "
          f"mac_ratio={result.mean_mac_ratio:.6f}")
    return 0


def cmd_macs(args) -> int:
    if args.ckpt:
        network, _ = load_trained(Path(args.ckpt))
    else:
        network = build_network(parse_config(args.config, verbose=False))
    rows = network.mac_table()
    m_ori = network.original_macs()
    overhead = network.mlp_overhead() if isinstance(network, MsgcNet) else 0

    print(f"\n{'='*60}")
    print(f"[macs] {'layer':<24} {'MACs':>14}")
    for name, macs in rows:
        print(f"[macs] {name:<24} {macs:>14d}")
    print(f"[macs] {'total (M_ori)':<24} {m_ori:>14d}")
    print(f"[macs] {'mlp overhead':<24} {overhead:>14d}  ({overhead / m_ori:.4%} of M_ori)")
    print(f"{'='*60}")

    if args.out:
        frame = pd.DataFrame(rows + [("total", m_ori), ("mlp_overhead", overhead)],
                             columns=["layer", "macs"])
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, index=False)
        print(f"[macs] wrote {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    config = parse_config(args.config, verbose=False)
    mini = miniature_config(config["groups"], config["attention_layers"], config["reduction"],
                            config["gumbel_temperature"])
    worst = run_gradcheck(args.seed, config["gradcheck_trials"], mini)
    print(f"[gradcheck] pass: max relative error {max(worst.values()):.3e}")
    return 0


def cmd_analyze(args) -> int:
    network, config = load_trained(Path(args.ckpt), args.seed)
    dataset = load_matching_dataset(Path(args.data), config)
    record = collect_gating(network, dataset, config["batch_size"])
    write_analysis(record, args.which, Path(args.out))
    return 0


def cmd_synth(args) -> int:
    synth_generate(args.seed, args.n_per_class, args.classes, args.noise, args.size,
                   out=Path(args.out), verbose=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Middle spectrum grouped convolution: train, evaluate, verify, analyse"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train a network from a RunConfig file")
    p.add_argument("--config", required=True, help="RunConfig file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Accuracy and mean MAC ratio of a checkpoint")
    p.add_argument("--ckpt", required=True, help="Checkpoint file (with <ckpt>.cfg next to it)")
    p.add_argument("--data", required=True, help="Dataset file")
    p.add_argument("--force-ones", action="store_true",
                   help="Run every gated layer unmasked (ratio 1.0)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("macs", help="Per-layer MAC table and MLP overhead")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="RunConfig file")
    source.add_argument("--ckpt", help="Checkpoint file")
    p.add_argument("--out", help="Optional CSV output")
    p.set_defaults(func=cmd_macs)

    p = sub.add_parser("gradcheck", help="Finite-difference verification of all gradients")
    p.add_argument("--config", required=True, help="RunConfig file")
    p.add_argument("--seed", type=int, default=0, help="First seed (default: 0)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze", help="Gating analysis tables (CSV + SVG)")
    p.add_argument("--ckpt", required=True, help="Checkpoint file")
    p.add_argument("--data", required=True, help="Dataset file")
    p.add_argument("--which", required=True, choices=ANALYSES)
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="Seed for rebuilding the network before loading (default: config seed)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="Generate the synthetic texture dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="Dataset file")
    p.add_argument("--n-per-class", type=int, default=100,
                   help="Samples per class (default: 100)")
    p.add_argument("--classes", type=int, default=SYNTH_PARAMS["classes"])
    p.add_argument("--noise", type=float, default=SYNTH_PARAMS["noise"])
    p.add_argument("--size", type=int, default=SYNTH_PARAMS["size"])
    p.set_defaults(func=cmd_synth)
    return parser


def report_error(category: str, message) -> None:
    text = " ".join(str(message).split())
    print(f"error category={category} message={text}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MsgcError as exc:
        report_error(exc.category, exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        report_error("io", exc)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
