#!/usr/bin/env python3
"""Similarity-threshold sweep for the merged-graph model variant.

Trains one experiment per threshold with the similarity-merge fusion
(cmsg3), writing one run directory — and therefore one metrics report —
per threshold. Prints a final-accuracy summary table.

Example:
    python3 scripts/run_cmsg_sweep.py --dataset corpus/manifest.jsonl \
        --out runs/cmsg --epochs 10
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sgmm.experiment import (model_config_to_doc, parse_experiment_config,
                             run_experiment, train_config_to_doc)
from sgmm.model import desk_model_config, desk_train_config

DEFAULT_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", required=True, help="manifest.jsonl path")
    parser.add_argument("--out", required=True, help="sweep output directory")
    parser.add_argument("--thresholds", type=float, nargs="+",
                        default=list(DEFAULT_THRESHOLDS))
    parser.add_argument("--model-config",
                        help="JSON file with a model section (default: desk preset); "
                             "fusion/threshold fields are overridden per run")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    model_doc = (json.loads(Path(args.model_config).read_text(encoding="utf-8"))
                 if args.model_config else model_config_to_doc(desk_model_config()))
    train_doc = train_config_to_doc(desk_train_config())
    for key in ("epochs", "seed", "batch_size", "lr"):
        value = getattr(args, key)
        if value is not None:
            train_doc[key] = value
    out = Path(args.out)
    rows = []
    for threshold in args.thresholds:
        doc = {
            "dataset": str(Path(args.dataset).resolve()),
            "output_dir": f"th-{threshold:g}",
            "model": {**model_doc, "fusion": "cmsg3",
                      "cmsg_threshold": threshold},
            "train": train_doc,
        }
        metrics = run_experiment(parse_experiment_config(doc, out))
        test = metrics["test"]
        rows.append((threshold, metrics["train"]["accuracy"],
                     None if test is None else test["accuracy"]))
    print("threshold  train_acc  test_acc")
    for threshold, train_acc, test_acc in rows:
        shown = "-" if test_acc is None else f"{test_acc:.4f}"
        print(f"{threshold:9g}  {train_acc:9.4f}  {shown:>8}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
