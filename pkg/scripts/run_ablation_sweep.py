#!/usr/bin/env python3
"""Five-run ablation sweep: the full model plus each single-input ablation.

Trains five experiments (full, no_vsg, no_tsg, no_image, no_text) on one
dataset and writes one run directory per variant, so the sweep emits five
full metrics reports. Prints a final-accuracy summary table.

Example:
    python3 scripts/run_ablation_sweep.py --dataset corpus/manifest.jsonl \
        --out runs/ablation --epochs 7 --seed 2
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sgmm.experiment import (model_config_to_doc, parse_experiment_config,
                             run_experiment, train_config_to_doc)
from sgmm.model import desk_model_config, desk_train_config

VARIANTS = ((), ("no_vsg",), ("no_tsg",), ("no_image",), ("no_text",))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", required=True, help="manifest.jsonl path")
    parser.add_argument("--out", required=True, help="sweep output directory")
    parser.add_argument("--model-config",
                        help="JSON file with a model section (default: desk preset)")
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
    for ablations in VARIANTS:
        name = "+".join(ablations) or "full"
        doc = {
            "dataset": str(Path(args.dataset).resolve()),
            "output_dir": name,
            "model": model_doc,
            "train": {**train_doc, "ablations": list(ablations)},
        }
        metrics = run_experiment(parse_experiment_config(doc, out))
        test = metrics["test"]
        rows.append((name, metrics["train"]["accuracy"],
                     None if test is None else test["accuracy"]))
    width = max(len(name) for name, *_ in rows)
    print(f"{'variant':{width}}  train_acc  test_acc")
    for name, train_acc, test_acc in rows:
        shown = "-" if test_acc is None else f"{test_acc:.4f}"
        print(f"{name:{width}}  {train_acc:9.4f}  {shown:>8}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
