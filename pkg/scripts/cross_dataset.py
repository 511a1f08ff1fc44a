"""Whitening kernels fitted on one dataset, used to classify the other.

Prints the 2x2 matrix of (classification dataset, kernel source) accuracies
with delta = cross-kernel minus same-kernel accuracy in percentage points.

    python scripts/cross_dataset.py --cifar10-dir ... --stl10-dir ... --train-limit 5000
"""

import argparse
import json
import logging

from snnwhiten import pipeline
from snnwhiten.cli import cross_dataset
from snnwhiten.config import ExperimentConfig


def config_for(dataset: str, args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.data.dataset = dataset
    cfg.data.cifar10_dir, cfg.data.stl10_dir = args.cifar10_dir, args.stl10_dir
    cfg.data.train_limit, cfg.data.test_limit = args.train_limit, args.test_limit
    cfg.network.filter_count = args.filters
    cfg.training.epochs = args.epochs
    cfg.run.run_count = args.runs
    return cfg.validate()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cifar10-dir", required=True)
    parser.add_argument("--stl10-dir", required=True)
    parser.add_argument("--train-limit", type=int)
    parser.add_argument("--test-limit", type=int)
    parser.add_argument("--filters", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--out", help="optional JSON summary")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")

    table = cross_dataset(config_for("cifar10", args), config_for("stl10", args))
    print(f"{'classify':<10}{'same %':>9}{'cross %':>9}{'delta pp':>10}")
    for target, row in table.items():
        same, cross = pipeline.mean_std(row["same"])[0], pipeline.mean_std(row["cross"])[0]
        print(f"{target:<10}{same * 100:>9.2f}{cross * 100:>9.2f}{row['delta_pp']:>+10.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(table, fh, indent=2)


if __name__ == "__main__":
    main()
