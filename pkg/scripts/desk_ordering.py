"""Desk-scale comparison of the three pre-processing front ends on CIFAR-10.

Trains 64-filter layers for 5 epochs on the first 5000 training images and
tests on the first 2000 test images, three seeds per front end.

    python scripts/desk_ordering.py --cifar10-dir ~/data/cifar-10-batches-bin --out desk.json
"""

import argparse
import json
import logging
import time

from snnwhiten import pipeline
from snnwhiten.config import ExperimentConfig

PREPROCS = ("kernels", "standard-zca", "dog-color", "dog-gray")


def desk_config(preproc: str, args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.data.cifar10_dir = args.cifar10_dir
    cfg.data.train_limit, cfg.data.test_limit = args.train_limit, args.test_limit
    cfg.whitening.preproc = preproc
    cfg.network.filter_count = args.filters
    cfg.training.epochs = args.epochs
    cfg.run.run_count = args.runs
    return cfg.validate()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cifar10-dir", required=True)
    parser.add_argument("--preprocs", nargs="+", default=list(PREPROCS), choices=PREPROCS)
    parser.add_argument("--train-limit", type=int, default=5000)
    parser.add_argument("--test-limit", type=int, default=2000)
    parser.add_argument("--filters", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--out", help="optional JSON summary")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")

    summary = {}
    for preproc in args.preprocs:
        cfg = desk_config(preproc, args)
        start = time.perf_counter()
        results = pipeline.run_experiment(cfg, *pipeline.load_split(cfg))
        accs = [r.accuracy for r in results]
        mean, std = pipeline.mean_std(accs)
        summary[preproc] = {"accuracies": accs, "mean": mean, "std": std, "seconds": time.perf_counter() - start}

    print(f"{'preproc':<14}{'mean %':>8}{'std':>7}{'min':>7}")
    for preproc, row in sorted(summary.items(), key=lambda kv: -kv[1]["mean"]):
        print(f"{preproc:<14}{row['mean'] * 100:>8.2f}{row['std'] * 100:>7.2f}{row['seconds'] / 60:>7.1f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=2)


if __name__ == "__main__":
    main()
