"""Train one layer per front end and write its filters as a PNG grid.

Each tile shows a filter's positive minus negative input channels, so whitened
front ends show colour and edge detectors directly.

    python scripts/export_filters.py --cifar10-dir ... --out-dir figures/
"""

import argparse
import logging
from pathlib import Path

from snnwhiten import pipeline
from snnwhiten.cli import filter_tiles
from snnwhiten.config import ExperimentConfig
from snnwhiten.datasets import export_image_grid
from snnwhiten.snn import save_layer


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cifar10-dir", required=True)
    parser.add_argument("--out-dir", type=Path, default=Path("figures"))
    parser.add_argument("--preprocs", nargs="+", default=["kernels", "dog-color"])
    parser.add_argument("--train-limit", type=int, default=5000)
    parser.add_argument("--filters", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")
    args.out_dir.mkdir(parents=True, exist_ok=True)

    for preproc in args.preprocs:
        cfg = ExperimentConfig()
        cfg.data.cifar10_dir, cfg.data.train_limit = args.cifar10_dir, args.train_limit
        cfg.whitening.preproc = preproc
        cfg.network.filter_count, cfg.training.epochs = args.filters, args.epochs
        cfg.validate()
        train_set, _ = pipeline.load_split(cfg)
        pre = pipeline.fit_preprocessor(cfg, train_set)
        layer, _ = pipeline.train_layer(cfg, pipeline.preprocess(pre, train_set.images), args.seed)
        save_layer(args.out_dir / f"layer_{preproc}.bin", layer)
        path = export_image_grid(filter_tiles(layer), args.out_dir / f"filters_{preproc}.png")
        print(f"{preproc}: {path}")


if __name__ == "__main__":
    main()
