"""``snnwhiten`` command line.

Stages mirror the pipeline so that fitted whitening kernels can be reused
across datasets without refitting::

    snnwhiten whiten-fit      --config exp.cfg --out kernels.bin
    snnwhiten train           --config exp.cfg --preproc kernels.bin --out layer.bin --seed 0
    snnwhiten extract         --config exp.cfg --preproc kernels.bin --layer layer.bin --split train --out train.feat
    snnwhiten classify        --config exp.cfg --train train.feat --test test.feat
    snnwhiten run             --config exp.cfg
    snnwhiten cross-dataset   --config-a cifar.cfg --config-b stl.cfg
    snnwhiten export-filters  --layer layer.bin --out filters.png
    snnwhiten default-config
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .classify import load_features, save_features
from .config import ExperimentConfig, dump_config, load_config
from .containers import peek_kind
from .datasets import export_image_grid
from .errors import (ConfigError, ContractError, ConvergenceError, DataError, FormatError, ShapeError,
                     SnnWhitenError)
from .snn import load_layer, save_layer
from .whitening import (DogConfig, WhiteningKernels, WhiteningTransform, load_preprocessor,
                        retained_count, save_dog, save_kernels, save_transform)

log = logging.getLogger("snnwhiten")

EXIT_CODES = {
    ConfigError: 3,
    FormatError: 4,
    ShapeError: 5,
    ContractError: 5,
    DataError: 5,
    ConvergenceError: 6,
}
EXIT_IO = 7
EXIT_OTHER = 1


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_OTHER


def save_preprocessor(path, pre):
    if isinstance(pre, WhiteningTransform):
        return save_transform(path, pre)
    if isinstance(pre, WhiteningKernels):
        return save_kernels(path, pre)
    if isinstance(pre, DogConfig):
        return save_dog(path, pre)
    raise TypeError(type(pre).__name__)


def _fit_summary(pre) -> str:
    if isinstance(pre, DogConfig):
        return (f"dog mode={pre.mode} kernel={pre.kernel_size} "
                f"sigma_center={pre.sigma_center} sigma_surround={pre.sigma_surround}")
    head = ", ".join(f"{v:.4g}" for v in pre.eigvals[:5])
    if isinstance(pre, WhiteningKernels):
        dim = pre.patch_w * pre.patch_h * pre.channels
        kind = f"kernels {pre.patch_w}x{pre.patch_h}x{pre.channels}"
    else:
        dim = pre.dim
        kind = f"zca dim={dim}"
    return (f"{kind} epsilon={pre.epsilon} ratio={pre.ratio} "
            f"retained={retained_count(pre.ratio, dim)}/{dim} spectrum_head=[{head}]")


# -- commands ----------------------------------------------------------------------

def cmd_whiten_fit(args) -> int:
    cfg = load_config(args.config)
    train_set, _ = pipeline.load_split(cfg, args.dataset)
    pre = pipeline.fit_preprocessor(cfg, train_set)
    save_preprocessor(args.out, pre)
    print(_fit_summary(pre))
    return 0


def _spike_ready(cfg: ExperimentConfig, preproc_path, split: str, dataset: str | None):
    pre = load_preprocessor(preproc_path)
    train_set, test_set = pipeline.load_split(cfg, dataset)
    chosen = train_set if split == "train" else test_set
    return pipeline.preprocess(pre, chosen.images), chosen


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    ready, _ = _spike_ready(cfg, args.preproc, "train", args.dataset)
    seed = cfg.run.seed if args.seed is None else args.seed
    rows = []

    def report(entry):
        row = entry.row()
        rows.append(row)
        print("\t".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()),
              flush=True)

    layer, _ = pipeline.train_layer(cfg, ready, seed, callback=report)
    save_layer(args.out, layer)
    if args.log:
        keys = list(rows[0]) if rows else []
        lines = ["\t".join(keys)] + ["\t".join(str(r[k]) for k in keys) for r in rows]
        Path(args.log).write_text("\n".join(lines) + "\n")
    return 0


def cmd_extract(args) -> int:
    cfg = load_config(args.config)
    ready, chosen = _spike_ready(cfg, args.preproc, args.split, args.dataset)
    layer = load_layer(args.layer)
    feats = pipeline.extract_features(layer, ready, cfg)
    save_features(args.out, feats, chosen.labels)
    print(f"wrote {feats.shape[0]} feature vectors of length {feats.shape[1]} to {args.out}")
    return 0


def format_report(accuracies, label: str = "accuracy") -> list[str]:
    lines = [f"run={i}\t{label}={a * 100:.2f}" for i, a in enumerate(accuracies)]
    mean, std = pipeline.mean_std(accuracies)
    lines.append(f"summary\truns={len(accuracies)}\tmean={mean * 100:.2f}\tstd={std * 100:.2f}")
    return lines


def cmd_classify(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if len(args.train) != len(args.test):
        raise ConfigError("--train and --test need the same number of feature files (one pair per run)")
    accs = []
    for i, (tr, te) in enumerate(zip(args.train, args.test)):
        tx, ty = load_features(tr)
        vx, vy = load_features(te)
        if (ty < 0).any() or (vy < 0).any():
            raise DataError("feature files must carry labels for classification")
        class_count = int(max(ty.max(), vy.max())) + 1
        accs.append(pipeline.classify_features(cfg, tx, ty, vx, vy, cfg.run.seed + i, class_count))
    for line in format_report(accs):
        print(line)
    if args.summary:
        mean, std = pipeline.mean_std(accs)
        Path(args.summary).write_text(json.dumps(
            {"runs": len(accs), "accuracies": accs, "mean": mean, "std": std}, indent=2) + "\n")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    train_set, test_set = pipeline.load_split(cfg)
    results = pipeline.run_experiment(cfg, train_set, test_set)
    accs = [r.accuracy for r in results]
    for line in format_report(accs):
        print(line)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            save_layer(out / f"layer_seed{r.seed}.bin", r.layer)
        mean, std = pipeline.mean_std(accs)
        (out / "summary.json").write_text(json.dumps(
            {"preproc": cfg.whitening.preproc, "seeds": [r.seed for r in results],
             "accuracies": accs, "mean": mean, "std": std}, indent=2) + "\n")
    return 0


def cross_dataset(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig) -> dict:
    """2x2 matrix of (classification dataset, kernel dataset) accuracies.

    ``delta`` for each classification dataset is cross-kernel minus
    same-kernel accuracy, in percentage points.
    """
    name_a, name_b = cfg_a.data.dataset, cfg_b.data.dataset
    sets = {name_a: pipeline.load_split(cfg_a), name_b: pipeline.load_split(cfg_b)}
    cfgs = {name_a: cfg_a, name_b: cfg_b}
    kernels = {name: pipeline.fit_preprocessor(cfgs[name], sets[name][0]) for name in (name_a, name_b)}
    table = {}
    for target, other in ((name_a, name_b), (name_b, name_a)):
        row = {}
        for source in (target, other):
            results = pipeline.run_experiment(cfgs[target], *sets[target], pre=kernels[source])
            row[source] = [r.accuracy for r in results]
        same, cross = pipeline.mean_std(row[target])[0], pipeline.mean_std(row[other])[0]
        table[target] = {"same": row[target], "cross": row[other], "kernel_source_cross": other,
                         "delta_pp": (cross - same) * 100}
    return table


def cmd_cross_dataset(args) -> int:
    cfg_a, cfg_b = load_config(args.config_a), load_config(args.config_b)
    for cfg in (cfg_a, cfg_b):
        if cfg.whitening.preproc != "kernels":
            raise ConfigError("cross-dataset runs use whitening.preproc = kernels")
    if cfg_a.data.dataset == cfg_b.data.dataset:
        raise ConfigError("cross-dataset needs two different datasets")
    table = cross_dataset(cfg_a, cfg_b)
    print("classify\tkernels_same\tkernels_cross\tdelta_pp")
    for target, row in table.items():
        sm, ss = pipeline.mean_std(row["same"])
        cm, cs = pipeline.mean_std(row["cross"])
        print(f"{target}\t{sm * 100:.2f}+-{ss * 100:.2f}\t{cm * 100:.2f}+-{cs * 100:.2f}"
              f"\t{row['delta_pp']:+.2f}")
    if args.summary:
        Path(args.summary).write_text(json.dumps(table, indent=2) + "\n")
    return 0


def filter_tiles(layer) -> list[np.ndarray]:
    """Signed filters (positive minus negative input channels) as image tiles."""
    return list(pipeline.signed_filters(layer))


def cmd_export_filters(args) -> int:
    layer = load_layer(args.layer)
    tiles = filter_tiles(layer)
    if tiles[0].shape[2] not in (1, 3):
        raise ShapeError(f"cannot render filters with {tiles[0].shape[2]} signed channels")
    export_image_grid(tiles, args.out)
    print(f"wrote {len(tiles)} filters to {args.out}")
    return 0


def cmd_default_config(args) -> int:
    sys.stdout.write(dump_config(ExperimentConfig()))
    return 0


def cmd_inspect(args) -> int:
    print(peek_kind(args.path))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snnwhiten", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("whiten-fit", help="fit standard ZCA, whitening kernels or DoG settings")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dataset", help="override data.dataset")
    s.set_defaults(func=cmd_whiten_fit)

    s = sub.add_parser("train", help="train the SNN layer with STDP")
    s.add_argument("--config", required=True)
    s.add_argument("--preproc", required=True, help="file written by whiten-fit")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--log", help="tab-separated per-epoch log")
    s.add_argument("--dataset")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("extract", help="pooled SNN features for one split")
    s.add_argument("--config", required=True)
    s.add_argument("--preproc", required=True)
    s.add_argument("--layer", required=True)
    s.add_argument("--split", choices=("train", "test"), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dataset")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("classify", help="linear SVM on feature files, one train/test pair per run")
    s.add_argument("--config")
    s.add_argument("--train", nargs="+", required=True)
    s.add_argument("--test", nargs="+", required=True)
    s.add_argument("--summary", help="JSON summary path")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("run", help="whole pipeline for run.run_count seeds")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("cross-dataset", help="kernels fitted on one dataset, used on the other")
    s.add_argument("--config-a", required=True)
    s.add_argument("--config-b", required=True)
    s.add_argument("--summary")
    s.set_defaults(func=cmd_cross_dataset)

    s = sub.add_parser("export-filters", help="render learned filters as a PNG grid")
    s.add_argument("--layer", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_filters)

    s = sub.add_parser("default-config", help="print the default configuration")
    s.set_defaults(func=cmd_default_config)

    s = sub.add_parser("inspect", help="print the kind of a container file")
    s.add_argument("path")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SnnWhitenError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
