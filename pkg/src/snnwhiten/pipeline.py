"""End-to-end stages: pre-processing -> SNN features -> pooling -> SVM.

The CLI and the experiment scripts are thin wrappers around these functions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .classify import evaluate, select_and_train, sum_pool
from .config import ExperimentConfig
from .datasets import LabeledImageSet, load_dataset, sample_patches
from .errors import ShapeError
from .snn import SnnLayer, init_layer, infer_conv, train
from .spike_coding import split_images
from .whitening import (DogConfig, WhiteningKernels, WhiteningTransform, dog_encode, fit_kernels,
                        fit_zca, kernel_images, zca_images)

log = logging.getLogger(__name__)


def load_split(cfg: ExperimentConfig, dataset: str | None = None) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Train/test sets of ``dataset`` truncated to the configured limits."""
    name = dataset or cfg.data.dataset
    train_set, test_set = load_dataset(name, cfg.dataset_dir(name), bool(cfg.data.strict_format))
    return train_set.head(cfg.data.train_limit), test_set.head(cfg.data.test_limit)


def fit_preprocessor(cfg: ExperimentConfig, train_set: LabeledImageSet):
    """Whitening transform, whitening kernels or DoG settings for ``cfg.whitening.preproc``."""
    w = cfg.whitening
    if w.preproc == "standard-zca":
        flat = train_set.images.reshape(len(train_set), -1)
        return fit_zca(flat, w.epsilon, w.ratio, sample_shape=train_set.image_shape)
    if w.preproc == "kernels":
        patches = sample_patches(train_set, w.patch_w, w.patch_h, w.patch_stride, w.patch_count, cfg.run.seed)
        log.info("fitting %dx%d kernels on %d patches", w.patch_w, w.patch_h, len(patches.patches))
        return fit_kernels(patches, w.epsilon, w.ratio)
    return cfg.dog_config()


def preprocess(pre, images: np.ndarray) -> np.ndarray:
    """Spike-ready ``(n, H, W, C')`` float32 images in [0, 1].

    Whitened images are split into positive/negative channels per image;
    DoG output already is an on/off pair.
    """
    images = np.asarray(images)
    if isinstance(pre, WhiteningTransform):
        return split_images(zca_images(pre, images))
    if isinstance(pre, WhiteningKernels):
        return split_images(kernel_images(pre, images))
    if isinstance(pre, DogConfig):
        return np.stack([dog_encode(img, pre) for img in images]).astype(np.float32)
    raise TypeError(f"unsupported pre-processor {type(pre).__name__}")


def spike_channels(pre, image_channels: int) -> int:
    if isinstance(pre, DogConfig) and pre.mode == "grayscale":
        return 2
    return 2 * image_channels


def train_layer(cfg: ExperimentConfig, spike_ready: np.ndarray, seed: int, callback=None) -> tuple[SnnLayer, list]:
    net = cfg.network
    layer = init_layer(net.filter_count, net.filter_w, net.filter_h, spike_ready.shape[3], seed,
                       cfg.neuron_config(), cfg.stdp_config())
    logs = train(layer, spike_ready, cfg.train_config(seed), cfg.homeostasis_config(), cfg.encoder(),
                 callback=callback)
    return layer, logs


def extract_features(layer: SnnLayer, spike_ready: np.ndarray, cfg: ExperimentConfig) -> np.ndarray:
    """Pooled feature vector ``(n, 4 * filter_count)`` per image, in input order."""
    if spike_ready.shape[3] != layer.channels:
        raise ShapeError(f"layer expects {layer.channels} input channels, images have {spike_ready.shape[3]}")
    homeo, enc = cfg.homeostasis_config(), cfg.encoder()
    out = np.empty((len(spike_ready), 4 * layer.filter_count))
    for i, img in enumerate(spike_ready):
        out[i] = sum_pool(infer_conv(layer, img, homeo, enc), cfg.classify.pool)
    return out


def classify_features(cfg: ExperimentConfig, train_x, train_y, test_x, test_y, seed: int,
                      class_count: int = 10) -> float:
    model = select_and_train(train_x, train_y, class_count, cfg.reg_grid(), cfg.classify.svm_epochs, seed)
    return evaluate(model, test_x, test_y)


@dataclass
class RunResult:
    seed: int
    accuracy: float
    layer: SnnLayer
    logs: list


def run_experiment(cfg: ExperimentConfig, train_set: LabeledImageSet, test_set: LabeledImageSet,
                   pre=None, seeds=None) -> list[RunResult]:
    """Full pipeline for each seed; ``pre`` is fitted on ``train_set`` when omitted.

    Passing a ``pre`` fitted on another dataset gives the cross-dataset setting.
    """
    if pre is None:
        pre = fit_preprocessor(cfg, train_set)
    seeds = list(range(cfg.run.seed, cfg.run.seed + cfg.run.run_count)) if seeds is None else list(seeds)
    train_ready = preprocess(pre, train_set.images)
    test_ready = preprocess(pre, test_set.images)
    results = []
    for seed in seeds:
        layer, logs = train_layer(cfg, train_ready, seed)
        train_x = extract_features(layer, train_ready, cfg)
        test_x = extract_features(layer, test_ready, cfg)
        acc = classify_features(cfg, train_x, train_set.labels, test_x, test_set.labels, seed,
                                train_set.class_count)
        log.info("seed %d: accuracy %.4f", seed, acc)
        results.append(RunResult(seed, acc, layer, logs))
    return results


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1 divisor; 0 for a single run)."""
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0


def signed_filters(layer: SnnLayer) -> np.ndarray:
    """Recombine positive/negative input channels: ``(N, p_h, p_w, channels // 2)``."""
    f = layer.filters()
    half = layer.channels // 2
    return f[..., :half] - f[..., half:]
