"""Feature aggregation (quadrant sum pooling) and a one-vs-rest linear SVM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .containers import read_container, write_container
from .errors import DataError, FormatError, ShapeError

REG_GRID = (0.01, 0.1, 1.0)


def _quadrant_bounds(size: int) -> tuple[slice, slice]:
    # odd sizes give the extra row/column to the bottom/right quadrant
    half = size // 2
    return slice(0, half), slice(half, size)


def sum_pool(feature_map: np.ndarray, mode: str = "sum") -> np.ndarray:
    """Pool an ``(H', W', N)`` map over a 2x2 grid of quadrants.

    Output is region-major (top-left, top-right, bottom-left, bottom-right),
    then filter: ``4 * N`` values. ``mode="max"`` takes the maximum instead.
    """
    m = np.asarray(feature_map)
    if m.ndim != 3 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ShapeError(f"feature map must be (H>=2, W>=2, N), got {m.shape}")
    reduce = {"sum": np.sum, "max": np.max}[mode]
    rows, cols = _quadrant_bounds(m.shape[0]), _quadrant_bounds(m.shape[1])
    return np.concatenate([reduce(m[r, c], axis=(0, 1)) for r in rows for c in cols])


@dataclass(frozen=True)
class LinearSvm:
    weights: np.ndarray  # (class_count, d)
    biases: np.ndarray   # (class_count,)
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    reg_c: float

    @property
    def class_count(self) -> int:
        return len(self.biases)

    def scores(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.weights.shape[1]:
            raise ShapeError(f"feature length {x.shape[1]} != model dimension {self.weights.shape[1]}")
        z = (x - self.scaler_mean) / self.scaler_std
        return z @ self.weights.T + self.biases


def fit_scaler(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 1.0
    return mean, std


def _canonical_order(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # Sample order is normalised before the seeded shuffle so the result does
    # not depend on how the caller ordered the training set.
    keys = np.column_stack([labels, features])
    return np.lexsort(keys.T[::-1])


def svm_train(features: np.ndarray, labels: np.ndarray, class_count: int, reg_c: float = 0.1,
              epochs: int = 10, seed: int = 0) -> LinearSvm:
    """One-vs-rest hinge loss, stochastic subgradient steps of size ``1 / (reg_c * t)``.

    Features are standardised first. ``reg_c`` is the L2 strength on the
    weights (biases are not regularised).
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if class_count < 2:
        raise DataError("a classifier needs at least 2 classes")
    if x.ndim != 2 or len(x) != len(y):
        raise ShapeError("features must be (n, d) with one label per row")
    missing = sorted(set(range(class_count)) - set(np.unique(y).tolist()))
    if missing:
        raise DataError(f"no training samples for classes {missing}")
    if y.min() < 0 or y.max() >= class_count:
        raise DataError("label outside [0, class_count)")
    if reg_c <= 0 or epochs < 1:
        raise DataError("reg_c must be > 0 and epochs >= 1")

    mean, std = fit_scaler(x)
    order = _canonical_order(x, y)
    z = ((x - mean) / std)[order]
    targets = np.where(y[order][:, None] == np.arange(class_count), 1.0, -1.0)

    n, d = z.shape
    w = np.zeros((class_count, d))
    b = np.zeros(class_count)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg_c * t)
            margin = targets[i] * (w @ z[i] + b)
            active = margin < 1.0
            w *= 1.0 - eta * reg_c
            if active.any():
                w[active] += eta * targets[i, active, None] * z[i]
                b[active] += eta * targets[i, active]
    return LinearSvm(w, b, mean, std, float(reg_c))


def svm_predict(model: LinearSvm, features: np.ndarray):
    """Arg-max class score; ties go to the lowest class index."""
    s = model.scores(features)
    pred = np.argmax(s, axis=1)
    return int(pred[0]) if np.ndim(features) == 1 else pred


def evaluate(model: LinearSvm, features: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError("cannot evaluate on an empty set")
    return float(np.mean(svm_predict(model, np.atleast_2d(features)) == labels))


def select_and_train(features: np.ndarray, labels: np.ndarray, class_count: int, grid=REG_GRID,
                     epochs: int = 10, seed: int = 0, val_fraction: float = 0.1) -> LinearSvm:
    """Pick ``reg_c`` on a seeded validation split, then refit on everything."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y))
    n_val = int(round(val_fraction * len(y)))
    val, fit = perm[:n_val], perm[n_val:]
    best = grid[0]
    if n_val and len(grid) > 1 and len(np.unique(y[fit])) == class_count:
        scores = [evaluate(svm_train(x[fit], y[fit], class_count, c, epochs, seed), x[val], y[val])
                  for c in grid]
        best = grid[int(np.argmax(scores))]
    return svm_train(x, y, class_count, best, epochs, seed)


# -- feature dump files ------------------------------------------------------------

def save_features(path, features: np.ndarray, labels: np.ndarray | None = None):
    """Write an ``(n, d)`` feature matrix; missing labels are stored as -1."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.full(len(features), -1) if labels is None else np.asarray(labels)
    return write_container(path, b"SNFV", {"features": features, "labels": labels.astype(np.int64)})


def load_features(path) -> tuple[np.ndarray, np.ndarray]:
    magic, f = read_container(path)
    if magic != b"SNFV":
        raise FormatError(f"{path}: not a feature file")
    return f["features"], f["labels"]
