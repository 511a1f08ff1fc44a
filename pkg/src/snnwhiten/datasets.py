"""CIFAR-10 / STL-10 binary loaders, dense patch sampling and PNG grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ShapeError

# A patch of shape (p_h, p_w, C) is flattened in C order: row, then column,
# then channel fastest. Whitening kernels and SNN weights share this layout.
PATCH_LAYOUT = "HWC"

CIFAR10_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR10_TEST_FILES = ("test_batch.bin",)
CIFAR10_RECORDS_PER_FILE = 10000
CIFAR10_SHAPE = (32, 32, 3)

STL10_SHAPE = (96, 96, 3)
STL10_FILES = {"train": ("train_X.bin", "train_y.bin"), "test": ("test_X.bin", "test_y.bin")}


@dataclass(frozen=True)
class LabeledImageSet:
    """Images as one ``(n, H, W, C)`` float32 array in [0, 1]."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ShapeError(f"images must be (n, H, W, C), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ShapeError("images and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise FormatError("label outside [0, class_count)")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def head(self, n: int | None) -> LabeledImageSet:
        """First ``n`` images (all of them when ``n`` is None)."""
        if n is None or n >= len(self):
            return self
        return LabeledImageSet(self.images[:n], self.labels[:n], self.class_count)


@dataclass(frozen=True)
class PatchSet:
    patches: np.ndarray  # (n, p_h * p_w * C), PATCH_LAYOUT
    patch_w: int
    patch_h: int
    channels: int

    def __post_init__(self):
        if self.patches.shape[1] != self.patch_w * self.patch_h * self.channels:
            raise ShapeError("patch row length does not match patch_w*patch_h*channels")

    def as_images(self) -> np.ndarray:
        return self.patches.reshape(-1, self.patch_h, self.patch_w, self.channels)


def _read_exact(path: Path, record_size: int) -> np.ndarray:
    if not path.is_file():
        raise FormatError(f"missing file: {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % record_size:
        raise FormatError(f"{path}: size {raw.size} is not a multiple of record size {record_size}")
    return raw.reshape(-1, record_size)


def _read_cifar_files(root: Path, names, strict: bool) -> LabeledImageSet:
    h, w, c = CIFAR10_SHAPE
    record = 1 + h * w * c
    labels, pixels = [], []
    for name in names:
        rows = _read_exact(root / name, record)
        if strict and len(rows) != CIFAR10_RECORDS_PER_FILE:
            raise FormatError(f"{root / name}: expected {CIFAR10_RECORDS_PER_FILE} records, got {len(rows)}")
        labels.append(rows[:, 0])
        # planar R, G, B planes of 32x32 row-major pixels
        pixels.append(rows[:, 1:].reshape(-1, c, h, w).transpose(0, 2, 3, 1))
    labels = np.concatenate(labels).astype(np.int64)
    if labels.max() >= 10:
        raise FormatError(f"{root}: CIFAR-10 label byte above 9")
    images = np.concatenate(pixels).astype(np.float32) / np.float32(255.0)
    return LabeledImageSet(images, labels, 10)


def load_cifar10(directory, strict: bool = True) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Load the official CIFAR-10 binary batches (50,000 train / 10,000 test).

    Each record is one label byte followed by the R, G and B planes (32x32,
    row-major). ``strict=False`` accepts batch files with any whole number of
    records, which is how the small fixture datasets are written.
    """
    root = Path(directory)
    return (_read_cifar_files(root, CIFAR10_TRAIN_FILES, strict),
            _read_cifar_files(root, CIFAR10_TEST_FILES, strict))


def _read_stl_split(root: Path, split: str) -> LabeledImageSet:
    x_name, y_name = STL10_FILES[split]
    h, w, c = STL10_SHAPE
    rows = _read_exact(root / x_name, h * w * c)
    # each image is stored channel by channel, every channel column-major
    images = rows.reshape(-1, c, w, h).transpose(0, 3, 2, 1)
    y_path = root / y_name
    if not y_path.is_file():
        raise FormatError(f"missing file: {y_path}")
    labels = np.fromfile(y_path, dtype=np.uint8).astype(np.int64)
    if len(labels) != len(images):
        raise FormatError(f"{y_path}: {len(labels)} labels for {len(images)} images")
    if labels.size and (labels.min() < 1 or labels.max() > 10):
        raise FormatError(f"{y_path}: STL-10 labels must be in 1..10")
    return LabeledImageSet(images.astype(np.float32) / np.float32(255.0), labels - 1, 10)


def load_stl10(directory, strict: bool = True) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Load the labelled STL-10 split (5,000 train / 8,000 test, 96x96)."""
    root = Path(directory)
    train, test = _read_stl_split(root, "train"), _read_stl_split(root, "test")
    if strict and (len(train), len(test)) != (5000, 8000):
        raise FormatError(f"{root}: expected 5000/8000 STL-10 images, got {len(train)}/{len(test)}")
    return train, test


def load_dataset(name: str, directory, strict: bool = True) -> tuple[LabeledImageSet, LabeledImageSet]:
    loaders = {"cifar10": load_cifar10, "stl10": load_stl10}
    if name not in loaders:
        raise FormatError(f"unknown dataset {name!r}; expected one of {sorted(loaders)}")
    return loaders[name](directory, strict)


def patch_grid(image_h: int, image_w: int, p_h: int, p_w: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-left corners (ys, xs) of the dense patch grid, row-major."""
    if p_h > image_h or p_w > image_w:
        raise ShapeError(f"patch {p_h}x{p_w} larger than image {image_h}x{image_w}")
    if stride < 1:
        raise ShapeError("stride must be >= 1")
    ys = np.arange(0, image_h - p_h + 1, stride)
    xs = np.arange(0, image_w - p_w + 1, stride)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return yy.ravel(), xx.ravel()


def sample_patches(images, p_w: int, p_h: int, stride: int, max_count: int | None, seed: int) -> PatchSet:
    """Dense ``stride`` grid of patches over every image, in image order.

    When the grid yields more than ``max_count`` patches, a uniform subset is
    drawn without replacement (kept in grid order) using ``seed``.
    """
    arr = images.images if isinstance(images, LabeledImageSet) else np.asarray(images)
    n, h, w, c = arr.shape
    ys, xs = patch_grid(h, w, p_h, p_w, stride)
    per_image = len(ys)
    total = n * per_image
    if max_count is not None and total > max_count:
        rng = np.random.default_rng(seed)
        flat = np.sort(rng.choice(total, size=max_count, replace=False))
    else:
        flat = np.arange(total)
    img_idx, pos_idx = np.divmod(flat, per_image)
    out = np.empty((len(flat), p_h * p_w * c), dtype=arr.dtype)
    # chunked gather keeps peak memory near the output size
    for start in range(0, len(flat), 65536):
        sl = slice(start, start + 65536)
        rows = (ys[pos_idx[sl]][:, None] + np.arange(p_h))[:, :, None]
        cols = (xs[pos_idx[sl]][:, None] + np.arange(p_w))[:, None, :]
        out[sl] = arr[img_idx[sl][:, None, None], rows, cols].reshape(len(rows), -1)
    return PatchSet(out, p_w, p_h, c)


def _to_uint8(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    lo, hi = t.min(), t.max()
    if hi - lo <= 0:
        return np.full(t.shape, 128, dtype=np.uint8)
    return np.rint((t - lo) / (hi - lo) * 255.0).astype(np.uint8)


def export_image_grid(tensors, path, separator_value: int = 255) -> Path:
    """Write tensors as a PNG grid with ``ceil(sqrt(n))`` columns.

    Every tile is min-max scaled on its own; constant tiles become mid gray.
    Tiles are separated by 1-pixel lines of ``separator_value``.
    """
    tiles = [np.asarray(t) for t in tensors]
    if not tiles:
        raise ShapeError("nothing to export")
    shape = tiles[0].shape
    if any(t.shape != shape for t in tiles) or len(shape) != 3 or shape[2] not in (1, 3):
        raise ShapeError("tiles must share one (H, W, 1|3) shape")
    h, w, c = shape
    cols = math.ceil(math.sqrt(len(tiles)))
    rows = math.ceil(len(tiles) / cols)
    canvas = np.full((rows * (h + 1) - 1, cols * (w + 1) - 1, c), separator_value, dtype=np.uint8)
    for i, t in enumerate(tiles):
        r, q = divmod(i, cols)
        canvas[r * (h + 1):r * (h + 1) + h, q * (w + 1):q * (w + 1) + w] = _to_uint8(t)
    if c == 1:
        canvas = np.repeat(canvas, 3, axis=2)
    path = Path(path)
    try:
        Image.fromarray(canvas).save(path, format="PNG")
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


# -- writers (fixtures, proxy datasets) --------------------------------------------

def _as_uint8(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images)
    if images.dtype != np.uint8:
        images = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    return images


def write_cifar10(directory, train_images, train_labels, test_images, test_labels) -> Path:
    """Write ``(n, 32, 32, 3)`` images in the CIFAR-10 binary layout.

    Training records are spread over the five batch files in order.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)

    def records(images, labels):
        planes = _as_uint8(images).transpose(0, 3, 1, 2).reshape(len(images), -1)
        return np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], planes], axis=1)

    train = records(train_images, train_labels)
    for name, chunk in zip(CIFAR10_TRAIN_FILES, np.array_split(train, len(CIFAR10_TRAIN_FILES))):
        chunk.tofile(root / name)
    records(test_images, test_labels).tofile(root / CIFAR10_TEST_FILES[0])
    return root


def write_stl10(directory, train_images, train_labels, test_images, test_labels) -> Path:
    """Write ``(n, 96, 96, 3)`` images and 0-based labels in the STL-10 layout."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for split, images, labels in (("train", train_images, train_labels), ("test", test_images, test_labels)):
        x_name, y_name = STL10_FILES[split]
        _as_uint8(images).transpose(0, 3, 2, 1).tofile(root / x_name)
        (np.asarray(labels) + 1).astype(np.uint8).tofile(root / y_name)
    return root
