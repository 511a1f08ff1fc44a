"""ZCA whitening, its convolution-kernel approximation, and the DoG baseline.

Every image here is ``(H, W, C)`` and every flattened patch follows
``datasets.PATCH_LAYOUT``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .containers import read_container, write_container
from .errors import ContractError, FormatError, ShapeError
from .numerics import correlate2d, covariance, sym_eigen


def retained_count(ratio: float, dim: int) -> int:
    """``ceil(ratio * dim)`` eigenpairs, never fewer than one."""
    # rounding first keeps e.g. 0.7 * 10 = 7.000000000000001 at 7
    return max(1, min(dim, math.ceil(round(ratio * dim, 9))))


@dataclass(frozen=True)
class WhiteningTransform:
    mean: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    epsilon: float
    ratio: float
    w: np.ndarray
    # (H, W, C) of the samples when they are flattened images, else ()
    sample_shape: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def retained(self) -> int:
        return retained_count(self.ratio, self.dim)


def _check_coefficients(epsilon: float, ratio: float) -> None:
    if not epsilon > 0:
        raise ContractError(f"epsilon must be > 0, got {epsilon}")
    if not 0 < ratio <= 1:
        raise ContractError(f"ratio must lie in (0, 1], got {ratio}")


def zca_matrix(eigvals: np.ndarray, eigvecs: np.ndarray, epsilon: float, ratio: float) -> np.ndarray:
    k = retained_count(ratio, len(eigvals))
    v = eigvecs[:, :k]
    # eigenvalues of a PSD covariance can come out at -1e-17; treat those as 0
    scale = 1.0 / np.sqrt(np.maximum(eigvals[:k], 0.0) + epsilon)
    w = (v * scale) @ v.T
    return 0.5 * (w + w.T)


def fit_zca(samples: np.ndarray, epsilon: float, ratio: float = 1.0, *,
            sample_shape: tuple = (), method: str = "auto") -> WhiteningTransform:
    """Fit ``W = V_k diag(1/sqrt(lambda_i + epsilon)) V_k^T`` on the rows of ``samples``."""
    _check_coefficients(epsilon, ratio)
    samples = np.asarray(samples)
    n, d = samples.shape
    if n < d:
        warnings.warn(f"fitting a {d}-dim whitening on only {n} samples", stacklevel=2)
    mean, cov = covariance(samples)
    eig = sym_eigen(cov, method=method)
    w = zca_matrix(eig.eigenvalues, eig.eigenvectors, epsilon, ratio)
    return WhiteningTransform(mean, eig.eigenvectors, eig.eigenvalues, float(epsilon),
                              float(ratio), w, tuple(sample_shape))


def apply_zca(t: WhiteningTransform, sample: np.ndarray) -> np.ndarray:
    """``W (x - mean)`` for one vector or for each row of a matrix."""
    x = np.asarray(sample, dtype=np.float64)
    if x.shape[-1] != t.dim:
        raise ShapeError(f"sample length {x.shape[-1]} != transform dimension {t.dim}")
    return (x - t.mean) @ t.w.T


def zca_images(t: WhiteningTransform, images: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Whiten whole flattened images; returns the input shape in float32."""
    images = np.asarray(images)
    if tuple(images.shape[1:]) != tuple(t.sample_shape):
        raise ShapeError(f"images {images.shape[1:]} do not match fitted shape {t.sample_shape}")
    flat = images.reshape(len(images), -1)
    out = np.empty(flat.shape, dtype=np.float32)
    for start in range(0, len(flat), chunk):
        out[start:start + chunk] = apply_zca(t, flat[start:start + chunk])
    return out.reshape(images.shape)


@dataclass(frozen=True)
class WhiteningKernels:
    kernels: np.ndarray  # (C, p_h, p_w, C): kernels[c] whitens output channel c
    patch_w: int
    patch_h: int
    channels: int
    epsilon: float
    ratio: float
    mean: np.ndarray  # fit mean over flattened patches
    eigvals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def channel_mean(self) -> np.ndarray:
        """Fit mean averaged over patch positions, one scalar per channel."""
        return self.mean.reshape(self.patch_h, self.patch_w, self.channels).mean(axis=(0, 1))

    @property
    def exact_bias(self) -> np.ndarray:
        """Per-channel constant turning channel-mean centering into exact-mean centering."""
        m = self.mean.reshape(self.patch_h, self.patch_w, self.channels)
        delta = m - self.channel_mean
        return np.einsum("chwk,hwk->c", self.kernels, delta)


def center_index(patch_w: int, patch_h: int, channels: int, channel: int) -> int:
    """Flat index of pixel (p_h//2, p_w//2) in ``channel`` for the HWC layout."""
    return ((patch_h // 2) * patch_w + patch_w // 2) * channels + channel


def kernels_from_transform(t: WhiteningTransform, patch_w: int, patch_h: int, channels: int) -> WhiteningKernels:
    if t.dim != patch_w * patch_h * channels:
        raise ShapeError("transform dimension does not match the patch geometry")
    # K_c = P_c W: the impulse at the centre of channel c selects one row of W
    rows = [t.w[center_index(patch_w, patch_h, channels, c)] for c in range(channels)]
    kernels = np.stack(rows).reshape(channels, patch_h, patch_w, channels)
    return WhiteningKernels(kernels, patch_w, patch_h, channels, t.epsilon, t.ratio,
                            t.mean.copy(), t.eigvals.copy())


def fit_kernels(patches, epsilon: float, ratio: float = 1.0, *, method: str = "auto") -> WhiteningKernels:
    """Fit a patch ZCA and keep the centre row of W for every channel."""
    t = fit_zca(patches.patches, epsilon, ratio, method=method)
    return kernels_from_transform(t, patches.patch_w, patches.patch_h, patches.channels)


def kernel_center_response(k: WhiteningKernels, patches: np.ndarray) -> np.ndarray:
    """Kernel output at the centre of whole patches, centred with the exact fit mean.

    ``patches`` is ``(n, p_h*p_w*C)``; returns ``(n, C)``.
    """
    x = np.asarray(patches, dtype=np.float64) - k.mean
    return x @ k.kernels.reshape(k.channels, -1).T


def apply_kernels(k: WhiteningKernels, image: np.ndarray, centering: str = "channel") -> np.ndarray:
    """Whiten an ``(H, W, C)`` image by correlating it with each kernel.

    ``centering="channel"`` subtracts one mean per channel before the
    correlation (a pure convolution). ``"exact"`` additionally removes the
    per-channel bias so interior pixels match full patch ZCA exactly.
    Borders are zero padded; the output has the input's height and width.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != k.channels:
        raise ShapeError(f"expected (H, W, {k.channels}) image, got {image.shape}")
    if centering not in ("channel", "exact"):
        raise ValueError(f"unknown centering {centering!r}")
    centred = image - k.channel_mean
    pad_h, pad_w = k.patch_h // 2, k.patch_w // 2
    padded = np.pad(centred, ((pad_h, k.patch_h - 1 - pad_h), (pad_w, k.patch_w - 1 - pad_w), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k.patch_h, k.patch_w), axis=(0, 1))
    # windows: (H, W, C_in, p_h, p_w); kernels: (C_out, p_h, p_w, C_in)
    out = np.tensordot(windows, k.kernels.transpose(3, 1, 2, 0), axes=([2, 3, 4], [0, 1, 2]))
    if centering == "exact":
        out -= k.exact_bias
    return out


def apply_kernels_channelwise(k: WhiteningKernels, image: np.ndarray) -> np.ndarray:
    """Reference path: one ``correlate2d`` call per output channel."""
    centred = np.asarray(image, dtype=np.float64) - k.channel_mean
    if k.patch_w != k.patch_h or k.patch_w % 2 == 0:
        raise ShapeError("reference path needs square odd kernels")
    outs = [correlate2d(centred, k.kernels[c], stride=1, padding=k.patch_w // 2) for c in range(k.channels)]
    return np.concatenate(outs, axis=2)


def kernel_images(k: WhiteningKernels, images: np.ndarray) -> np.ndarray:
    out = np.empty(images.shape, dtype=np.float32)
    for i, img in enumerate(images):
        out[i] = apply_kernels(k, img)
    return out


# -- on-center / off-center baseline ---------------------------------------

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class DogConfig:
    sigma_center: float = 1.0
    sigma_surround: float = 2.0
    kernel_size: int = 7
    mode: str = "color"  # "grayscale" | "color"

    def __post_init__(self):
        if not 0 < self.sigma_center < self.sigma_surround:
            raise ContractError("need 0 < sigma_center < sigma_surround")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ContractError("kernel_size must be a positive odd number")
        if self.mode not in ("grayscale", "color"):
            raise ContractError(f"unknown DoG mode {self.mode!r}")


def _gaussian(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def dog_kernel(cfg: DogConfig) -> np.ndarray:
    """Center minus surround Gaussian, each normalised on the support; sums to 0."""
    k = _gaussian(cfg.kernel_size, cfg.sigma_center) - _gaussian(cfg.kernel_size, cfg.sigma_surround)
    return k - k.mean()


def _scale_unit(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi - lo <= 1e-9:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def dog_encode(image: np.ndarray, cfg: DogConfig) -> np.ndarray:
    """On/off DoG channels: all on channels first, then all off channels.

    Grayscale mode filters the luma of an RGB image (2 outputs); color mode
    filters each channel (2*C outputs). Borders replicate edge pixels so a
    constant image gives exactly zero response.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeError(f"expected (H, W, C) image, got {image.shape}")
    if cfg.mode == "grayscale":
        planes = image @ LUMA_WEIGHTS[:, None] if image.shape[2] == 3 else image.mean(axis=2, keepdims=True)
    else:
        planes = image
    k = dog_kernel(cfg)
    r = cfg.kernel_size // 2
    padded = np.pad(planes, ((r, r), (r, r), (0, 0)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, k.shape, axis=(0, 1))
    resp = np.einsum("yxcij,ij->yxc", windows, k)
    on = np.maximum(resp, 0.0)
    off = np.maximum(-resp, 0.0)
    out = np.concatenate([on, off], axis=2)
    for c in range(out.shape[2]):
        out[:, :, c] = _scale_unit(out[:, :, c])
    return out


# -- persistence -------------------------------------------------------------

def save_transform(path, t: WhiteningTransform):
    return write_container(path, b"SNWT", {
        "epsilon": t.epsilon, "ratio": t.ratio, "sample_shape": np.array(t.sample_shape, dtype=np.int64),
        "mean": t.mean, "eigvals": t.eigvals, "eigvecs": t.eigvecs, "w": t.w,
    })


def save_kernels(path, k: WhiteningKernels):
    return write_container(path, b"SNWK", {
        "patch_w": k.patch_w, "patch_h": k.patch_h, "channels": k.channels,
        "epsilon": k.epsilon, "ratio": k.ratio, "mean": k.mean, "eigvals": k.eigvals, "kernels": k.kernels,
    })


def save_dog(path, cfg: DogConfig):
    return write_container(path, b"SNDG", {
        "sigma_center": cfg.sigma_center, "sigma_surround": cfg.sigma_surround,
        "kernel_size": cfg.kernel_size, "grayscale": int(cfg.mode == "grayscale"),
    })


def load_preprocessor(path):
    """Load whichever of WhiteningTransform / WhiteningKernels / DogConfig ``path`` holds."""
    magic, f = read_container(path)
    try:
        if magic == b"SNWT":
            return WhiteningTransform(f["mean"], f["eigvecs"], f["eigvals"], float(f["epsilon"]),
                                      float(f["ratio"]), f["w"], tuple(int(v) for v in f["sample_shape"]))
        if magic == b"SNWK":
            return WhiteningKernels(f["kernels"], int(f["patch_w"]), int(f["patch_h"]), int(f["channels"]),
                                    float(f["epsilon"]), float(f["ratio"]), f["mean"], f["eigvals"])
        if magic == b"SNDG":
            return DogConfig(float(f["sigma_center"]), float(f["sigma_surround"]), int(f["kernel_size"]),
                             "grayscale" if int(f["grayscale"]) else "color")
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from exc
    raise FormatError(f"{path}: not a pre-processing file")
