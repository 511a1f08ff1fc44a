"""Dense linear algebra used by the whitening fit and the kernel path.

Matrices are 2-D ``float64`` numpy arrays and images are ``(H, W, C)`` arrays;
no wrapper types are introduced on top of numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ContractError, ConvergenceError, InsufficientDataError, ShapeError

# Rows per partial sum in ``covariance``. Fixed so the reduction order (and
# hence the last bits of the result) does not depend on the input size.
COV_CHUNK_ROWS = 65536

JACOBI_MAX_SWEEPS = 100
# Above this dimension ``sym_eigen(method="auto")`` hands off to LAPACK.
JACOBI_MAX_DIM = 512


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray   # (d,), descending
    eigenvectors: np.ndarray  # (d, d), column i pairs with eigenvalues[i]


def covariance(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased covariance of the rows of ``samples``.

    Accumulates in float64 over chunks of ``COV_CHUNK_ROWS`` rows so that the
    summation order is fixed. The result is symmetrised exactly.
    """
    x = np.asarray(samples)
    if x.ndim != 2:
        raise ShapeError(f"samples must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise InsufficientDataError(f"covariance needs at least 2 samples, got {n}")

    total = np.zeros(d, dtype=np.float64)
    for start in range(0, n, COV_CHUNK_ROWS):
        total += x[start:start + COV_CHUNK_ROWS].sum(axis=0, dtype=np.float64)
    mean = total / n

    cov = np.zeros((d, d), dtype=np.float64)
    for start in range(0, n, COV_CHUNK_ROWS):
        chunk = x[start:start + COV_CHUNK_ROWS].astype(np.float64) - mean
        cov += chunk.T @ chunk
    cov /= n - 1
    cov = 0.5 * (cov + cov.T)
    return mean, cov


@numba.njit(cache=True)
def _jacobi_sweeps(a, v, max_sweeps, tol):
    n = a.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += a[i, j] * a[i, j]
    if total == 0.0:
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if off <= tol * tol * total:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp = a[r, p]
                        arq = a[r, q]
                        a[r, p] = c * arp - s * arq
                        a[p, r] = a[r, p]
                        a[r, q] = s * arp + c * arq
                        a[q, r] = a[r, q]
                for r in range(n):
                    vrp = v[r, p]
                    vrq = v[r, q]
                    v[r, p] = c * vrp - s * vrq
                    v[r, q] = s * vrp + c * vrq
    return -1


def _canonical(values: np.ndarray, vectors: np.ndarray) -> EigenResult:
    # Descending, ties keep their original order; sign makes the
    # largest-magnitude entry of each eigenvector positive.
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return EigenResult(values.copy(), np.ascontiguousarray(vectors * signs))


def sym_eigen(m: np.ndarray, method: str = "auto", tol: float = 1e-14) -> EigenResult:
    """Eigendecomposition of a symmetric matrix.

    ``method="jacobi"`` runs cyclic Jacobi rotations (row-major sweep over the
    upper triangle, at most ``JACOBI_MAX_SWEEPS`` sweeps). ``"lapack"`` calls
    ``numpy.linalg.eigh``; ``"auto"`` picks Jacobi up to ``JACOBI_MAX_DIM``.
    Both routes return eigenvalues in descending order with the same sign
    convention, so callers cannot tell them apart beyond rounding.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ContractError("matrix is not symmetric within 1e-10")
    a = 0.5 * (a + a.T)

    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "lapack":
        values, vectors = np.linalg.eigh(a)
        return _canonical(values, vectors)
    if method != "jacobi":
        raise ValueError(f"unknown eigensolver {method!r}")

    v = np.eye(a.shape[0])
    sweeps = _jacobi_sweeps(a, v, JACOBI_MAX_SWEEPS, tol)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    return _canonical(np.diag(a).copy(), v)


def correlate2d(image: np.ndarray, kernel: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlate an ``(H, W, C)`` image with one ``(kh, kw, C)`` kernel.

    No kernel flip. Zero padding is added on every side. Returns an
    ``(H', W', 1)`` array with ``H' = (H + 2*padding - kh) // stride + 1``.
    """
    image = np.asarray(image, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if image.ndim != 3 or kernel.ndim != 3:
        raise ShapeError("image and kernel must both be (H, W, C)")
    if image.shape[2] != kernel.shape[2]:
        raise ShapeError(f"channel mismatch: image {image.shape[2]}, kernel {kernel.shape[2]}")
    if stride < 1 or padding < 0:
        raise ShapeError("stride must be >= 1 and padding >= 0")
    kh, kw, _ = kernel.shape
    if kh > image.shape[0] + 2 * padding or kw > image.shape[1] + 2 * padding:
        raise ShapeError(f"kernel {kernel.shape[:2]} larger than padded image {image.shape[:2]}")
    if padding:
        image = np.pad(image, ((padding, padding), (padding, padding), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(image, (kh, kw), axis=(0, 1))
    windows = windows[::stride, ::stride]  # (H', W', C, kh, kw)
    out = np.einsum("yxcij,ijc->yx", windows, kernel, optimize=True)
    return out[:, :, None]
