import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snnwhiten.errors import ContractError, InsufficientDataError, ShapeError
from snnwhiten.numerics import correlate2d, covariance, sym_eigen


def naive_correlate(image, kernel, stride, padding):
    """Double loop over output positions; dot product of the flattened window."""
    img = np.pad(image, ((padding, padding), (padding, padding), (0, 0)))
    kh, kw, _ = kernel.shape
    h_out = (img.shape[0] - kh) // stride + 1
    w_out = (img.shape[1] - kw) // stride + 1
    out = np.zeros((h_out, w_out, 1))
    for y in range(h_out):
        for x in range(w_out):
            window = img[y * stride:y * stride + kh, x * stride:x * stride + kw]
            out[y, x, 0] = float(np.dot(window.ravel(), kernel.ravel()))
    return out


class TestCovariance:
    def test_two_points(self):
        mean, cov = covariance(np.array([[0.0, 0.0], [2.0, 2.0]]))
        np.testing.assert_array_equal(mean, [1.0, 1.0])
        np.testing.assert_array_equal(cov, [[2.0, 2.0], [2.0, 2.0]])

    def test_identical_samples(self):
        mean, cov = covariance(np.tile([3.0, -1.0, 0.5], (7, 1)))
        np.testing.assert_allclose(mean, [3.0, -1.0, 0.5])
        np.testing.assert_array_equal(cov, np.zeros((3, 3)))

    def test_independent_axes_monte_carlo(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(100_000, 4)) * [1.0, 2.0, 0.5, 3.0]
        _, cov = covariance(x)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 0.05

    def test_needs_two_samples(self):
        with pytest.raises(InsufficientDataError):
            covariance(np.ones((1, 3)))

    def test_matches_numpy(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(300, 5))
        mean, cov = covariance(x)
        np.testing.assert_allclose(mean, x.mean(axis=0))
        np.testing.assert_allclose(cov, np.cov(x, rowvar=False), rtol=1e-12, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 8), st.integers(0, 2**31 - 1))
    def test_symmetric_psd(self, n, d, seed):
        x = np.random.default_rng(seed).normal(size=(n, d))
        _, cov = covariance(x)
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() > -1e-10


class TestSymEigen:
    def test_identity(self):
        r = sym_eigen(np.eye(3))
        np.testing.assert_array_equal(r.eigenvalues, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(r.eigenvectors, np.eye(3))

    def test_diagonal(self):
        r = sym_eigen(np.diag([1.0, 3.0]))
        np.testing.assert_array_equal(r.eigenvalues, [3.0, 1.0])
        np.testing.assert_allclose(np.abs(r.eigenvectors), [[0.0, 1.0], [1.0, 0.0]])

    def test_two_by_two_hand(self):
        # [[2,2],[2,2]]: eigenpairs (4, (1,1)/sqrt2) and (0, (1,-1)/sqrt2)
        r = sym_eigen(np.array([[2.0, 2.0], [2.0, 2.0]]))
        np.testing.assert_allclose(r.eigenvalues, [4.0, 0.0], atol=1e-14)
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(np.abs(r.eigenvectors), [[s, s], [s, s]], atol=1e-14)
        assert r.eigenvectors[0, 1] * r.eigenvectors[1, 1] < 0

    @pytest.mark.parametrize("method", ["jacobi", "lapack"])
    def test_random_reconstruction(self, method):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(6, 6))
        m = a + a.T
        r = sym_eigen(m, method=method)
        rec = (r.eigenvectors * r.eigenvalues) @ r.eigenvectors.T
        assert np.linalg.norm(rec - m) / np.linalg.norm(m) < 1e-8
        np.testing.assert_allclose(r.eigenvectors.T @ r.eigenvectors, np.eye(6), atol=1e-8)
        assert np.all(np.diff(r.eigenvalues) <= 0)

    def test_routes_agree(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(500, 30)) @ rng.normal(size=(30, 30))
        _, cov = covariance(x)
        a, b = sym_eigen(cov, method="jacobi"), sym_eigen(cov, method="lapack")
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(a.eigenvectors, b.eigenvectors, atol=1e-7)

    def test_sign_and_tie_convention(self):
        r = sym_eigen(np.diag([2.0, 5.0, 2.0]))
        np.testing.assert_array_equal(r.eigenvalues, [5.0, 2.0, 2.0])
        # equal eigenvalues keep original index order
        np.testing.assert_array_equal(r.eigenvectors, np.eye(3)[:, [1, 0, 2]])
        v = sym_eigen(np.array([[1.0, -0.9], [-0.9, 1.0]])).eigenvectors
        idx = np.argmax(np.abs(v), axis=0)
        assert np.all(v[idx, [0, 1]] > 0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(20, 20))
        m = a @ a.T
        r1, r2 = sym_eigen(m), sym_eigen(m.copy())
        assert np.array_equal(r1.eigenvalues, r2.eigenvalues)
        assert np.array_equal(r1.eigenvectors, r2.eigenvectors)

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractError):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            sym_eigen(np.ones((2, 3)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**31 - 1))
    def test_reconstruction_property(self, d, seed):
        a = np.random.default_rng(seed).normal(size=(d, d))
        m = a + a.T
        r = sym_eigen(m, method="jacobi")
        rec = (r.eigenvectors * r.eigenvalues) @ r.eigenvectors.T
        assert np.linalg.norm(rec - m) <= 1e-6 * np.linalg.norm(m) + 1e-300
        assert np.abs(r.eigenvectors.T @ r.eigenvectors - np.eye(d)).max() < 1e-8


class TestCorrelate2d:
    def test_identity_kernel(self):
        img = np.random.default_rng(0).random((7, 9, 1))
        out = correlate2d(img, np.ones((1, 1, 1)), 1, 0)
        np.testing.assert_array_equal(out, img)

    def test_constant_field(self):
        out = correlate2d(np.full((8, 8, 1), 0.3), np.ones((3, 3, 1)), 1, 1)
        np.testing.assert_allclose(out[1:-1, 1:-1], 9 * 0.3)
        np.testing.assert_allclose(out[0, 0], 4 * 0.3)

    def test_five_by_five_against_window_dot(self):
        rng = np.random.default_rng(1)
        img, k = rng.random((12, 11, 3)), rng.normal(size=(5, 5, 3))
        out = correlate2d(img, k, 1, 0)
        assert out.shape == (8, 7, 1)
        assert out[2, 3, 0] == pytest.approx(np.dot(img[2:7, 3:8].ravel(), k.ravel()), rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 16), st.integers(1, 16), st.integers(1, 3), st.integers(1, 5), st.integers(1, 5),
           st.integers(1, 3), st.integers(0, 2), st.integers(0, 2**31 - 1))
    def test_matches_brute_force(self, h, w, c, kh, kw, stride, pad, seed):
        if kh > h + 2 * pad or kw > w + 2 * pad:
            return
        rng = np.random.default_rng(seed)
        img, k = rng.normal(size=(h, w, c)), rng.normal(size=(kh, kw, c))
        np.testing.assert_allclose(correlate2d(img, k, stride, pad), naive_correlate(img, k, stride, pad),
                                   rtol=1e-10, atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            correlate2d(np.ones((4, 4, 2)), np.ones((3, 3, 1)))
        with pytest.raises(ShapeError):
            correlate2d(np.ones((4, 4, 1)), np.ones((5, 5, 1)))
