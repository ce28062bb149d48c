"""Spherical-harmonic color evaluation."""

import numpy as np
import pytest

from clodgs.sh import C0, evaluate_sh, sh_basis, sh_basis_grad


def rand_dirs(n, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


class TestBasis:
    def test_dc_constant(self):
        vals = sh_basis(rand_dirs(20), 0)
        np.testing.assert_allclose(vals[:, 0], 0.2820947918, atol=1e-10)

    def test_degree0_color_formula(self):
        k = 0.7
        coeffs = np.zeros((3, 1))
        coeffs[:, 0] = k
        color = evaluate_sh(coeffs, np.array([0.0, 0.0, 1.0]), 0)
        np.testing.assert_allclose(color, 0.5 + k * C0, atol=1e-12)

    def test_degree0_view_independent(self):
        rng = np.random.default_rng(1)
        coeffs = rng.normal(size=(3, 1))
        colors = [evaluate_sh(coeffs, d, 0) for d in rand_dirs(10, seed=2)]
        for c in colors[1:]:
            np.testing.assert_array_equal(c, colors[0])

    def test_degree1_odd_under_negation(self):
        # the linear band flips sign when the direction flips
        rng = np.random.default_rng(3)
        dirs = rand_dirs(16, seed=4)
        b_pos = sh_basis(dirs, 1)
        b_neg = sh_basis(-dirs, 1)
        np.testing.assert_allclose(b_neg[:, 1:4], -b_pos[:, 1:4], atol=1e-12)
        # consequence on the raw (unclamped) color difference
        coeffs = rng.normal(scale=0.2, size=(5, 3, 4))
        raw = lambda d: np.einsum("ncb,nb->nc", coeffs, sh_basis(np.tile(d, (5, 1)), 1))
        d = dirs[0]
        deg1_pos = raw(d) - np.einsum("nc->nc", coeffs[:, :, 0] * C0)
        deg1_neg = raw(-d) - coeffs[:, :, 0] * C0
        np.testing.assert_allclose(deg1_neg, -deg1_pos, atol=1e-12)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_basis_grad_matches_fd(self, degree):
        dirs = rand_dirs(8, seed=degree)
        grad = sh_basis_grad(dirs, degree)
        h = 1e-6
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            fd = (sh_basis(dirs + dp, degree) - sh_basis(dirs - dp, degree)) / (2 * h)
            np.testing.assert_allclose(grad[:, :, k], fd, atol=1e-6)

    def test_orthonormality_by_quadrature(self):
        # Monte-Carlo check that the basis is orthonormal on the sphere
        rng = np.random.default_rng(7)
        d = rng.normal(size=(200000, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        b = sh_basis(d, 2)
        gram = 4 * np.pi * (b.T @ b) / d.shape[0]
        np.testing.assert_allclose(gram, np.eye(9), atol=0.05)


class TestEvaluate:
    def test_clamps_at_zero(self):
        coeffs = np.zeros((3, 1))
        coeffs[:, 0] = -10.0
        color = evaluate_sh(coeffs, np.array([1.0, 0.0, 0.0]), 0)
        np.testing.assert_array_equal(color, 0.0)

    def test_rejects_degree_above_storage(self):
        with pytest.raises(ValueError, match="degree"):
            evaluate_sh(np.zeros((3, 4)), np.array([0.0, 0.0, 1.0]), 2)

    def test_rejects_non_unit_direction(self):
        with pytest.raises(ValueError, match="unit"):
            evaluate_sh(np.zeros((3, 1)), np.array([1.0, 1.0, 0.0]), 0)
