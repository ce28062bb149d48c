"""Image metrics and loss terms against independent oracles."""

import math

import numpy as np
import pytest

from clodgs import metrics


def rand_pair(shape=(24, 24, 3), seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, shape), rng.uniform(0, 1, shape)


class TestPsnr:
    def test_identical_images_inf(self):
        a, _ = rand_pair()
        assert metrics.psnr(a, a) == float("inf")

    def test_zeros_vs_ones(self):
        a = np.zeros((8, 8, 3))
        b = np.ones((8, 8, 3))
        assert metrics.psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_difference(self):
        a = np.full((8, 8, 3), 0.4)
        b = np.full((8, 8, 3), 0.5)
        assert metrics.psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics.psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestSsim:
    def test_identical(self):
        a, _ = rand_pair()
        assert metrics.ssim(a, a) == pytest.approx(1.0, abs=1e-12)
        assert metrics.dssim(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_matches_skimage(self):
        from skimage.metrics import structural_similarity

        a, b = rand_pair((32, 40, 3), seed=5)
        mine = metrics.ssim(a, b)
        # same formulation: gaussian 11x11 sigma 1.5 window, population
        # covariance, valid region only (crop half the window)
        per_channel = [
            structural_similarity(
                a[..., c], b[..., c], win_size=11, gaussian_weights=True,
                sigma=1.5, use_sample_covariance=False, data_range=1.0,
            )
            for c in range(3)
        ]
        # skimage reports the mean over an uncropped map; crop it like ours
        from skimage.metrics import structural_similarity as ss

        vals = []
        for c in range(3):
            _, smap = ss(
                a[..., c], b[..., c], win_size=11, gaussian_weights=True,
                sigma=1.5, use_sample_covariance=False, data_range=1.0,
                full=True,
            )
            vals.append(smap[5:-5, 5:-5].mean())
        assert mine == pytest.approx(np.mean(vals), abs=1e-9)

    def test_inverted_binary_can_go_negative_but_dssim_stays_in_range(self):
        rng = np.random.default_rng(2)
        a = (rng.uniform(0, 1, (16, 16, 3)) > 0.5).astype(np.float64)
        b = 1.0 - a
        s = metrics.ssim(a, b)
        d = metrics.dssim(a, b)
        assert s < 0.2
        assert 0.0 <= d <= 1.0

    def test_too_small_image(self):
        with pytest.raises(ValueError):
            metrics.ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))

    def test_dssim_gradient_matches_fd(self):
        a, b = rand_pair((16, 16, 3), seed=7)
        _, grad = metrics.dssim_with_grad(a, b)
        rng = np.random.default_rng(8)
        h = 3e-5
        for _ in range(40):
            i, j, c = rng.integers(0, 16), rng.integers(0, 16), rng.integers(0, 3)
            ap = a.copy(); ap[i, j, c] += h
            am = a.copy(); am[i, j, c] -= h
            fd = (metrics.dssim(ap, b) - metrics.dssim(am, b)) / (2 * h)
            rel = abs(grad[i, j, c] - fd) / (abs(fd) + 1e-8)
            assert rel <= 1e-4, (i, j, c, grad[i, j, c], fd)


class TestLossTerms:
    def test_target_ratio_values(self):
        assert metrics.target_ratio(1.0) == 1.0
        assert metrics.target_ratio(4.0) == pytest.approx(0.125, rel=1e-15)
        assert metrics.target_ratio(2.0) == pytest.approx(0.35355339, abs=1e-7)

    def test_reg_loss_values(self):
        assert metrics.reg_loss(1.0, 0.9, 0.5) == 0.0
        assert metrics.reg_loss(3.0, 0.1, 0.19245) == 0.0  # under target
        got = metrics.reg_loss(3.0, 0.4, metrics.target_ratio(3.0))
        assert got == pytest.approx(0.17231, abs=2e-5)

    def test_adaptive_weight_values(self):
        assert metrics.adaptive_weight(5.0, 5.0) == pytest.approx(0.25)
        assert metrics.adaptive_weight(1.0, 5.0) == pytest.approx(0.81)
        assert metrics.adaptive_weight(1.0, 10.0) == pytest.approx(0.9025)

    def test_equation_oracles_random(self):
        # independent scalar evaluation through the math module
        rng = np.random.default_rng(123)
        from clodgs.clod import LodQuery, attenuate_opacity

        for _ in range(1000):
            alpha = rng.uniform(0.01, 0.99)
            dprime = rng.uniform(0.0, 1.0)
            sigma = rng.uniform(-2.0, 30.0)
            s_v = rng.uniform(1.0, 10.0)
            mine = attenuate_opacity(alpha, dprime, sigma, LodQuery(s_v=s_v))
            relu = max(sigma, 0.0)
            ref = alpha * math.exp(-((dprime * s_v) ** 2) / (2 * relu * relu + 1e-6))
            assert abs(mine - ref) <= 1e-12 * max(abs(ref), 1e-300)

    def test_total_loss_assembly(self):
        a, b = rand_pair((16, 16, 3), seed=1)
        bd = metrics.total_loss(a, b, s_v=2.0, s_max=5.0, eta_soft=0.8)
        assert bd.l_total == bd.w_s * (bd.l_render + 1.0 * bd.l_reg)
        assert bd.l_render == (0.8 * bd.l1 + 0.2 * bd.dssim)
        assert all(v >= 0 for v in (bd.l1, bd.dssim, bd.l_render, bd.l_reg, bd.w_s))

    def test_perfect_reconstruction_at_unit_scale(self):
        a, _ = rand_pair((16, 16, 3))
        bd = metrics.total_loss(a, a.copy(), s_v=1.0, s_max=5.0, eta_soft=1.0)
        assert bd.l_total == 0.0

    def test_lambda_reg_zero_ablation(self):
        a, b = rand_pair((16, 16, 3), seed=3)
        bd = metrics.total_loss(a, b, s_v=3.0, s_max=5.0, eta_soft=0.9, lambda_reg=0.0)
        assert bd.l_total == pytest.approx(bd.w_s * bd.l_render, rel=1e-15)

    def test_forced_unit_weight_ablation(self):
        a, b = rand_pair((16, 16, 3), seed=4)
        bd = metrics.total_loss(
            a, b, s_v=4.0, s_max=5.0, eta_soft=0.9, use_adaptive_weight=False
        )
        assert bd.w_s == 1.0
        assert bd.l_total == pytest.approx(bd.l_render + bd.l_reg, rel=1e-15)

    def test_reg_loss_monotone_in_eta_above_target(self):
        t = metrics.target_ratio(3.0)
        vals = [metrics.reg_loss(3.0, e, t) for e in np.linspace(t, 1.0, 20)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
