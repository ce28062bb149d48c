"""The LoD filter: attenuation, masking, ratios, and their invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clodgs.camera import orbit_camera
from clodgs.clod import (
    LodQuery,
    attenuate_opacity,
    attenuation_backward,
    compute_distances,
    compute_mask,
    soft_rendered_ratio,
    soft_rendered_ratio_rational,
)
from clodgs.synth import SynthSpec, generate_cameras, generate_synthetic_scene


def scalar_attenuation(alpha, dprime, sigma_d, s_v, eps=1e-6):
    """Independent scalar evaluation (math module, no shared code path)."""
    relu = sigma_d if sigma_d > 0 else 0.0
    return alpha * math.exp(-((dprime * s_v) ** 2) / (2.0 * relu * relu + eps))


class TestLodQuery:
    def test_validation(self):
        with pytest.raises(ValueError):
            LodQuery(s_v=0.5)
        with pytest.raises(ValueError):
            LodQuery(tau=0.0)
        with pytest.raises(ValueError):
            LodQuery(tau=1.0)

    def test_full_cull_permitted_but_flagged(self):
        q = LodQuery(s_v=300.0, tau=0.005)
        assert q.culls_everything
        assert not LodQuery(s_v=2.0).culls_everything


class TestAttenuateOpacity:
    def test_zero_distance_is_identity(self):
        q = LodQuery(s_v=7.0)
        for sigma in (-3.0, 0.0, 0.5, 40.0):
            assert attenuate_opacity(0.73, 0.0, sigma, q) == pytest.approx(0.73, rel=0, abs=0)

    def test_worked_value(self):
        # alpha=0.8, d'=0.5, s_v=2, sigma_d=1: 0.8*exp(-1/2.000001) ~ 0.4852
        got = attenuate_opacity(0.8, 0.5, 1.0, LodQuery(s_v=2.0))
        assert got == pytest.approx(0.48522, abs=1e-4)
        assert got == pytest.approx(scalar_attenuation(0.8, 0.5, 1.0, 2.0), rel=1e-15)

    def test_negative_decay_kills_opacity(self):
        got = attenuate_opacity(0.9, 0.3, -2.0, LodQuery(s_v=1.0))
        assert got == 0.0  # exp underflows

    def test_large_decay_approaches_alpha_monotonically(self):
        q = LodQuery(s_v=3.0)
        sigmas = [1.0, 2.0, 5.0, 20.0, 1000.0]
        vals = [attenuate_opacity(0.6, 0.8, s, q) for s in sigmas]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(0.6, abs=1e-5)

    @given(
        alpha=st.floats(0.01, 0.99),
        dprime=st.floats(0.0, 1.0),
        sigma=st.floats(-5.0, 50.0),
        s1=st.floats(1.0, 10.0),
        ds=st.floats(0.0, 10.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_scale_and_bounded(self, alpha, dprime, sigma, s1, ds):
        a1 = attenuate_opacity(alpha, dprime, sigma, LodQuery(s_v=s1))
        a2 = attenuate_opacity(alpha, dprime, sigma, LodQuery(s_v=s1 + ds))
        assert 0.0 <= a2 <= a1 <= alpha

    @given(
        alpha=st.floats(0.05, 0.95),
        dprime=st.floats(0.1, 1.0),
        sigma=st.floats(0.2, 8.0),
        s_v=st.floats(1.0, 8.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_sigma_gradient_matches_fd(self, alpha, dprime, sigma, s_v):
        # away from the relu kink and the saturated tail
        q = LodQuery(s_v=s_v)
        h = 1e-5 * max(1.0, abs(sigma))
        app = attenuate_opacity(alpha, dprime, sigma, q)
        _, d_sigma, _ = attenuation_backward(alpha, dprime, sigma, q, 1.0)
        fd = (
            attenuate_opacity(alpha, dprime, sigma + h, q)
            - attenuate_opacity(alpha, dprime, sigma - h, q)
        ) / (2 * h)
        assert d_sigma == pytest.approx(fd, rel=1e-6, abs=1e-12)
        assert app <= alpha


class TestDistances:
    def test_normalization_definition(self):
        scene = generate_synthetic_scene(SynthSpec(count=2, seed=1))
        scene.positions[0] = [2.0, 0.0, 0.0]
        scene.positions[1] = [4.0, 0.0, 0.0]
        scene.log_scales[:] = np.log(0.05)
        cam = orbit_camera(180.0, 0.0, 3.0, [3.0, 0.0, 0.0], 64, 64)
        # camera on the -x side at distance 3 from midpoint: distances 2 and 4
        field = compute_distances(scene, cam)
        assert field.in_frustum.all()
        np.testing.assert_allclose(field.distances, [2.0, 4.0], atol=1e-9)
        np.testing.assert_allclose(field.normalized, [0.5, 1.0], atol=1e-12)

    def test_single_visible_primitive_normalizes_to_one(self):
        scene = generate_synthetic_scene(SynthSpec(count=1, seed=2))
        cam = orbit_camera(0.0, 10.0, 2.0, scene.positions[0], 32, 32)
        field = compute_distances(scene, cam)
        assert field.normalized[field.in_frustum] == pytest.approx(1.0)

    def test_out_of_frustum_excluded_from_max(self):
        scene = generate_synthetic_scene(SynthSpec(count=30, seed=3))
        cam = generate_cameras(scene, 2, seed=4)[0]
        field = compute_distances(scene, cam)
        # push one primitive behind the camera, far away
        scene2 = scene.copy()
        back = cam.center + (cam.center - scene.centroid()) * 10.0
        scene2.positions[0] = back.astype(np.float32)
        field2 = compute_distances(scene2, cam)
        assert not field2.in_frustum[0]
        keep = field.in_frustum.copy()
        keep[0] = False
        np.testing.assert_allclose(
            field2.normalized[keep], field.normalized[keep], atol=1e-12
        )

    def test_empty_frustum(self):
        scene = generate_synthetic_scene(SynthSpec(count=5, seed=5))
        cam = orbit_camera(0.0, 0.0, 50.0, scene.centroid() + 1000.0, 16, 16)
        field = compute_distances(scene, cam)
        assert not field.in_frustum.any()
        assert field.max_distance == 0.0
        assert field.argmax == -1


class TestMask:
    def test_chained_worked_example(self):
        # alpha''~0.4852 vs threshold 2/255 ~ 0.00784 -> rendered
        app = attenuate_opacity(0.8, 0.5, 1.0, LodQuery(s_v=2.0))
        mask, eta = compute_mask(
            np.array([app]), np.array([True]), LodQuery(s_v=2.0), 1
        )
        assert mask[0]
        assert eta == 1.0

    def test_all_zero_attenuated(self):
        mask, eta = compute_mask(
            np.zeros(10), np.ones(10, bool), LodQuery(s_v=1.0), 10
        )
        assert eta == 0.0

    def test_threshold_above_one_culls_all(self):
        q = LodQuery(s_v=400.0, tau=0.01)
        assert q.culls_everything
        alpha_pp = np.random.default_rng(0).uniform(0, 1, 50)
        mask, eta = compute_mask(alpha_pp, np.ones(50, bool), q, 50)
        assert eta == 0.0

    def test_eta_uses_full_scene_count(self):
        alpha_pp = np.array([0.5, 0.5, 0.0, 0.0])
        in_frustum = np.array([True, False, True, False])
        _, eta = compute_mask(alpha_pp, in_frustum, LodQuery(), 4)
        assert eta == 0.25  # only the first: in frustum and above threshold


class TestSoftRatio:
    def test_saturated_equals_view_fraction(self):
        q = LodQuery(s_v=2.0)
        alpha_pp = np.full(10, 0.9)
        in_frustum = np.array([True] * 6 + [False] * 4)
        eta = soft_rendered_ratio(alpha_pp, in_frustum, q, 10)
        assert eta == pytest.approx(0.6, abs=1e-12)

    def test_at_threshold_contributes_half(self):
        q = LodQuery(s_v=3.0)
        eta = soft_rendered_ratio(
            np.array([q.threshold]), np.array([True]), q, 1
        )
        assert eta == pytest.approx(0.5)

    def test_soft_vs_hard_gap_bounded_by_band_population(self):
        rng = np.random.default_rng(42)
        q = LodQuery(s_v=1.0)
        temp = q.tau / 4.0
        # mix: well-above-threshold and fully attenuated primitives
        alpha_pp = np.concatenate(
            [rng.uniform(0.05, 0.95, 70), np.zeros(30)]
        )
        in_frustum = np.ones(100, bool)
        soft = soft_rendered_ratio(alpha_pp, in_frustum, q, 100, temperature=temp)
        _, hard = compute_mask(alpha_pp, in_frustum, q, 100)
        band = np.abs(alpha_pp - q.threshold) <= 5 * temp
        assert abs(soft - hard) <= band.mean() + 1e-12

    def test_converges_to_hard_ratio(self):
        rng = np.random.default_rng(3)
        q = LodQuery(s_v=2.0)
        alpha_pp = rng.uniform(0.0, 1.0, 200)
        in_frustum = rng.uniform(0, 1, 200) > 0.2
        _, hard = compute_mask(alpha_pp, in_frustum, q, 200)
        gaps = []
        for t in (1e-2, 1e-4, 1e-6):
            soft = soft_rendered_ratio(alpha_pp, in_frustum, q, 200, temperature=t)
            gaps.append(abs(soft - hard))
        assert gaps[-1] <= 1e-9
        assert gaps[0] >= gaps[-1]

    def test_rational_surrogate_calibration(self):
        q = LodQuery(s_v=2.0)
        dead = soft_rendered_ratio_rational(np.zeros(4), np.ones(4, bool), q, 4)
        assert dead == 0.0
        at_thr = soft_rendered_ratio_rational(
            np.array([q.threshold]), np.array([True]), q, 1
        )
        assert at_thr == pytest.approx(0.5)


class TestMonotonicity:
    """Rendered set shrinks as the virtual scale grows (exact property)."""

    @pytest.mark.parametrize("layout", ["uniform-box", "textured-plane", "cluster-mix"])
    def test_mask_subset_over_scale_grid(self, layout):
        scene = generate_synthetic_scene(SynthSpec(count=300, seed=9, layout=layout))
        # widen the decay spread so culling actually happens on the grid
        rng = np.random.default_rng(1)
        scene.sigma_d[:] = rng.uniform(0.1, 3.0, len(scene)).astype(np.float32)
        cam = generate_cameras(scene, 2, seed=5)[0]
        field = compute_distances(scene, cam)
        alpha = scene.opacities
        prev = None
        for s_v in np.arange(1.0, 10.5, 0.5):
            q = LodQuery(s_v=float(s_v))
            app = attenuate_opacity(alpha, field.normalized, scene.sigma_d, q)
            mask, _ = compute_mask(app, field.in_frustum, q, len(scene))
            if prev is not None:
                assert not np.any(mask & ~prev), f"mask grew at s_v={s_v}"
            prev = mask
