"""Analytic gradients against central finite differences (float64)."""

import numpy as np
import pytest

from clodgs.clod import LodQuery
from clodgs.render import GRADCHECK_CONFIG, render, render_with_gradients
from clodgs.synth import SynthSpec, generate_cameras, generate_synthetic_scene
from clodgs.trainer import compute_loss, loss_and_gradients

FIELDS = {
    "position": "positions",
    "log_scale": "log_scales",
    "rotation": "rotations",
    "opacity_logit": "opacity_logits",
    "sh_coeffs": "sh_coeffs",
    "sigma_d": "sigma_d",
}


def make_case(count, seed, width=32, height=32):
    scene = generate_synthetic_scene(
        SynthSpec(count=count, seed=seed, sh_degree=1)
    ).astype(np.float64)
    cams = generate_cameras(scene, 3, seed=seed + 100, width=width, height=height)
    gt_scene = generate_synthetic_scene(
        SynthSpec(count=count, seed=seed + 1, sh_degree=1)
    ).astype(np.float64)
    gt = render(gt_scene, cams[0], LodQuery(), config=GRADCHECK_CONFIG).image
    return scene, cams[0], gt


def fd_sweep(scene, cam, gt, lod, grads, kw, h=1e-5, tol=1e-3, stride=1):
    for gname, sname in FIELDS.items():
        arr = getattr(scene, sname)
        analytic = getattr(grads, gname)
        flat_indices = list(np.ndindex(arr.shape))[::stride]
        for idx in flat_indices:
            s2 = scene.copy()
            a2 = getattr(s2, sname)
            a2[idx] += h
            lp = compute_loss(s2, cam, gt, lod, **kw)
            a2[idx] -= 2 * h
            lm = compute_loss(s2, cam, gt, lod, **kw)
            fd = (lp - lm) / (2 * h)
            rel = abs(analytic[idx] - fd) / (abs(fd) + 1e-8)
            assert rel <= tol, (gname, idx, analytic[idx], fd, rel)


class TestFullLossGradients:
    @pytest.mark.parametrize("s_v,lambda_reg", [(1.0, 0.0), (3.0, 1.0)])
    def test_small_scene_all_parameters(self, s_v, lambda_reg):
        scene, cam, gt = make_case(10, seed=5)
        lod = LodQuery(s_v=s_v)
        kw = dict(s_max=5.0, lambda_reg=lambda_reg, config=GRADCHECK_CONFIG)
        _, grads, _ = loss_and_gradients(scene, cam, gt, lod, **kw)
        fd_sweep(scene, cam, gt, lod, grads, kw)

    def test_logistic_surrogate_path(self):
        scene, cam, gt = make_case(8, seed=31)
        lod = LodQuery(s_v=2.5)
        kw = dict(
            s_max=5.0, lambda_reg=1.0, config=GRADCHECK_CONFIG,
            reg_surrogate="logistic", soft_temperature=0.05,
        )
        _, grads, _ = loss_and_gradients(scene, cam, gt, lod, **kw)
        fd_sweep(scene, cam, gt, lod, grads, kw)

    def test_off_mode_gradients(self):
        scene, cam, gt = make_case(8, seed=41)
        lod = LodQuery(s_v=1.0)
        kw = dict(s_max=5.0, lambda_reg=0.0, config=GRADCHECK_CONFIG, mode="off")
        _, grads, _ = loss_and_gradients(scene, cam, gt, lod, **kw)
        assert np.all(grads.sigma_d == 0.0)
        fd_sweep(scene, cam, gt, lod, grads, kw)


class TestRenderBackward:
    def test_all_masked_out_gives_zero_gradients(self):
        scene, cam, _ = make_case(6, seed=51)
        scene.sigma_d[:] = -1.0  # relu kills the decay: everything culled
        lod = LodQuery(s_v=2.0)
        art = render(scene, cam, lod, config=GRADCHECK_CONFIG)
        assert art.rendered_count == 0
        grads = render_with_gradients(
            scene, cam, lod, np.ones((cam.height, cam.width, 3)),
            config=GRADCHECK_CONFIG, artifacts=art,
        )
        for name in FIELDS:
            assert np.all(getattr(grads, name) == 0.0), name

    def test_masked_out_primitive_gets_zero_image_gradient(self):
        scene, cam, _ = make_case(12, seed=61)
        # force one primitive below the mask threshold via negative decay,
        # but keep it off the per-view distance maximum so the
        # normalization coupling stays clear of it
        from clodgs.clod import compute_distances

        field = compute_distances(scene, cam)
        victim = int(np.argmin(np.where(field.in_frustum, field.distances, np.inf)))
        scene.sigma_d[victim] = -0.5
        lod = LodQuery(s_v=2.0)
        art = render(scene, cam, lod, config=GRADCHECK_CONFIG)
        assert not art.mask[victim]
        grads = render_with_gradients(
            scene, cam, lod, np.ones((cam.height, cam.width, 3)),
            config=GRADCHECK_CONFIG, artifacts=art,
        )
        assert np.all(grads.position[victim] == 0.0)
        assert np.all(grads.sh_coeffs[victim] == 0.0)
        assert grads.opacity_logit[victim] == 0.0
        assert grads.sigma_d[victim] == 0.0

    def test_zero_distance_decay_gradient_at_zero_normalized_distance(self):
        # a primitive at the camera-distance minimum of d'=0 would need to
        # sit exactly at the camera; instead verify the analytic property
        # directly on the attenuation chain
        from clodgs.clod import attenuation_backward

        _, d_sigma, _ = attenuation_backward(0.7, 0.0, 2.0, LodQuery(s_v=4.0), 1.0)
        assert d_sigma == 0.0

    def test_loss_grad_shape_checked(self):
        scene, cam, _ = make_case(5, seed=71)
        art = render(scene, cam, LodQuery(), config=GRADCHECK_CONFIG)
        with pytest.raises(ValueError, match="shape"):
            render_with_gradients(
                scene, cam, LodQuery(), np.ones((8, 8, 3)),
                config=GRADCHECK_CONFIG, artifacts=art,
            )
