"""Compiled kernel vs NumPy fallback: agreement, workers, benchmark."""

import numpy as np
import pytest

from clodgs.backend import available_backends
from clodgs.clod import LodQuery
from clodgs.render import RenderConfig, render, render_with_gradients
from clodgs.synth import SynthSpec, generate_cameras, generate_synthetic_scene

HAVE_BOTH = set(available_backends()) >= {"cython", "python"}
needs_both = pytest.mark.skipif(not HAVE_BOTH, reason="compiled kernel not built")


def case(count=300, seed=2, size=48):
    scene = generate_synthetic_scene(SynthSpec(count=count, seed=seed))
    rng = np.random.default_rng(0)
    scene.sigma_d[:] = rng.uniform(0.3, 4.0, count).astype(np.float32)
    cam = generate_cameras(scene, 2, seed=seed + 1, width=size, height=size)[0]
    return scene, cam


@needs_both
class TestBackendAgreement:
    def test_forward_images_agree(self):
        scene, cam = case()
        lod = LodQuery(s_v=2.0)
        img_c = render(scene, cam, lod, RenderConfig(backend="cython")).image
        img_p = render(scene, cam, lod, RenderConfig(backend="python")).image
        np.testing.assert_allclose(img_c, img_p, rtol=0, atol=1e-12)

    def test_forward_state_agrees(self):
        scene, cam = case()
        a = render(scene, cam, LodQuery(), RenderConfig(backend="cython"))
        b = render(scene, cam, LodQuery(), RenderConfig(backend="python"))
        np.testing.assert_array_equal(a.n_contrib, b.n_contrib)
        np.testing.assert_allclose(a.transmittance, b.transmittance, atol=1e-12)

    def test_backward_agrees(self):
        scene, cam = case(count=150)
        lod = LodQuery(s_v=1.5)
        rng = np.random.default_rng(3)
        g = rng.normal(size=(cam.height, cam.width, 3)) / (cam.height * cam.width)
        grads = {}
        for backend in ("cython", "python"):
            cfg = RenderConfig(backend=backend)
            art = render(scene, cam, lod, cfg)
            grads[backend] = render_with_gradients(
                scene, cam, lod, g, config=cfg, artifacts=art
            )
        for name in ("position", "log_scale", "rotation", "opacity_logit",
                     "sh_coeffs", "sigma_d"):
            a = getattr(grads["cython"], name)
            b = getattr(grads["python"], name)
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-13, err_msg=name)


class TestWorkerIndependence:
    @pytest.mark.parametrize("backend", available_backends())
    def test_results_identical_across_worker_counts(self, backend):
        scene, cam = case(count=200, size=64)
        lod = LodQuery(s_v=1.5)
        g = np.full((cam.height, cam.width, 3), 1.0 / cam.height / cam.width / 3)
        ref_img = None
        ref_grad = None
        for workers in (1, 3, 8):
            cfg = RenderConfig(backend=backend, workers=workers)
            art = render(scene, cam, lod, cfg)
            grad = render_with_gradients(scene, cam, lod, g, config=cfg, artifacts=art)
            if ref_img is None:
                ref_img, ref_grad = art.image, grad
            else:
                np.testing.assert_array_equal(art.image, ref_img)
                for name in ("position", "sigma_d", "sh_coeffs"):
                    np.testing.assert_array_equal(
                        getattr(grad, name), getattr(ref_grad, name)
                    )


class TestBenchmark:
    def test_benchmark_smoke(self):
        from clodgs.bench import format_report, run_benchmark

        report = run_benchmark(count=400, size=64, reps=1)
        assert {r["backend"] for r in report["results"]} == set(available_backends())
        assert all(r["forward_ms"] > 0 for r in report["results"])
        if HAVE_BOTH:
            assert report["max_abs_image_diff"] <= 1e-12
        text = format_report(report)
        assert "forward" in text
