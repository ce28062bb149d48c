"""Benchmark the compiled compositing kernel against the NumPy fallback."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .backend import available_backends
from .clod import LodQuery
from .render import RenderConfig, render, render_with_gradients
from .synth import SynthSpec, generate_cameras, generate_synthetic_scene


@dataclass
class BenchResult:
    backend: str
    forward_ms: float
    backward_ms: float

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "forward_ms": self.forward_ms,
            "backward_ms": self.backward_ms,
        }


def run_benchmark(
    count: int = 20000,
    size: int = 256,
    reps: int = 5,
    seed: int = 0,
    workers: int = 1,
    backends: list[str] | None = None,
) -> dict:
    """Time forward and backward renders per backend and check agreement."""
    scene = generate_synthetic_scene(SynthSpec(count=count, seed=seed))
    cam = generate_cameras(scene, 2, seed=seed + 1, width=size, height=size)[0]
    lod = LodQuery(s_v=1.0)
    loss_grad = np.full((size, size, 3), 1.0 / (size * size * 3))

    backends = backends or available_backends()
    results = []
    images = {}
    for name in backends:
        cfg = RenderConfig(backend=name, workers=workers)
        art = render(scene, cam, lod, cfg)  # warm-up + correctness capture
        images[name] = art.image
        t0 = time.perf_counter()
        for _ in range(reps):
            art = render(scene, cam, lod, cfg)
        fwd = (time.perf_counter() - t0) / reps * 1000.0
        t0 = time.perf_counter()
        for _ in range(reps):
            render_with_gradients(scene, cam, lod, loss_grad, artifacts=art)
        bwd = (time.perf_counter() - t0) / reps * 1000.0
        results.append(BenchResult(name, fwd, bwd))

    report: dict = {
        "count": count,
        "size": size,
        "reps": reps,
        "workers": workers,
        "results": [r.to_dict() for r in results],
    }
    if len(images) == 2:
        a, b = (images[n] for n in sorted(images))
        report["max_abs_image_diff"] = float(np.abs(a - b).max())
    if len(results) == 2:
        by = {r.backend: r for r in results}
        if "cython" in by and "python" in by:
            report["forward_speedup"] = by["python"].forward_ms / by["cython"].forward_ms
            report["backward_speedup"] = by["python"].backward_ms / by["cython"].backward_ms
    return report


def format_report(report: dict) -> str:
    lines = [
        f"scene: {report['count']} primitives at {report['size']}x{report['size']}"
        f" ({report['reps']} reps, workers={report['workers']})"
    ]
    for r in report["results"]:
        lines.append(
            f"  {r['backend']:>7}: forward {r['forward_ms']:8.2f} ms"
            f"   backward {r['backward_ms']:8.2f} ms"
        )
    if "forward_speedup" in report:
        lines.append(
            f"  speedup: forward {report['forward_speedup']:.1f}x,"
            f" backward {report['backward_speedup']:.1f}x"
        )
    if "max_abs_image_diff" in report:
        lines.append(f"  max |image difference|: {report['max_abs_image_diff']:.3e}")
    return "\n".join(lines)
