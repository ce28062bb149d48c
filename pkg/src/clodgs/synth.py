"""Synthetic scenes and camera sets for self-contained desk-scale runs.

Everything here is a pure function of (spec, seed): generation twice with the
same arguments produces identical scenes, poses and pixel data.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logit

from .camera import orbit_camera
from .model import DEFAULT_SIGMA_D, SH_DIMS, CameraSet, GaussianScene

LAYOUTS = ("uniform-box", "textured-plane", "cluster-mix")

# Seeded palette the generators draw colors from. Kept below ~0.7 so a
# trained model has color headroom to compensate mild distance attenuation.
_PALETTE = np.array(
    [
        [0.66, 0.21, 0.17],
        [0.17, 0.39, 0.64],
        [0.23, 0.56, 0.29],
        [0.70, 0.59, 0.19],
        [0.54, 0.26, 0.59],
        [0.19, 0.59, 0.56],
        [0.69, 0.39, 0.17],
        [0.62, 0.62, 0.64],
    ]
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    count: int
    seed: int
    layout: str = "cluster-mix"
    sh_degree: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}")
        if self.layout not in LAYOUTS:
            raise ConfigError(f"unknown layout {self.layout!r}; pick from {LAYOUTS}")
        if self.sh_degree not in SH_DIMS:
            raise ConfigError(f"sh_degree must be 0..3, got {self.sh_degree}")


def _random_quats(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def _sh_from_colors(colors: np.ndarray, rng: np.random.Generator, degree: int) -> np.ndarray:
    """DC term reproducing `colors` head-on, mild random view dependence."""
    from .sh import C0

    n = colors.shape[0]
    b = SH_DIMS[degree]
    sh = np.zeros((n, 3, b))
    sh[:, :, 0] = (colors - 0.5) / C0
    if b > 1:
        sh[:, :, 1:] = rng.normal(scale=0.06, size=(n, 3, b - 1))
    return sh


def generate_synthetic_scene(spec: SynthSpec) -> GaussianScene:
    """Deterministic scene inside unit-ish bounds; see SynthSpec for knobs."""
    rng = np.random.default_rng(spec.seed)
    n = spec.count

    if spec.layout == "uniform-box":
        positions = rng.uniform(-1.0, 1.0, size=(n, 3))
        colors = _PALETTE[rng.integers(0, len(_PALETTE), size=n)]
        colors = np.clip(colors + rng.normal(scale=0.05, size=(n, 3)), 0.05, 0.95)
        base = 0.07 * np.exp(rng.normal(scale=0.3, size=n))
        log_scales = np.log(base)[:, None] + rng.normal(scale=0.2, size=(n, 3))
    elif spec.layout == "textured-plane":
        xy = rng.uniform(-1.0, 1.0, size=(n, 2))
        z = rng.normal(scale=0.03, size=(n, 1))
        positions = np.concatenate([xy, z], axis=1)
        # checker-style palette texture over the plane
        freq = 2.0
        idx = (
            np.floor((xy[:, 0] + 1.0) * freq).astype(int)
            + np.floor((xy[:, 1] + 1.0) * freq).astype(int)
        ) % len(_PALETTE)
        colors = np.clip(_PALETTE[idx] + rng.normal(scale=0.04, size=(n, 3)), 0.05, 0.95)
        base = 0.06 * np.exp(rng.normal(scale=0.25, size=n))
        log_scales = np.stack(
            [np.log(base), np.log(base), np.log(base * 0.35)], axis=1
        ) + rng.normal(scale=0.15, size=(n, 3))
    else:  # cluster-mix
        n_clusters = 8
        centers = rng.uniform(-0.75, 0.75, size=(n_clusters, 3))
        cluster_color = _PALETTE[rng.permutation(len(_PALETTE))[:n_clusters]]
        n_cluster = int(round(n * 0.7))
        member = rng.integers(0, n_clusters, size=n_cluster)
        pos_c = centers[member] + rng.normal(scale=0.16, size=(n_cluster, 3))
        col_c = np.clip(
            cluster_color[member] + rng.normal(scale=0.05, size=(n_cluster, 3)),
            0.05, 0.95,
        )
        n_dust = n - n_cluster
        pos_d = rng.uniform(-1.0, 1.0, size=(n_dust, 3))
        col_d = np.clip(
            _PALETTE[rng.integers(0, len(_PALETTE), size=n_dust)]
            + rng.normal(scale=0.05, size=(n_dust, 3)),
            0.05, 0.95,
        )
        positions = np.concatenate([pos_c, pos_d], axis=0)
        colors = np.concatenate([col_c, col_d], axis=0)
        base = np.concatenate(
            [
                0.055 * np.exp(rng.normal(scale=0.3, size=n_cluster)),
                0.09 * np.exp(rng.normal(scale=0.3, size=n_dust)),
            ]
        )
        log_scales = np.log(base)[:, None] + rng.normal(scale=0.2, size=(n, 3))

    opacities = rng.uniform(0.3, 0.95, size=n)
    return GaussianScene(
        positions=positions.astype(np.float32),
        log_scales=log_scales.astype(np.float32),
        rotations=_random_quats(rng, n).astype(np.float32),
        opacity_logits=logit(opacities).astype(np.float32),
        sh_coeffs=_sh_from_colors(colors, rng, spec.sh_degree).astype(np.float32),
        sigma_d=np.full(n, DEFAULT_SIGMA_D, dtype=np.float32),
        sh_degree=spec.sh_degree,
    )


def generate_cameras(
    scene: GaussianScene,
    n: int,
    seed: int,
    width: int = 64,
    height: int = 64,
    fov_deg: float = 50.0,
) -> list:
    """Orbit cameras around the scene centroid at varied radii/elevations."""
    if n < 2:
        raise ConfigError(f"need at least 2 cameras, got {n}")
    extent = scene.extent()
    if extent <= 0.0:
        raise ConfigError("scene extent is degenerate (zero bounding box)")
    rng = np.random.default_rng(seed)
    target = scene.centroid()
    cams = []
    for i in range(n):
        azimuth = 360.0 * i / n + rng.uniform(-8.0, 8.0)
        elevation = rng.uniform(-5.0, 40.0)
        radius = extent * rng.uniform(2.1, 2.9)
        cams.append(
            orbit_camera(
                azimuth, elevation, radius, target, width, height,
                fov_deg=fov_deg, near=0.05 * extent, far=100.0 * extent,
            )
        )
    return cams


def generate_camera_set(
    scene: GaussianScene,
    n: int,
    seed: int,
    out_dir: str | Path,
    width: int = 64,
    height: int = 64,
    prefix: str = "view",
) -> CameraSet:
    """Cameras plus ground-truth images rendered with attenuation disabled."""
    from .imgio import write_ppm
    from .render import render

    cams = generate_cameras(scene, n, seed, width=width, height=height)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, cam in enumerate(cams):
        art = render(scene, cam, mode="off")
        path = out_dir / f"{prefix}_{i:03d}.ppm"
        write_ppm(art.image, path)
        paths.append(str(path))
    return CameraSet(cameras=cams, image_paths=paths)


TRAIN_SIGMA_D_INIT = 1.2


def training_init_scene(
    scene: GaussianScene,
    seed: int,
    position_noise: float = 0.01,
    init_opacity: float = 0.1,
    sigma_d_init: float = TRAIN_SIGMA_D_INIT,
) -> GaussianScene:
    """Point-cloud-style initialization for reconstruction runs.

    Keeps jittered ground-truth positions (the stand-in for an SfM cloud) and
    resets shape, color and opacity to neutral defaults. The distance decay
    starts low (not at the file-format default) so the LoD mechanism is live
    from the first mechanism iteration: the image loss then raises it where
    detail matters instead of the count pressure having to grind it down.
    """
    rng = np.random.default_rng(seed)
    n = len(scene)
    positions = scene.positions.astype(np.float64)
    positions = positions + rng.normal(scale=position_noise, size=(n, 3))

    # isotropic scale from the mean nearest-neighbor distance, 3DGS-style
    sample = positions[rng.permutation(n)[: min(n, 512)]]
    diff = sample[:, None, :] - sample[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, np.inf)
    nn = np.median(dist.min(axis=1))
    log_scales = np.full((n, 3), np.log(max(nn, 1e-4)))

    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    sh = np.zeros((n, 3, scene.sh_dim))

    return GaussianScene(
        positions=positions.astype(np.float32),
        log_scales=log_scales.astype(np.float32),
        rotations=rotations.astype(np.float32),
        opacity_logits=np.full(n, logit(init_opacity), dtype=np.float32),
        sh_coeffs=sh.astype(np.float32),
        sigma_d=np.full(n, sigma_d_init, dtype=np.float32),
        sh_degree=scene.sh_degree,
        background=tuple(scene.background),
    )
