"""Differentiable tile-based splat rendering.

Pipeline per view: distance-based opacity attenuation and masking, frustum
culling, projection, a global front-to-back depth sort (stable index
tie-break), 16x16 tile binning, and per-pixel alpha compositing against the
scene background. The backward pass returns analytic gradients for every
primitive parameter, including the distance decay, with a fixed reduction
order so results are bit-reproducible for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import clod
from .backend import kernel_module
from .camera import Camera
from .clod import LodQuery
from .model import GaussianScene
from .projection import LOWPASS, project_gaussians, projection_backward
from .sh import evaluate_sh_with_grad


class RenderError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenderConfig:
    """Rasterizer guards and execution knobs.

    The defaults follow rasterizer convention: footprints and culling at 3
    sigma, per-splat opacity clamped to 0.99, compositing stops once
    transmittance drops below 1e-4. The gradcheck configuration widens the
    cutoffs so central finite differences never straddle a guard boundary.
    """

    tile: int = 16
    sigma_cutoff: float = 3.0
    lowpass: float = LOWPASS
    alpha_clamp: float = 0.99
    alpha_skip: float = 0.0
    transmittance_min: float = 1e-4
    workers: int = 1
    backend: str | None = None


DEFAULT_CONFIG = RenderConfig()
GRADCHECK_CONFIG = RenderConfig(sigma_cutoff=7.0, transmittance_min=0.0)


@dataclass
class ParamGradients:
    """Loss gradients per primitive parameter class (zero where not rendered)."""

    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: np.ndarray
    sh_coeffs: np.ndarray
    sigma_d: np.ndarray

    @classmethod
    def zeros(cls, n: int, sh_dim: int) -> "ParamGradients":
        return cls(
            position=np.zeros((n, 3)),
            log_scale=np.zeros((n, 3)),
            rotation=np.zeros((n, 4)),
            opacity_logit=np.zeros(n),
            sh_coeffs=np.zeros((n, 3, sh_dim)),
            sigma_d=np.zeros(n),
        )

    def add_(self, other: "ParamGradients") -> "ParamGradients":
        self.position += other.position
        self.log_scale += other.log_scale
        self.rotation += other.rotation
        self.opacity_logit += other.opacity_logit
        self.sh_coeffs += other.sh_coeffs
        self.sigma_d += other.sigma_d
        return self


@dataclass
class RenderArtifacts:
    """Everything the forward pass produces for one view."""

    image: np.ndarray          # (H, W, 3) in [0, 1]
    mask: np.ndarray           # (N,) rendered flags
    rendered_ratio: float      # rendered count / N_total
    transmittance: np.ndarray  # (H, W) terminal transmittance
    n_contrib: np.ndarray      # (H, W) applied splats per pixel
    rendered_count: int
    n_total: int
    lod: LodQuery
    mode: str
    state: dict = field(default_factory=dict, repr=False)

    def summary(self) -> dict:
        return {
            "rendered_count": int(self.rendered_count),
            "total": int(self.n_total),
            "eta_actual": float(self.rendered_ratio),
            "s_v": float(self.lod.s_v),
            "tau": float(self.lod.tau),
        }


def _bin_tiles(mean2d, radius, width, height, tile):
    """Assign splats to the 16x16 tiles their footprint box overlaps.

    Returns (pair_splat, tile_starts, tiles_x, tiles_y); pairs are grouped by
    tile id with the depth order preserved inside each group.
    """
    tiles_x = (width + tile - 1) // tile
    tiles_y = (height + tile - 1) // tile
    m = mean2d.shape[0]
    if m == 0:
        return (
            np.zeros(0, dtype=np.int64),
            np.zeros(tiles_x * tiles_y + 1, dtype=np.int64),
            tiles_x,
            tiles_y,
        )
    x0 = np.clip(np.floor((mean2d[:, 0] - radius) / tile), 0, tiles_x - 1).astype(np.int64)
    x1 = np.clip(np.floor((mean2d[:, 0] + radius) / tile), 0, tiles_x - 1).astype(np.int64)
    y0 = np.clip(np.floor((mean2d[:, 1] - radius) / tile), 0, tiles_y - 1).astype(np.int64)
    y1 = np.clip(np.floor((mean2d[:, 1] + radius) / tile), 0, tiles_y - 1).astype(np.int64)
    nx = x1 - x0 + 1
    ny = y1 - y0 + 1
    counts = nx * ny
    total = int(counts.sum())
    rep = np.repeat(np.arange(m, dtype=np.int64), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    local = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts)
    dx = local % nx[rep]
    dy = local // nx[rep]
    tile_id = (y0[rep] + dy) * tiles_x + (x0[rep] + dx)
    order = np.argsort(tile_id, kind="stable")
    pair_splat = rep[order]
    tile_sorted = tile_id[order]
    tile_starts = np.searchsorted(
        tile_sorted, np.arange(tiles_x * tiles_y + 1, dtype=np.int64), side="left"
    ).astype(np.int64)
    return pair_splat, tile_starts, tiles_x, tiles_y


def _run_tiles(fn, n_tiles: int, workers: int) -> None:
    """Run fn(t_lo, t_hi) over all tiles, optionally split across threads.

    Outputs are per-tile (disjoint pixels / per-pair buffers), so any split
    yields identical results.
    """
    if workers <= 1 or n_tiles == 0:
        fn(0, n_tiles)
        return
    # several small chunks per worker: tiles vary wildly in splat load, so
    # contiguous per-worker halves would leave stragglers
    n_chunks = min(workers * 8, n_tiles)
    chunks = np.linspace(0, n_tiles, num=n_chunks + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(fn, int(lo), int(hi))
            for lo, hi in zip(chunks[:-1], chunks[1:])
            if hi > lo
        ]
        for fut in futures:
            fut.result()


def _select_mask(scene, lod, mode, topk, proj, alpha_pp):
    if mode == "off":
        return proj.valid.copy()
    if mode == "clod":
        mask, _ = clod.compute_mask(alpha_pp, proj.valid, lod, len(scene))
        return mask
    if mode == "topk":
        if topk is None:
            raise ValueError("mode='topk' requires the topk count")
        k = int(topk)
        if k < 0 or k > len(scene):
            raise ValueError(f"topk must be in [0, {len(scene)}], got {topk}")
        mask = np.zeros(len(scene), dtype=bool)
        if k > 0:
            ranked = np.argsort(
                np.where(proj.valid, -alpha_pp, np.inf), kind="stable"
            )
            chosen = ranked[: min(k, int(proj.valid.sum()))]
            mask[chosen[proj.valid[chosen]]] = True
        return mask
    raise ValueError(f"unknown render mode {mode!r}")


def render(
    scene: GaussianScene,
    cam: Camera,
    lod: LodQuery | None = None,
    config: RenderConfig | None = None,
    mode: str = "clod",
    topk: int | None = None,
) -> RenderArtifacts:
    """Render one view through the LoD filter.

    mode "clod" applies attenuation and the threshold mask; "off" bypasses
    the mechanism entirely (plain splatting); "topk" ranks by attenuated
    opacity and keeps the best ``topk``, ignoring the threshold.
    """
    lod = lod or LodQuery()
    cfg = config or DEFAULT_CONFIG
    try:
        scene.check_finite()
    except ValueError as exc:
        raise RenderError(str(exc)) from exc

    n = len(scene)
    proj = project_gaussians(
        scene.positions, scene.log_scales, scene.rotations, cam,
        sigma_cutoff=cfg.sigma_cutoff, lowpass=cfg.lowpass,
    )
    dist = clod.compute_distances(scene, cam, projection=proj)
    alpha = expit(scene.opacity_logits.astype(np.float64))
    if mode == "off":
        alpha_pp = alpha.copy()
    else:
        alpha_pp = np.where(
            proj.valid,
            clod.attenuate_opacity(alpha, dist.normalized, scene.sigma_d, lod),
            0.0,
        )
    mask = _select_mask(scene, lod, mode, topk, proj, alpha_pp)
    rendered_count = int(mask.sum())
    eta = rendered_count / n

    h, w = cam.height, cam.width
    image = np.tile(scene.background, (h, w, 1)).astype(np.float64)
    t_final = np.ones((h, w), dtype=np.float64)
    n_contrib = np.zeros((h, w), dtype=np.int32)

    idx = np.nonzero(mask)[0]
    order = idx[np.argsort(proj.depth[idx], kind="stable")]

    state = {
        "proj": proj, "dist": dist, "alpha": alpha, "alpha_pp": alpha_pp,
        "mask": mask, "order": order, "lod": lod, "config": cfg, "mode": mode,
        "cam": cam,
    }

    if order.size:
        mean2d = np.ascontiguousarray(proj.mean2d[order])
        cov2d = proj.cov2d[order]
        det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] ** 2
        conic = np.stack(
            [cov2d[:, 1, 1] / det, -cov2d[:, 0, 1] / det, cov2d[:, 0, 0] / det],
            axis=1,
        )
        view_dirs = scene.positions[order].astype(np.float64) - cam.center
        view_len = np.linalg.norm(view_dirs, axis=1, keepdims=True)
        view_dirs = view_dirs / view_len
        color_raw, basis, dcolor_ddir = evaluate_sh_with_grad(
            scene.sh_coeffs[order].astype(np.float64), view_dirs, scene.sh_degree
        )
        color = np.minimum(color_raw, 1.0)
        alpha_in = np.ascontiguousarray(alpha_pp[order])
        conic = np.ascontiguousarray(conic)
        color_c = np.ascontiguousarray(color)

        pair_splat, tile_starts, tiles_x, tiles_y = _bin_tiles(
            mean2d, proj.radius[order], w, h, cfg.tile
        )
        kern = kernel_module(cfg.backend)
        background = np.ascontiguousarray(scene.background, dtype=np.float64)

        def _forward(t_lo, t_hi):
            kern.forward_tiles(
                mean2d, conic, color_c, alpha_in, pair_splat, tile_starts,
                t_lo, t_hi, cfg.tile, w, h, tiles_x,
                cfg.alpha_clamp, cfg.alpha_skip, cfg.transmittance_min,
                background, image, t_final, n_contrib,
            )

        _run_tiles(_forward, tiles_x * tiles_y, cfg.workers)
        state.update(
            mean2d=mean2d, conic=conic, color=color_c, color_raw=color_raw,
            basis=basis, dcolor_ddir=dcolor_ddir, view_dirs=view_dirs,
            view_len=view_len, alpha_in=alpha_in, pair_splat=pair_splat,
            tile_starts=tile_starts, tiles_x=tiles_x, tiles_y=tiles_y,
            cov2d=cov2d, det=det,
        )

    if not np.isfinite(image).all():
        raise RenderError("render produced non-finite pixels")
    return RenderArtifacts(
        image=image, mask=mask, rendered_ratio=eta, transmittance=t_final,
        n_contrib=n_contrib, rendered_count=rendered_count, n_total=n,
        lod=lod, mode=mode, state=state,
    )


def render_with_gradients(
    scene: GaussianScene,
    cam: Camera,
    lod: LodQuery | None = None,
    loss_grad: np.ndarray | None = None,
    config: RenderConfig | None = None,
    mode: str = "clod",
    topk: int | None = None,
    artifacts: RenderArtifacts | None = None,
) -> ParamGradients:
    """Backpropagate an image-space gradient to all primitive parameters.

    ``loss_grad`` is dL/dpixel with the image's shape. Masked-out primitives
    receive exactly zero gradient; the decay parameter's gradient flows
    through the attenuation chain of the rendered ones. Reduction order is
    fixed, so the result is independent of the worker count.
    """
    if artifacts is None:
        artifacts = render(scene, cam, lod, config, mode=mode, topk=topk)
    st = artifacts.state
    lod = st["lod"]
    cfg = st["config"]
    h, w = cam.height, cam.width
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if loss_grad.shape != (h, w, 3):
        raise ValueError(
            f"loss_grad shape {loss_grad.shape} does not match image {(h, w, 3)}"
        )

    grads = ParamGradients.zeros(len(scene), scene.sh_dim)
    order = st["order"]
    if order.size == 0:
        return grads

    m = order.size
    pair_splat = st["pair_splat"]
    p_total = pair_splat.shape[0]
    pair_dmean2d = np.zeros((p_total, 2))
    pair_dconic = np.zeros((p_total, 3))
    pair_dcolor = np.zeros((p_total, 3))
    pair_dalpha = np.zeros(p_total)

    kern = kernel_module(cfg.backend)
    n_tiles = st["tiles_x"] * st["tiles_y"]
    background = np.ascontiguousarray(scene.background, dtype=np.float64)
    d_image = np.ascontiguousarray(loss_grad)

    def _backward(t_lo, t_hi):
        kern.backward_tiles(
            st["mean2d"], st["conic"], st["color"], st["alpha_in"],
            pair_splat, st["tile_starts"], t_lo, t_hi, cfg.tile, w, h,
            st["tiles_x"], cfg.alpha_clamp, cfg.alpha_skip, background,
            d_image, artifacts.transmittance, artifacts.n_contrib,
            pair_dmean2d, pair_dconic, pair_dcolor, pair_dalpha,
        )

    _run_tiles(_backward, n_tiles, cfg.workers)

    # merge per-pair gradients in fixed pair order
    d_mean2d = np.zeros((m, 2))
    d_conic = np.zeros((m, 3))
    d_color = np.zeros((m, 3))
    d_alpha_eff = np.zeros(m)
    np.add.at(d_mean2d, pair_splat, pair_dmean2d)
    np.add.at(d_conic, pair_splat, pair_dconic)
    np.add.at(d_color, pair_splat, pair_dcolor)
    np.add.at(d_alpha_eff, pair_splat, pair_dalpha)

    # color chain: upper clamp, SH coefficients, view direction
    d_color *= st["color_raw"] < 1.0
    b_used = st["basis"].shape[1]
    grads.sh_coeffs[order, :, :b_used] = np.einsum(
        "mc,mb->mcb", d_color, st["basis"]
    )
    d_dir = np.einsum("mc,mck->mk", d_color, st["dcolor_ddir"])
    dirs = st["view_dirs"]
    d_pos_dir = (
        d_dir - dirs * np.sum(d_dir * dirs, axis=1, keepdims=True)
    ) / st["view_len"]

    # conic -> 2x2 covariance: dSigma = -Conic dConic Conic
    lam = np.empty((m, 2, 2))
    lam[:, 0, 0] = st["conic"][:, 0]
    lam[:, 0, 1] = lam[:, 1, 0] = st["conic"][:, 1]
    lam[:, 1, 1] = st["conic"][:, 2]
    d_lam = np.empty((m, 2, 2))
    d_lam[:, 0, 0] = d_conic[:, 0]
    d_lam[:, 0, 1] = d_lam[:, 1, 0] = 0.5 * d_conic[:, 1]
    d_lam[:, 1, 1] = d_conic[:, 2]
    d_cov2d = -np.einsum("nij,njk,nkl->nil", lam, d_lam, lam)

    d_position, d_log_scale, d_rotation = projection_backward(
        scene.positions[order], scene.log_scales[order], scene.rotations[order],
        cam, d_mean2d, d_cov2d,
    )
    grads.position[order] = d_position + d_pos_dir
    grads.log_scale[order] = d_log_scale
    grads.rotation[order] = d_rotation

    alpha = st["alpha"]
    if st["mode"] == "off":
        d_alpha = np.zeros(len(scene))
        d_alpha[order] = d_alpha_eff
        grads.opacity_logit = d_alpha * alpha * (1.0 - alpha)
    else:
        dist = st["dist"]
        d_app_full = np.zeros(len(scene))
        d_app_full[order] = d_alpha_eff
        d_alpha, d_sigma, d_dprime = clod.attenuation_backward(
            alpha, dist.normalized, scene.sigma_d.astype(np.float64), lod, d_app_full
        )
        grads.opacity_logit = d_alpha * alpha * (1.0 - alpha)
        grads.sigma_d = d_sigma
        grads.position += clod.distance_normalization_backward(
            dist, scene.positions.astype(np.float64), cam.center, d_dprime
        )
    return grads


def attenuation_gradients(
    scene: GaussianScene,
    cam: Camera,
    lod: LodQuery,
    artifacts: RenderArtifacts,
    d_alpha_pp: np.ndarray,
) -> ParamGradients:
    """Chain a per-primitive gradient on attenuated opacity to parameters.

    Used for the loss-side soft ratio path, which touches every in-frustum
    primitive (not only rendered ones).
    """
    st = artifacts.state
    dist = st["dist"]
    alpha = st["alpha"]
    grads = ParamGradients.zeros(len(scene), scene.sh_dim)
    d_alpha, d_sigma, d_dprime = clod.attenuation_backward(
        alpha, dist.normalized, scene.sigma_d.astype(np.float64), lod,
        np.asarray(d_alpha_pp, dtype=np.float64),
    )
    grads.opacity_logit = d_alpha * alpha * (1.0 - alpha)
    grads.sigma_d = d_sigma
    grads.position = clod.distance_normalization_backward(
        dist, scene.positions.astype(np.float64), cam.center, d_dprime
    )
    return grads
