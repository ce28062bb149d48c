"""Evaluation protocols: quality-vs-count curves, matched-count pruning
baselines, the hard-switch vs continuous four-region comparison, and
table-style summaries."""

from __future__ import annotations

import json
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .clod import DEFAULT_TAU, LodQuery
from .model import GaussianScene
from .ply import save_ply
from .render import RenderConfig, render


@dataclass
class CurvePoint:
    """Metrics at one virtual scale, averaged over a camera set."""

    s_v: float
    ratio: float
    count: float
    psnr: float
    ssim: float
    per_view_count: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "s_v": self.s_v, "ratio": self.ratio, "count": self.count,
            "psnr": self.psnr, "ssim": self.ssim,
        }


@dataclass
class RegionReport:
    """Per-strip quality of a four-region composite.

    ``jumps`` holds the per-boundary quality discontinuity: at each boundary
    the two adjacent configurations each render the same two-strip region,
    and the jump is the |PSNR difference| between them. Scene content
    cancels, so identical configurations give exactly zero.
    ``adjacent_psnr_diff`` is the raw |PSNR(strip r) - PSNR(strip r+1)| of
    the composite against ground truth, which also reflects content
    variation across strips.
    """

    mode: str  # "dlod" or "clod"
    psnr: list
    ssim: list
    jumps: list
    max_jump: float
    adjacent_psnr_diff: list
    strip_widths: list
    counts: list         # rendered count of each strip's source render
    s_v_schedule: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_views(
    scene: GaussianScene, cameras, gts, lod: LodQuery,
    config: RenderConfig | None = None, mode: str = "clod", topk: int | None = None,
) -> dict:
    psnrs, ssims, ratios, counts = [], [], [], []
    for cam, gt in zip(cameras, gts):
        art = render(scene, cam, lod, config, mode=mode, topk=topk)
        psnrs.append(metrics.psnr(art.image, gt))
        ssims.append(metrics.ssim(art.image, gt))
        ratios.append(art.rendered_ratio)
        counts.append(art.rendered_count)
    return {
        "psnr": float(np.mean(psnrs)),
        "ssim": float(np.mean(ssims)),
        "ratio": float(np.mean(ratios)),
        "count": float(np.mean(counts)),
        "per_view_psnr": psnrs,
        "per_view_count": counts,
    }


def quality_curve(
    scene: GaussianScene,
    cameras,
    gts,
    grid,
    tau: float = DEFAULT_TAU,
    config: RenderConfig | None = None,
    mode: str = "clod",
) -> list[CurvePoint]:
    """Render every camera at every grid scale and aggregate.

    The grid must be sorted ascending with min >= 1.
    """
    grid = [float(s) for s in grid]
    if not grid:
        raise ValueError("empty s_v grid")
    if sorted(grid) != grid or grid[0] < 1.0:
        raise ValueError("grid must be sorted ascending with min >= 1")
    if len(cameras) == 0:
        raise ValueError("empty camera set")
    points = []
    for s_v in grid:
        lod = LodQuery(s_v=s_v, tau=tau)
        stats = evaluate_views(scene, cameras, gts, lod, config, mode=mode)
        points.append(
            CurvePoint(
                s_v=s_v, ratio=stats["ratio"], count=stats["count"],
                psnr=stats["psnr"], ssim=stats["ssim"],
                per_view_count=stats["per_view_count"],
            )
        )
    return points


def write_curve_csv(points: list[CurvePoint], path: str | Path) -> None:
    lines = ["s_v,ratio,count,psnr,ssim"]
    for p in points:
        lines.append(
            f"{p.s_v!r},{p.ratio!r},{p.count!r},{p.psnr!r},{p.ssim!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def topk_for_count(k) -> int:
    return int(k)


def resolve_topk(k, n_total: int) -> int:
    """Accept an absolute count or a ratio in (0, 1)."""
    kf = float(k)
    if 0 < kf < 1:
        return max(1, int(round(kf * n_total)))
    return int(round(kf))


def topk_baseline_curve(
    scene: GaussianScene, cameras, gts, counts, s_v_for_ranking,
    tau: float = DEFAULT_TAU, config: RenderConfig | None = None,
) -> list[dict]:
    """Matched-count pruning baseline: keep the k highest attenuated
    opacities per view (threshold ignored), for each requested count."""
    out = []
    for k, s_v in zip(counts, s_v_for_ranking):
        lod = LodQuery(s_v=max(float(s_v), 1.0), tau=tau)
        stats = evaluate_views(
            scene, cameras, gts, lod, config, mode="topk",
            topk=resolve_topk(k, len(scene)),
        )
        stats["k"] = resolve_topk(k, len(scene))
        stats["s_v"] = float(lod.s_v)
        out.append(stats)
    return out


def match_scale_to_count(
    scene: GaussianScene, cameras, target_count: float,
    tau: float = DEFAULT_TAU, config: RenderConfig | None = None,
    s_lo: float = 1.0, s_hi: float = 64.0, tol: float = 0.02, iters: int = 50,
) -> tuple[float, float]:
    """Bisect the virtual scale until the mean rendered count matches.

    Returns (s_v, achieved mean count). Count is non-increasing in s_v, so
    bisection converges; the closest achievable point is returned even if the
    tolerance cannot be met exactly.
    """

    def mean_count(s_v):
        lod = LodQuery(s_v=s_v, tau=tau)
        return float(
            np.mean([render(scene, cam, lod, config).rendered_count for cam in cameras])
        )

    lo, hi = s_lo, s_hi
    c_lo = mean_count(lo)
    if c_lo <= target_count:
        return lo, c_lo
    best = (lo, c_lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        c = mean_count(mid)
        if abs(c - target_count) < abs(best[1] - target_count):
            best = (mid, c)
        if abs(c - target_count) <= tol * max(target_count, 1.0):
            return mid, c
        if c > target_count:
            lo = mid
        else:
            hi = mid
    return best


def _strip_widths(width: int, regions: int = 4) -> list[int]:
    # equal quotas; remainder pixels go to the leftmost strips
    base, rem = divmod(width, regions)
    return [base + 1 if i < rem else base for i in range(regions)]


def _strip_slices(width: int, regions: int = 4) -> list[slice]:
    widths = _strip_widths(width, regions)
    edges = np.concatenate([[0], np.cumsum(widths)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def _region_quality(composite, gt, slices):
    ps = [metrics.psnr(composite[:, s], gt[:, s]) for s in slices]
    ss = [metrics.ssim(composite[:, s], gt[:, s]) for s in slices]
    diffs = [abs(ps[i + 1] - ps[i]) for i in range(len(ps) - 1)]
    return ps, ss, diffs


def _boundary_jumps(strip_renders, gt, slices):
    """Quality discontinuity per boundary: the two adjacent configurations
    scored on the same two-strip region, content held fixed."""
    jumps = []
    for i in range(len(slices) - 1):
        lo, hi = slices[i].start, slices[i + 1].stop
        region = slice(lo, hi)
        p_left = metrics.psnr(strip_renders[i][:, region], gt[:, region])
        p_right = metrics.psnr(strip_renders[i + 1][:, region], gt[:, region])
        jumps.append(abs(p_left - p_right))
    return jumps


def dlod_clod_compare(
    high: GaussianScene,
    clod_model: GaussianScene,
    cam,
    gt: np.ndarray,
    low: GaussianScene | None = None,
    low_topk_ratio: float = 0.2,
    schedule=(4.0, 3.0, 2.0, 1.0),
    tau: float = DEFAULT_TAU,
    config: RenderConfig | None = None,
    budget_tol: float = 0.10,
) -> dict:
    """Four-region hard-switch vs continuous comparison for one view.

    The hard-switch composite uses the low model (or a matched top-k prune of
    the high model) for the two left strips and the high model for the right
    two. The continuous composite renders the single `clod_model` at the
    per-strip schedule (detail increasing left to right), with the schedule
    compressed/stretched until the mean per-strip rendered count matches the
    hard-switch composite within `budget_tol`.
    """
    slices = _strip_slices(cam.width, 4)
    lod1 = LodQuery(s_v=1.0, tau=tau)

    art_high = render(high, cam, lod1, config)
    if low is not None:
        art_low = render(low, cam, lod1, config)
    else:
        k = max(1, int(round(low_topk_ratio * art_high.rendered_count)))
        art_low = render(high, cam, lod1, config, mode="topk", topk=k)
    dlod = np.concatenate(
        [
            art_low.image[:, slices[0]], art_low.image[:, slices[1]],
            art_high.image[:, slices[2]], art_high.image[:, slices[3]],
        ],
        axis=1,
    )
    dlod_counts = [
        art_low.rendered_count, art_low.rendered_count,
        art_high.rendered_count, art_high.rendered_count,
    ]
    budget = float(np.mean(dlod_counts))

    schedule = [float(s) for s in schedule]

    def clod_renders(gamma: float):
        arts = []
        for s in schedule:
            s_eff = 1.0 + gamma * (s - 1.0)
            arts.append(render(clod_model, cam, LodQuery(s_v=max(s_eff, 1.0), tau=tau), config))
        return arts

    # mean strip count is non-increasing in gamma; bisect to match the budget
    lo, hi = 0.0, 8.0
    best = None
    for _ in range(40):
        gamma = 0.5 * (lo + hi)
        arts = clod_renders(gamma)
        mean_count = float(np.mean([a.rendered_count for a in arts]))
        if best is None or abs(mean_count - budget) < abs(best[1] - budget):
            best = (gamma, mean_count, arts)
        if abs(mean_count - budget) <= budget_tol * budget:
            best = (gamma, mean_count, arts)
            break
        if mean_count > budget:
            lo = gamma
        else:
            hi = gamma
    gamma, clod_budget, arts = best
    clod_img = np.concatenate(
        [a.image[:, s] for a, s in zip(arts, slices)], axis=1
    )
    clod_counts = [a.rendered_count for a in arts]
    eff_schedule = [1.0 + gamma * (s - 1.0) for s in schedule]

    d_ps, d_ss, d_diffs = _region_quality(dlod, gt, slices)
    c_ps, c_ss, c_diffs = _region_quality(clod_img, gt, slices)
    dlod_strip_renders = [art_low.image, art_low.image, art_high.image, art_high.image]
    d_jumps = _boundary_jumps(dlod_strip_renders, gt, slices)
    c_jumps = _boundary_jumps([a.image for a in arts], gt, slices)
    widths = _strip_widths(cam.width, 4)
    report_dlod = RegionReport(
        mode="dlod", psnr=d_ps, ssim=d_ss, jumps=d_jumps,
        max_jump=max(d_jumps), adjacent_psnr_diff=d_diffs,
        strip_widths=widths, counts=dlod_counts,
    )
    report_clod = RegionReport(
        mode="clod", psnr=c_ps, ssim=c_ss, jumps=c_jumps,
        max_jump=max(c_jumps), adjacent_psnr_diff=c_diffs,
        strip_widths=widths, counts=clod_counts,
        s_v_schedule=eff_schedule,
    )
    return {
        "dlod": report_dlod,
        "clod": report_clod,
        "dlod_image": dlod,
        "clod_image": clod_img,
        "budget_dlod": budget,
        "budget_clod": clod_budget,
        "gamma": gamma,
    }


def summarize(
    scene: GaussianScene, cameras, gts,
    tau: float = DEFAULT_TAU, config: RenderConfig | None = None,
    ply_path: str | Path | None = None,
) -> dict:
    """Headline record: full-detail quality, primitive count, file size."""
    stats = evaluate_views(scene, cameras, gts, LodQuery(s_v=1.0, tau=tau), config)
    if ply_path is not None and Path(ply_path).exists():
        size = Path(ply_path).stat().st_size
    else:
        with tempfile.NamedTemporaryFile(suffix=".ply") as fh:
            save_ply(scene, fh.name)
            size = Path(fh.name).stat().st_size
    return {
        "psnr": stats["psnr"],
        "ssim": stats["ssim"],
        "n_gs": len(scene),
        "file_mb": size / (1024 * 1024),
        "ratio": stats["ratio"],
        "count": stats["count"],
    }


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
