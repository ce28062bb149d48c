"""Image metrics and the training objective.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5) with C1 = 0.01^2,
C2 = 0.03^2 on a [0, 1] data range, averaged over channels and valid window
positions; the analytic gradient is derived through the windowed statistics.
The total objective scales (L1/D-SSIM render loss + weighted count
regularization) by the distance-adaptive supervision weight.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
TARGET_RATIO_EXPONENT = 1.5
DEFAULT_LAMBDA_DSSIM = 0.2


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; inf when equal."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def l1(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _check_pair(a, b)
    return float(np.mean(np.abs(a - b)))


def l1_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _check_pair(a, b)
    return np.sign(a - b) / a.size


def _gaussian_window() -> np.ndarray:
    half = (SSIM_WINDOW - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    return k / k.sum()


_K1D = _gaussian_window()
_PAD = (SSIM_WINDOW - 1) // 2


def _valid_corr(img: np.ndarray) -> np.ndarray:
    """Separable windowed mean, 'valid' region only."""
    out = correlate1d(img, _K1D, axis=0, mode="constant")
    out = correlate1d(out, _K1D, axis=1, mode="constant")
    return out[_PAD:-_PAD, _PAD:-_PAD]


def _scatter(img: np.ndarray) -> np.ndarray:
    """Adjoint of _valid_corr (the window is symmetric)."""
    padded = np.pad(img, _PAD)
    out = correlate1d(padded, _K1D, axis=0, mode="constant")
    return correlate1d(out, _K1D, axis=1, mode="constant")


def _ssim_channel(a: np.ndarray, b: np.ndarray, with_grad: bool):
    mu_a = _valid_corr(a)
    mu_b = _valid_corr(b)
    s_aa = _valid_corr(a * a)
    s_bb = _valid_corr(b * b)
    s_ab = _valid_corr(a * b)
    var_a = s_aa - mu_a * mu_a
    var_b = s_bb - mu_b * mu_b
    cov = s_ab - mu_a * mu_b
    n1 = 2.0 * mu_a * mu_b + SSIM_C1
    n2 = 2.0 * cov + SSIM_C2
    d1 = mu_a * mu_a + mu_b * mu_b + SSIM_C1
    d2 = var_a + var_b + SSIM_C2
    smap = (n1 * n2) / (d1 * d2)
    if not with_grad:
        return smap, None
    inv = 1.0 / (d1 * d2)
    ds_dmu_a = (
        2.0 * mu_b * n2 * inv
        - 2.0 * mu_a * smap / d1
        + 2.0 * mu_a * smap / d2
        - mu_b * 2.0 * n1 * inv
    )
    ds_dsaa = -smap / d2
    ds_dsab = 2.0 * n1 * inv
    grad = (
        _scatter(ds_dmu_a)
        + 2.0 * a * _scatter(ds_dsaa)
        + b * _scatter(ds_dsab)
    )
    return smap, grad


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over channels and valid windows."""
    a, b = _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(
            f"image {a.shape[:2]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    maps = [_ssim_channel(a[..., c], b[..., c], False)[0] for c in range(a.shape[2])]
    return float(np.mean(maps))


def dssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural dissimilarity (1 - ssim) / 2, in [0, 1]."""
    return (1.0 - ssim(a, b)) / 2.0


def dssim_with_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """D-SSIM and its gradient w.r.t. the first image."""
    a, b = _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(
            f"image {a.shape[:2]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    channels = a.shape[2]
    total = 0.0
    count = 0
    grad = np.zeros_like(a)
    for c in range(channels):
        smap, g = _ssim_channel(a[..., c], b[..., c], True)
        total += smap.sum()
        count += smap.size
        grad[..., c] = g
    value = (1.0 - total / count) / 2.0
    return float(value), grad * (-0.5 / count)


def target_ratio(s_v: float) -> float:
    """Target fraction of rendered primitives, 1 / s_v^1.5."""
    if s_v < 1.0:
        raise ValueError(f"s_v must be >= 1, got {s_v}")
    return float(1.0 / s_v**TARGET_RATIO_EXPONENT)


def reg_loss(s_v: float, eta: float, eta_target: float) -> float:
    """(s_v - 1)^2 * relu(eta - eta_target)^2."""
    excess = max(eta - eta_target, 0.0)
    return float((s_v - 1.0) ** 2 * excess * excess)


def reg_loss_grad_eta(s_v: float, eta: float, eta_target: float) -> float:
    excess = max(eta - eta_target, 0.0)
    return float((s_v - 1.0) ** 2 * 2.0 * excess)


def adaptive_weight(s_v: float, s_max: float) -> float:
    """Supervision weight (1 - 0.5 * s_v / s_max)^2; weaker for larger s_v."""
    if not (1.0 <= s_v <= s_max):
        raise ValueError(f"need 1 <= s_v <= s_max, got s_v={s_v}, s_max={s_max}")
    return float((1.0 - 0.5 * s_v / s_max) ** 2)


@dataclass
class LossBreakdown:
    """All scalar terms of one training objective evaluation."""

    l1: float
    dssim: float
    l_render: float
    eta_target: float
    eta_soft: float
    l_reg: float
    w_s: float
    l_total: float
    s_v: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def total_loss(
    rendered: np.ndarray,
    gt: np.ndarray,
    s_v: float,
    s_max: float,
    eta_soft: float,
    lambda_reg: float = 1.0,
    lambda_dssim: float = DEFAULT_LAMBDA_DSSIM,
    use_adaptive_weight: bool = True,
) -> LossBreakdown:
    """Assemble the full objective w_s * (L_render + lambda_reg * L_reg).

    ``use_adaptive_weight=False`` forces w_s = 1 (ablation wiring); setting
    lambda_reg = 0 removes the count regularizer.
    """
    v_l1 = l1(rendered, gt)
    v_dssim = dssim(rendered, gt)
    l_render = (1.0 - lambda_dssim) * v_l1 + lambda_dssim * v_dssim
    eta_t = target_ratio(s_v)
    l_r = reg_loss(s_v, eta_soft, eta_t)
    w_s = adaptive_weight(s_v, s_max) if use_adaptive_weight else 1.0
    return LossBreakdown(
        l1=v_l1,
        dssim=v_dssim,
        l_render=l_render,
        eta_target=eta_t,
        eta_soft=float(eta_soft),
        l_reg=l_r,
        w_s=w_s,
        l_total=w_s * (l_render + lambda_reg * l_r),
        s_v=float(s_v),
    )


def total_loss_grads(
    rendered: np.ndarray,
    gt: np.ndarray,
    breakdown: LossBreakdown,
    lambda_reg: float = 1.0,
    lambda_dssim: float = DEFAULT_LAMBDA_DSSIM,
) -> tuple[np.ndarray, float]:
    """Gradients of l_total w.r.t. the rendered image and the soft ratio."""
    _, g_dssim = dssim_with_grad(rendered, gt)
    g_image = breakdown.w_s * (
        (1.0 - lambda_dssim) * l1_grad(rendered, gt) + lambda_dssim * g_dssim
    )
    g_eta = breakdown.w_s * lambda_reg * reg_loss_grad_eta(
        breakdown.s_v, breakdown.eta_soft, breakdown.eta_target
    )
    return g_image, g_eta
