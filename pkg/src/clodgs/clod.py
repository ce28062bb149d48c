"""Continuous level-of-detail filtering.

Per view, every in-frustum primitive gets a normalized camera distance in
[0, 1]; its opacity is attenuated by a Gaussian falloff whose variance is the
(learnable, per-primitive) distance decay, scaled by the virtual distance
scale of the query. A threshold that also grows with the virtual scale then
decides which primitives are rendered at all. Raising the scale therefore
both fades primitives and culls them more aggressively, which is what makes
detail vary continuously with one scalar knob.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

DEFAULT_TAU = 1.0 / 255.0
DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class LodQuery:
    """Detail level for one render: virtual distance scale and threshold.

    s_v >= 1 simulates viewing from s_v times farther away; tau is the base
    opacity threshold. tau * s_v >= 1 culls everything (permitted; check
    ``culls_everything``). eps keeps the falloff finite when the decay
    parameter is non-positive.
    """

    s_v: float = 1.0
    tau: float = DEFAULT_TAU
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.s_v < 1.0:
            raise ValueError(f"s_v must be >= 1, got {self.s_v}")
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")

    @property
    def threshold(self) -> float:
        return self.tau * self.s_v

    @property
    def culls_everything(self) -> bool:
        return self.threshold >= 1.0


@dataclass
class DistanceField:
    """Per-primitive camera distances for one view.

    ``normalized`` is distance divided by the maximum over in-frustum
    primitives (zero where out of frustum); when any primitive is in frustum
    the in-frustum maximum of ``normalized`` is exactly 1.
    """

    distances: np.ndarray   # (N,)
    normalized: np.ndarray  # (N,)
    in_frustum: np.ndarray  # (N,) bool
    max_distance: float     # 0.0 when nothing is in frustum
    argmax: int             # index attaining the max; -1 when empty


def compute_distances(scene, cam, sigma_cutoff: float = 3.0, projection=None) -> DistanceField:
    """Euclidean distances to the camera center, normalized per view.

    The in-frustum test is the same near/far + screen-bounds test the
    projector applies; pass ``projection`` to reuse an existing result.
    """
    from .projection import project_gaussians

    if projection is None:
        projection = project_gaussians(
            scene.positions, scene.log_scales, scene.rotations, cam,
            sigma_cutoff=sigma_cutoff,
        )
    positions = scene.positions.astype(np.float64)
    d = np.linalg.norm(positions - cam.center, axis=1)
    valid = projection.valid
    if not valid.any():
        return DistanceField(
            distances=d,
            normalized=np.zeros_like(d),
            in_frustum=valid,
            max_distance=0.0,
            argmax=-1,
        )
    masked = np.where(valid, d, -np.inf)
    argmax = int(np.argmax(masked))
    dmax = d[argmax]
    normalized = np.where(valid, d / dmax, 0.0)
    return DistanceField(
        distances=d, normalized=normalized, in_frustum=valid,
        max_distance=float(dmax), argmax=argmax,
    )


def attenuate_opacity(alpha, dprime, sigma_d, q: LodQuery):
    """Distance-attenuated opacity.

    alpha * exp(-(d' * s_v)^2 / (2 * relu(sigma_d)^2 + eps)), elementwise;
    scalars and arrays broadcast.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    dprime = np.asarray(dprime, dtype=np.float64)
    decay = np.maximum(np.asarray(sigma_d, dtype=np.float64), 0.0)
    scaled = dprime * q.s_v
    variance = 2.0 * decay * decay + q.eps
    return alpha * np.exp(-(scaled * scaled) / variance)


def attenuation_backward(alpha, dprime, sigma_d, q: LodQuery, d_alpha_pp):
    """Chain an upstream gradient on the attenuated opacity to its inputs.

    Returns (d_alpha, d_sigma_d, d_dprime). The ReLU kink uses subgradient 0
    at exactly zero.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    dprime = np.asarray(dprime, dtype=np.float64)
    sigma_d = np.asarray(sigma_d, dtype=np.float64)
    g = np.asarray(d_alpha_pp, dtype=np.float64)

    decay = np.maximum(sigma_d, 0.0)
    scaled = dprime * q.s_v
    variance = 2.0 * decay * decay + q.eps
    falloff = np.exp(-(scaled * scaled) / variance)

    d_alpha = g * falloff
    # alpha'' = alpha * exp(E), E = -(d' s_v)^2 / V
    d_exponent = g * alpha * falloff
    d_dprime = d_exponent * (-2.0 * dprime * q.s_v * q.s_v / variance)
    d_variance = d_exponent * (scaled * scaled / (variance * variance))
    d_sigma = d_variance * 4.0 * decay * (sigma_d > 0.0)
    return d_alpha, d_sigma, d_dprime


def distance_normalization_backward(
    field: DistanceField,
    positions: np.ndarray,
    cam_center: np.ndarray,
    d_dprime: np.ndarray,
) -> np.ndarray:
    """Gradient of the normalized distances w.r.t. world positions.

    Includes the coupling through the per-view maximum: perturbing the
    farthest in-frustum primitive rescales everyone's normalized distance.
    """
    n = positions.shape[0]
    grad = np.zeros((n, 3), dtype=np.float64)
    if field.argmax < 0:
        return grad
    valid = field.in_frustum
    dmax = field.max_distance
    pos = np.asarray(positions, dtype=np.float64)
    diff = pos - np.asarray(cam_center, dtype=np.float64)
    dist = field.distances
    safe = np.where(dist > 1e-12, dist, 1.0)
    units = diff / safe[:, None]

    g = np.where(valid, np.asarray(d_dprime, dtype=np.float64), 0.0)
    grad[valid] = (g[valid] / dmax)[:, None] * units[valid]
    # d(dmax) term: d'_i = d_i / dmax
    d_dmax = np.sum(g * (-dist / (dmax * dmax)), where=valid, initial=0.0)
    grad[field.argmax] += d_dmax * units[field.argmax]
    return grad


def soft_rendered_ratio_rational(alpha_pp, in_frustum, q: LodQuery, n_total: int) -> float:
    """Heavy-tailed soft count: mean of a''^2 / (a''^2 + (tau * s_v)^2).

    Alternative regularization surrogate. Exactly 0 for fully faded
    primitives, 0.5 at the threshold like the logistic, and ~1 once well
    above it, but its gradient decays polynomially instead of exponentially:
    the count regularizer keeps traction on primitives above the threshold
    (strongest just above it) instead of stalling. See the trainer for why
    this matters at small iteration budgets.
    """
    a = np.asarray(alpha_pp, dtype=np.float64)
    t2 = q.threshold * q.threshold
    soft = np.where(
        np.asarray(in_frustum, dtype=bool), a * a / (a * a + t2), 0.0
    )
    return float(soft.sum()) / float(n_total)


def soft_ratio_rational_backward(
    alpha_pp, in_frustum, q: LodQuery, n_total: int, d_ratio: float
) -> np.ndarray:
    a = np.asarray(alpha_pp, dtype=np.float64)
    t2 = q.threshold * q.threshold
    denom = a * a + t2
    grad = 2.0 * t2 * a / (denom * denom) / n_total * float(d_ratio)
    return np.where(np.asarray(in_frustum, dtype=bool), grad, 0.0)


def compute_mask(alpha_pp, in_frustum, q: LodQuery, n_total: int):
    """Rendering mask and the exact rendered-primitive ratio.

    A primitive renders iff it is in frustum and its attenuated opacity
    strictly exceeds tau * s_v. The ratio divides by the full scene count,
    in-frustum or not.
    """
    mask = np.asarray(in_frustum, dtype=bool) & (
        np.asarray(alpha_pp, dtype=np.float64) > q.threshold
    )
    return mask, float(mask.sum()) / float(n_total)


def soft_rendered_ratio(
    alpha_pp, in_frustum, q: LodQuery, n_total: int, temperature: float | None = None
) -> float:
    """Differentiable surrogate of the rendered ratio.

    Replaces the hard threshold indicator with a logistic of the margin at
    the given temperature (default tau); converges to the exact ratio as the
    temperature goes to zero. Used only inside the count-regularization
    loss, never for rendering.
    """
    t = q.tau if temperature is None else float(temperature)
    if t <= 0.0:
        raise ValueError("temperature must be positive")
    z = (np.asarray(alpha_pp, dtype=np.float64) - q.threshold) / t
    soft = np.where(np.asarray(in_frustum, dtype=bool), expit(z), 0.0)
    return float(soft.sum()) / float(n_total)


def soft_ratio_backward(
    alpha_pp, in_frustum, q: LodQuery, n_total: int,
    d_ratio: float, temperature: float | None = None,
) -> np.ndarray:
    """Upstream scalar gradient -> gradient on each attenuated opacity."""
    t = q.tau if temperature is None else float(temperature)
    z = (np.asarray(alpha_pp, dtype=np.float64) - q.threshold) / t
    s = expit(z)
    grad = s * (1.0 - s) / (t * n_total) * float(d_ratio)
    return np.where(np.asarray(in_frustum, dtype=bool), grad, 0.0)
