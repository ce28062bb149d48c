"""Perspective projection of 3D Gaussians to screen-space 2D Gaussians.

The 3D covariance is built from a unit quaternion and per-axis log scales,
rotated into view space, and pushed through the first-order (Jacobian)
approximation of the perspective map. A fixed low-pass floor is added to the
2D covariance diagonal so sub-pixel splats stay well-conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera

# Pixel^2 added to the projected covariance diagonal (anti-aliasing floor).
LOWPASS = 0.3

# View-space x/z and y/z ratios are clamped to 1.3x the frustum half-tangent
# inside the Jacobian, which keeps the linearization sane for splats whose
# center lies far outside the image while their footprint still touches it.
_FRUSTUM_MARGIN = 1.3


@dataclass
class ProjectedSplat:
    """Screen-space view of one primitive (spec-facing record)."""

    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    alpha_eff: float
    source_index: int


@dataclass
class ProjectionResult:
    """Vectorized projection of a whole scene.

    ``valid`` marks primitives that pass the near/far clip and whose
    ``sigma_cutoff``-sigma screen ellipse overlaps the image; everything else
    is culled. Rows of the other arrays are defined only where valid.
    """

    valid: np.ndarray     # (N,) bool
    mean2d: np.ndarray    # (N, 2)
    cov2d: np.ndarray     # (N, 2, 2), low-pass floor included
    depth: np.ndarray     # (N,) view-space z
    radius: np.ndarray    # (N,) cutoff ellipse radius in pixels
    view_pos: np.ndarray  # (N, 3) view-space positions


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Unit-normalized quaternions (N, 4), (w, x, y, z) -> (N, 3, 3)."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    r[:, 0, 0] = 1 - 2 * (y * y + z * z)
    r[:, 0, 1] = 2 * (x * y - w * z)
    r[:, 0, 2] = 2 * (x * z + w * y)
    r[:, 1, 0] = 2 * (x * y + w * z)
    r[:, 1, 1] = 1 - 2 * (x * x + z * z)
    r[:, 1, 2] = 2 * (y * z - w * x)
    r[:, 2, 0] = 2 * (x * z - w * y)
    r[:, 2, 1] = 2 * (y * z + w * x)
    r[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return r


def _rotmat_quat_partials(q: np.ndarray) -> np.ndarray:
    """dR/dq for unit quaternions: (N, 3, 3, 4)."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    d = np.empty((q.shape[0], 3, 3, 4), dtype=np.float64)
    # dR/dw, dR/dx, dR/dy, dR/dz stacked on the last axis
    d[:, 0, 0] = np.stack([zero, zero, -4 * y, -4 * z], axis=-1)
    d[:, 0, 1] = np.stack([-2 * z, 2 * y, 2 * x, -2 * w], axis=-1)
    d[:, 0, 2] = np.stack([2 * y, 2 * z, 2 * w, 2 * x], axis=-1)
    d[:, 1, 0] = np.stack([2 * z, 2 * y, 2 * x, 2 * w], axis=-1)
    d[:, 1, 1] = np.stack([zero, -4 * x, zero, -4 * z], axis=-1)
    d[:, 1, 2] = np.stack([-2 * x, -2 * w, 2 * z, 2 * y], axis=-1)
    d[:, 2, 0] = np.stack([-2 * y, 2 * z, -2 * w, 2 * x], axis=-1)
    d[:, 2, 1] = np.stack([2 * x, 2 * w, 2 * z, 2 * y], axis=-1)
    d[:, 2, 2] = np.stack([zero, -4 * x, -4 * y, zero], axis=-1)
    return d


def build_covariance_3d(log_scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Sigma = R diag(s) diag(s) R^T with s = exp(log_scales); (N, 3, 3)."""
    s = np.exp(np.asarray(log_scales, dtype=np.float64))
    r = quat_to_rotmat(rotations)
    m = r * s[:, None, :]
    return m @ np.swapaxes(m, 1, 2)


def _view_jacobian(view_pos: np.ndarray, cam: Camera) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """2x3 Jacobian of the perspective map at each view-space point.

    Returns (J, inx, iny) where inx/iny flag points whose x/z (resp. y/z)
    ratio was inside the clamp window (their Jacobian varies with x resp. y).
    """
    tx, ty, tz = view_pos[:, 0], view_pos[:, 1], view_pos[:, 2]
    lim_x = _FRUSTUM_MARGIN * 0.5 * cam.width / cam.fx
    lim_y = _FRUSTUM_MARGIN * 0.5 * cam.height / cam.fy
    with np.errstate(divide="ignore", invalid="ignore"):
        rx = tx / tz
        ry = ty / tz
    inx = np.abs(rx) <= lim_x
    iny = np.abs(ry) <= lim_y
    cx = np.clip(rx, -lim_x, lim_x)
    cy = np.clip(ry, -lim_y, lim_y)
    j = np.zeros((view_pos.shape[0], 2, 3), dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        j[:, 0, 0] = cam.fx / tz
        j[:, 0, 2] = -cam.fx * cx / tz
        j[:, 1, 1] = cam.fy / tz
        j[:, 1, 2] = -cam.fy * cy / tz
    return j, inx, iny


def project_gaussians(
    positions: np.ndarray,
    log_scales: np.ndarray,
    rotations: np.ndarray,
    cam: Camera,
    sigma_cutoff: float = 3.0,
    lowpass: float = LOWPASS,
) -> ProjectionResult:
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    view = positions @ cam.rotation.T + cam.translation
    depth = view[:, 2]
    valid = (depth > cam.near) & (depth < cam.far)

    with np.errstate(divide="ignore", invalid="ignore"):
        mean2d = np.stack(
            [
                cam.fx * view[:, 0] / depth + cam.cx,
                cam.fy * view[:, 1] / depth + cam.cy,
            ],
            axis=1,
        )

    sigma = build_covariance_3d(log_scales, rotations)
    v_cov = np.einsum("ij,njk,lk->nil", cam.rotation, sigma, cam.rotation)
    j, _, _ = _view_jacobian(view, cam)
    cov2d = np.einsum("nij,njk,nlk->nil", j, v_cov, j)
    cov2d[:, 0, 0] += lowpass
    cov2d[:, 1, 1] += lowpass

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    mid = 0.5 * (a + c)
    det = a * c - b * b
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = sigma_cutoff * np.sqrt(np.maximum(lam_max, 0.0))

    u, v = mean2d[:, 0], mean2d[:, 1]
    with np.errstate(invalid="ignore"):
        onscreen = (
            (u + radius >= 0.0)
            & (u - radius <= cam.width - 1.0)
            & (v + radius >= 0.0)
            & (v - radius <= cam.height - 1.0)
        )
    valid &= onscreen

    # scrub culled rows so downstream vectorized math never sees NaN/inf
    bad = ~valid
    if bad.any():
        mean2d[bad] = 0.0
        cov2d[bad] = np.eye(2)
        radius[bad] = 0.0

    return ProjectionResult(
        valid=valid, mean2d=mean2d, cov2d=cov2d, depth=depth,
        radius=radius, view_pos=view,
    )


def project_gaussian(primitive, cam: Camera, sigma_cutoff: float = 3.0):
    """Single-primitive projection; returns ProjectedSplat or None if culled.

    Color is the SH evaluation along the actual view ray and alpha_eff the
    base opacity; the render pipeline substitutes the attenuated opacity.
    """
    from .sh import evaluate_sh

    res = project_gaussians(
        primitive.position[None, :],
        primitive.log_scale[None, :],
        primitive.rotation[None, :],
        cam,
        sigma_cutoff=sigma_cutoff,
    )
    if not res.valid[0]:
        return None
    delta = primitive.position.astype(np.float64) - cam.center
    view_dir = delta / np.linalg.norm(delta)
    degree = int(np.sqrt(primitive.sh_coeffs.shape[1])) - 1
    return ProjectedSplat(
        mean2d=res.mean2d[0],
        cov2d=res.cov2d[0],
        depth=float(res.depth[0]),
        color=evaluate_sh(primitive.sh_coeffs, view_dir, degree),
        alpha_eff=primitive.opacity,
        source_index=0,
    )


def projection_backward(
    positions: np.ndarray,
    log_scales: np.ndarray,
    rotations: np.ndarray,
    cam: Camera,
    d_mean2d: np.ndarray,
    d_cov2d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adjoint of project_gaussians for a subset of primitives.

    Args:
        positions, log_scales, rotations: (M, ...) parameter rows of the
            primitives that received screen-space gradients.
        d_mean2d: (M, 2) upstream gradient.
        d_cov2d: (M, 2, 2) upstream gradient on the full 2x2 covariance
            (low-pass floor is additive, so it passes through unchanged).

    Returns:
        (d_position, d_log_scale, d_rotation) with shapes matching inputs.
        The rotation gradient is w.r.t. the stored quaternion, including the
        normalization chain.
    """
    positions = np.asarray(positions, dtype=np.float64)
    log_scales = np.asarray(log_scales, dtype=np.float64)
    rotations = np.asarray(rotations, dtype=np.float64)

    view = positions @ cam.rotation.T + cam.translation
    tx, ty, tz = view[:, 0], view[:, 1], view[:, 2]

    qnorm = np.linalg.norm(rotations, axis=1, keepdims=True)
    qhat = rotations / qnorm
    rot = quat_to_rotmat(qhat)
    s = np.exp(log_scales)
    m = rot * s[:, None, :]
    sigma = m @ np.swapaxes(m, 1, 2)
    v_cov = np.einsum("ij,njk,lk->nil", cam.rotation, sigma, cam.rotation)
    j, inx, iny = _view_jacobian(view, cam)

    # cov2d = J V J^T:  dV = J^T G J,  dJ = (G + G^T) J V
    g = np.asarray(d_cov2d, dtype=np.float64)
    d_v = np.einsum("nji,njk,nkl->nil", j, g, j)
    d_j = np.einsum("nij,njk,nkl->nil", g + np.swapaxes(g, 1, 2), j, v_cov)

    # view-space gradient from the Jacobian entries
    fx, fy = cam.fx, cam.fy
    d_tx = np.where(inx, d_j[:, 0, 2] * (-fx / tz**2), 0.0)
    d_ty = np.where(iny, d_j[:, 1, 2] * (-fy / tz**2), 0.0)
    d_tz = d_j[:, 0, 0] * (-fx / tz**2) + d_j[:, 1, 1] * (-fy / tz**2)
    lim_x = _FRUSTUM_MARGIN * 0.5 * cam.width / fx
    lim_y = _FRUSTUM_MARGIN * 0.5 * cam.height / fy
    cxr = np.clip(tx / tz, -lim_x, lim_x)
    cyr = np.clip(ty / tz, -lim_y, lim_y)
    d_tz += d_j[:, 0, 2] * np.where(inx, 2 * fx * tx / tz**3, fx * cxr / tz**2)
    d_tz += d_j[:, 1, 2] * np.where(iny, 2 * fy * ty / tz**3, fy * cyr / tz**2)

    # ... and from the projected mean
    du, dv = d_mean2d[:, 0], d_mean2d[:, 1]
    d_tx += du * fx / tz
    d_ty += dv * fy / tz
    d_tz += du * (-fx * tx / tz**2) + dv * (-fy * ty / tz**2)

    d_view = np.stack([d_tx, d_ty, d_tz], axis=1)
    d_position = d_view @ cam.rotation

    # Sigma = M M^T with M = R diag(s)
    d_sigma = np.einsum("ji,njk,kl->nil", cam.rotation, d_v, cam.rotation)
    d_m = np.einsum("nij,njk->nik", d_sigma + np.swapaxes(d_sigma, 1, 2), m)
    d_rot = d_m * s[:, None, :]
    d_s = np.einsum("nik,nik->nk", rot, d_m)
    d_log_scale = d_s * s

    partials = _rotmat_quat_partials(qhat)
    d_qhat = np.einsum("nij,nijk->nk", d_rot, partials)
    # through the normalization: dq = (I - qhat qhat^T) dqhat / |q|
    d_rotation = (d_qhat - qhat * np.sum(d_qhat * qhat, axis=1, keepdims=True)) / qnorm

    return d_position, d_log_scale, d_rotation
