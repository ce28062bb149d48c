"""Real spherical-harmonic basis for view-dependent color, degrees 0-3.

Sign and ordering conventions match the common splat interchange format, so
imported models render with correct colors. Evaluated colors carry the usual
+0.5 offset and are clamped at zero.
"""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.4453057213202769,
    -0.5900435899266435,
)


def sh_basis(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Basis values for unit directions; returns (N, (degree+1)^2)."""
    if degree not in (0, 1, 2, 3):
        raise ValueError(f"degree must be 0..3, got {degree}")
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n = dirs.shape[0]
    out = np.empty((n, (degree + 1) ** 2), dtype=np.float64)
    out[:, 0] = C0
    if degree < 1:
        return out
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    out[:, 1] = -C1 * y
    out[:, 2] = C1 * z
    out[:, 3] = -C1 * x
    if degree < 2:
        return out
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    out[:, 4] = C2[0] * xy
    out[:, 5] = C2[1] * yz
    out[:, 6] = C2[2] * (2.0 * zz - xx - yy)
    out[:, 7] = C2[3] * xz
    out[:, 8] = C2[4] * (xx - yy)
    if degree < 3:
        return out
    out[:, 9] = C3[0] * y * (3.0 * xx - yy)
    out[:, 10] = C3[1] * xy * z
    out[:, 11] = C3[2] * y * (4.0 * zz - xx - yy)
    out[:, 12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[:, 13] = C3[4] * x * (4.0 * zz - xx - yy)
    out[:, 14] = C3[5] * z * (xx - yy)
    out[:, 15] = C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_basis_grad(dirs: np.ndarray, degree: int) -> np.ndarray:
    """d(basis)/d(direction) for unit directions; returns (N, B, 3)."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n = dirs.shape[0]
    b = (degree + 1) ** 2
    g = np.zeros((n, b, 3), dtype=np.float64)
    if degree < 1:
        return g
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    g[:, 1, 1] = -C1
    g[:, 2, 2] = C1
    g[:, 3, 0] = -C1
    if degree < 2:
        return g
    g[:, 4, 0] = C2[0] * y
    g[:, 4, 1] = C2[0] * x
    g[:, 5, 1] = C2[1] * z
    g[:, 5, 2] = C2[1] * y
    g[:, 6, 0] = -2.0 * C2[2] * x
    g[:, 6, 1] = -2.0 * C2[2] * y
    g[:, 6, 2] = 4.0 * C2[2] * z
    g[:, 7, 0] = C2[3] * z
    g[:, 7, 2] = C2[3] * x
    g[:, 8, 0] = 2.0 * C2[4] * x
    g[:, 8, 1] = -2.0 * C2[4] * y
    if degree < 3:
        return g
    xx, yy, zz = x * x, y * y, z * z
    g[:, 9, 0] = C3[0] * 6.0 * x * y
    g[:, 9, 1] = C3[0] * (3.0 * xx - 3.0 * yy)
    g[:, 10, 0] = C3[1] * y * z
    g[:, 10, 1] = C3[1] * x * z
    g[:, 10, 2] = C3[1] * x * y
    g[:, 11, 0] = -2.0 * C3[2] * x * y
    g[:, 11, 1] = C3[2] * (4.0 * zz - xx - 3.0 * yy)
    g[:, 11, 2] = 8.0 * C3[2] * y * z
    g[:, 12, 0] = -6.0 * C3[3] * x * z
    g[:, 12, 1] = -6.0 * C3[3] * y * z
    g[:, 12, 2] = C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)
    g[:, 13, 0] = C3[4] * (4.0 * zz - 3.0 * xx - yy)
    g[:, 13, 1] = -2.0 * C3[4] * x * y
    g[:, 13, 2] = 8.0 * C3[4] * x * z
    g[:, 14, 0] = 2.0 * C3[5] * x * z
    g[:, 14, 1] = -2.0 * C3[5] * y * z
    g[:, 14, 2] = C3[5] * (xx - yy)
    g[:, 15, 0] = C3[6] * (3.0 * xx - 3.0 * yy)
    g[:, 15, 1] = -6.0 * C3[6] * x * y
    return g


def evaluate_sh(sh_coeffs: np.ndarray, view_dir: np.ndarray, degree: int) -> np.ndarray:
    """RGB from SH coefficients at unit view directions.

    Args:
        sh_coeffs: (3, B) for one primitive or (N, 3, B) batched.
        view_dir: (3,) or (N, 3) unit vectors.
        degree: evaluation degree; must not exceed the stored basis size.

    Returns:
        (3,) or (N, 3) colors, offset by +0.5 and clamped at zero.
    """
    coeffs = np.asarray(sh_coeffs, dtype=np.float64)
    single = coeffs.ndim == 2
    if single:
        coeffs = coeffs[None]
    b_avail = coeffs.shape[2]
    b_used = (degree + 1) ** 2
    if b_used > b_avail:
        raise ValueError(
            f"degree {degree} needs {b_used} coefficients, scene stores {b_avail}"
        )
    dirs = np.atleast_2d(np.asarray(view_dir, dtype=np.float64))
    norms = np.linalg.norm(dirs, axis=1)
    if np.abs(norms - 1.0).max() > 1e-6:
        raise ValueError("view_dir must be unit-length")
    basis = sh_basis(dirs, degree)
    raw = np.einsum("ncb,nb->nc", coeffs[:, :, :b_used], basis) + 0.5
    color = np.maximum(raw, 0.0)
    return color[0] if single else color


def evaluate_sh_with_grad(
    sh_coeffs: np.ndarray, view_dir: np.ndarray, degree: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched colors plus what the backward pass needs.

    Returns:
        color: (N, 3) clamped colors.
        basis: (N, B_used) basis values (d color / d coeff before clamping).
        dcolor_ddir: (N, 3, 3) Jacobian w.r.t. the unit direction, zeroed
            where the lower clamp is active.
    """
    coeffs = np.asarray(sh_coeffs, dtype=np.float64)
    dirs = np.atleast_2d(np.asarray(view_dir, dtype=np.float64))
    b_used = (degree + 1) ** 2
    basis = sh_basis(dirs, degree)
    raw = np.einsum("ncb,nb->nc", coeffs[:, :, :b_used], basis) + 0.5
    active = (raw > 0.0).astype(np.float64)
    color = np.maximum(raw, 0.0)
    bgrad = sh_basis_grad(dirs, degree)
    dcolor_ddir = np.einsum("ncb,nbk->nck", coeffs[:, :, :b_used], bgrad)
    dcolor_ddir *= active[:, :, None]
    return color, basis, dcolor_ddir
