"""Projection geometry against finite-difference and closed-form oracles."""

import numpy as np
import pytest

from clodgs.camera import Camera, look_at, orbit_camera
from clodgs.model import GaussianPrimitive
from clodgs.projection import (
    build_covariance_3d,
    project_gaussian,
    project_gaussians,
    quat_to_rotmat,
)


def _identity_cam(width=64, height=64, f=60.0):
    return Camera(
        width=width, height=height, fx=f, fy=f,
        cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        world_to_camera=np.eye(4), near=0.1, far=100.0,
    )


def _primitive(position, scale=0.05, quat=(1, 0, 0, 0)):
    return GaussianPrimitive(
        position=np.asarray(position, dtype=np.float64),
        log_scale=np.full(3, np.log(scale)),
        rotation=np.asarray(quat, dtype=np.float64),
        opacity_logit=0.0,
        sh_coeffs=np.zeros((3, 4)),
        sigma_d=5.0,
    )


class TestCamera:
    def test_rejects_bad_clip_planes(self):
        with pytest.raises(ValueError):
            _ = Camera(32, 32, 30, 30, 15.5, 15.5, np.eye(4), near=1.0, far=0.5)

    def test_rejects_non_orthonormal_rotation(self):
        m = np.eye(4)
        m[0, 1] = 0.1
        with pytest.raises(ValueError, match="orthonormal"):
            Camera(32, 32, 30, 30, 15.5, 15.5, m)

    def test_look_at_centers_target(self):
        cam = orbit_camera(33.0, 12.0, 4.0, [0.3, -0.2, 0.5], 64, 64)
        uv = cam.project(np.array([[0.3, -0.2, 0.5]]))[0]
        assert uv[0] == pytest.approx(cam.cx, abs=1e-9)
        assert uv[1] == pytest.approx(cam.cy, abs=1e-9)

    def test_center_inverts_transform(self):
        w2c = look_at(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 0.0]))
        cam = Camera(32, 32, 30, 30, 15.5, 15.5, w2c)
        np.testing.assert_allclose(cam.center, [1.0, 2.0, 3.0], atol=1e-12)


class TestProjectGaussian:
    def test_on_axis_projects_to_principal_point(self):
        cam = _identity_cam()
        splat = project_gaussian(_primitive([0.0, 0.0, 2.0]), cam)
        np.testing.assert_allclose(splat.mean2d, [cam.cx, cam.cy], atol=1e-12)
        assert splat.depth == pytest.approx(2.0)

    def test_behind_camera_culled(self):
        cam = _identity_cam()
        assert project_gaussian(_primitive([0.0, 0.0, -1.0]), cam) is None

    def test_beyond_far_culled(self):
        cam = _identity_cam()
        assert project_gaussian(_primitive([0.0, 0.0, 1000.0]), cam) is None

    def test_far_off_screen_culled(self):
        cam = _identity_cam()
        assert project_gaussian(_primitive([50.0, 0.0, 2.0]), cam) is None

    def test_isotropic_cov2d_closed_form(self):
        # isotropic scale s at depth z on the axis: cov2d ~ (f s / z)^2 I
        f, s, z = 60.0, 0.05, 2.0
        cam = _identity_cam(f=f)
        splat = project_gaussian(_primitive([0.0, 0.0, z], scale=s), cam)
        expect = (f * s / z) ** 2 * np.eye(2)
        from clodgs.projection import LOWPASS

        np.testing.assert_allclose(splat.cov2d - LOWPASS * np.eye(2), expect, rtol=1e-9)

    def test_cov2d_matches_fd_jacobian_oracle(self):
        # push the 3D covariance through a numerically differentiated
        # projection map and compare
        rng = np.random.default_rng(3)
        cam = orbit_camera(20.0, 15.0, 3.0, [0, 0, 0], 64, 64)
        pos = np.array([0.2, -0.1, 0.3])
        logs = np.log(np.array([0.05, 0.08, 0.03]))
        quat = rng.normal(size=4)
        quat /= np.linalg.norm(quat)

        res = project_gaussians(pos[None], logs[None], quat[None], cam)
        assert res.valid[0]

        def proj(p):
            v = cam.world_to_view(p[None])[0]
            return np.array(
                [cam.fx * v[0] / v[2] + cam.cx, cam.fy * v[1] / v[2] + cam.cy]
            )

        h = 1e-6
        jac = np.zeros((2, 3))
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            jac[:, k] = (proj(pos + dp) - proj(pos - dp)) / (2 * h)
        sigma = build_covariance_3d(logs[None], quat[None])[0]
        expect = jac @ sigma @ jac.T
        from clodgs.projection import LOWPASS

        np.testing.assert_allclose(
            res.cov2d[0] - LOWPASS * np.eye(2), expect, rtol=1e-4, atol=1e-9
        )

    def test_cov2d_positive_definite_after_floor(self):
        rng = np.random.default_rng(5)
        n = 200
        pos = rng.uniform(-1, 1, (n, 3))
        logs = rng.uniform(np.log(1e-4), np.log(0.2), (n, 3))
        quat = rng.normal(size=(n, 4))
        quat /= np.linalg.norm(quat, axis=1, keepdims=True)
        cam = orbit_camera(0.0, 10.0, 3.0, [0, 0, 0], 64, 64)
        res = project_gaussians(pos, logs, quat, cam)
        c = res.cov2d[res.valid]
        det = c[:, 0, 0] * c[:, 1, 1] - c[:, 0, 1] ** 2
        assert (det > 0).all()
        assert (c[:, 0, 0] > 0).all()


class TestQuaternions:
    def test_rotmat_orthonormal(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(50, 4))
        r = quat_to_rotmat(q)
        eye = np.einsum("nij,nkj->nik", r, r)
        np.testing.assert_allclose(eye, np.tile(np.eye(3), (50, 1, 1)), atol=1e-12)

    def test_identity_quat(self):
        r = quat_to_rotmat(np.array([[1.0, 0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(r[0], np.eye(3), atol=1e-15)
