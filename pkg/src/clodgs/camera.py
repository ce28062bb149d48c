"""Pinhole camera with a rigid world-to-camera transform.

Convention: camera looks down +z, +x right, +y down; a world point p maps to
view space as R @ p + t and to the image as (fx*x/z + cx, fy*y/z + cy) in
pixel-index coordinates (pixel (i, j) is centered at coordinate (j, i)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Camera:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray  # 4x4, rows [R | t; 0 0 0 1]
    near: float = 0.1
    far: float = 100.0
    _rotation: np.ndarray = field(init=False, repr=False)
    _translation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.world_to_camera = np.asarray(self.world_to_camera, dtype=np.float64)
        if self.world_to_camera.shape != (4, 4):
            raise ValueError("world_to_camera must be 4x4")
        if not (0.0 < self.near < self.far):
            raise ValueError(f"need 0 < near < far, got {self.near}, {self.far}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        r = self.world_to_camera[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-5):
            raise ValueError("world_to_camera rotation block is not orthonormal")
        self._rotation = r
        self._translation = self.world_to_camera[:3, 3]

    @property
    def rotation(self) -> np.ndarray:
        return self._rotation

    @property
    def translation(self) -> np.ndarray:
        return self._translation

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self._rotation.T @ self._translation

    def world_to_view(self, points: np.ndarray) -> np.ndarray:
        return points @ self._rotation.T + self._translation

    def project(self, points: np.ndarray) -> np.ndarray:
        """Perspective projection to pixel coordinates; no culling."""
        v = self.world_to_view(np.atleast_2d(points))
        z = v[:, 2]
        return np.stack(
            [self.fx * v[:, 0] / z + self.cx, self.fy * v[:, 1] / z + self.cy],
            axis=1,
        )

def look_at(
    eye: np.ndarray,
    target: np.ndarray,
    up: np.ndarray = (0.0, 0.0, 1.0),
) -> np.ndarray:
    """World-to-camera matrix for a camera at `eye` looking at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, upv)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        # view direction parallel to up; pick another up vector
        upv = np.array([0.0, 1.0, 0.0])
        right = np.cross(fwd, upv)
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)  # +y points down in view space
    r = np.stack([right, down, fwd], axis=0)
    w2c = np.eye(4)
    w2c[:3, :3] = r
    w2c[:3, 3] = -r @ eye
    return w2c


def orbit_camera(
    azimuth_deg: float,
    elevation_deg: float,
    radius: float,
    target: np.ndarray,
    width: int,
    height: int,
    fov_deg: float = 50.0,
    near: float = 0.05,
    far: float = 100.0,
) -> Camera:
    """Camera on a sphere around `target`, aimed at it."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    target = np.asarray(target, dtype=np.float64)
    offset = radius * np.array(
        [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)]
    )
    eye = target + offset
    f = 0.5 * width / math.tan(math.radians(fov_deg) / 2.0)
    return Camera(
        width=width,
        height=height,
        fx=f,
        fy=f,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        world_to_camera=look_at(eye, target),
        near=near,
        far=far,
    )
