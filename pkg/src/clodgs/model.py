"""Scene representation: anisotropic Gaussian primitives with a per-primitive
distance-decay parameter, plus the camera-set container used for training."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

DEFAULT_SIGMA_D = 5.0

# (degree + 1)^2 spherical-harmonic coefficients per color channel
SH_DIMS = {0: 1, 1: 4, 2: 9, 3: 16}


class SceneError(ValueError):
    """Raised when a scene violates a structural invariant."""


@dataclass
class GaussianPrimitive:
    """One splat.

    Attributes:
        position: world-space mean, shape (3,).
        log_scale: log of per-axis standard deviations, shape (3,).
        rotation: unit quaternion (w, x, y, z), shape (4,).
        opacity_logit: base opacity is logistic(opacity_logit).
        sh_coeffs: spherical-harmonic color coefficients, shape (3, B).
        sigma_d: unconstrained distance-decay parameter; the effective
            decay uses ReLU(sigma_d).
    """

    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: float
    sh_coeffs: np.ndarray
    sigma_d: float = DEFAULT_SIGMA_D

    @property
    def opacity(self) -> float:
        return float(expit(self.opacity_logit))


class GaussianScene:
    """Ordered collection of Gaussian primitives, stored as flat arrays.

    Arrays share a dtype (float32 by default, float64 for gradient-check
    work) and a first dimension of length ``len(scene)``. ``sh_coeffs`` has
    shape (N, 3, B) with B = (sh_degree + 1)^2.
    """

    def __init__(
        self,
        positions: np.ndarray,
        log_scales: np.ndarray,
        rotations: np.ndarray,
        opacity_logits: np.ndarray,
        sh_coeffs: np.ndarray,
        sigma_d: np.ndarray,
        sh_degree: int,
        background: tuple[float, float, float] = (0.0, 0.0, 0.0),
        validate: bool = True,
    ):
        dtype = np.asarray(positions).dtype
        self.positions = np.ascontiguousarray(positions, dtype=dtype)
        self.log_scales = np.ascontiguousarray(log_scales, dtype=dtype)
        self.rotations = np.ascontiguousarray(rotations, dtype=dtype)
        self.opacity_logits = np.ascontiguousarray(opacity_logits, dtype=dtype)
        self.sh_coeffs = np.ascontiguousarray(sh_coeffs, dtype=dtype)
        self.sigma_d = np.ascontiguousarray(sigma_d, dtype=dtype)
        self.sh_degree = int(sh_degree)
        self.background = np.asarray(background, dtype=np.float64)
        if validate:
            self.validate()

    # -- structural checks -------------------------------------------------

    def validate(self) -> None:
        n = len(self)
        if n < 1:
            raise SceneError("scene must contain at least one primitive")
        if self.sh_degree not in SH_DIMS:
            raise SceneError(f"sh_degree must be 0..3, got {self.sh_degree}")
        b = SH_DIMS[self.sh_degree]
        shapes = {
            "positions": (n, 3),
            "log_scales": (n, 3),
            "rotations": (n, 4),
            "opacity_logits": (n,),
            "sh_coeffs": (n, 3, b),
            "sigma_d": (n,),
        }
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise SceneError(f"{name} has shape {got}, expected {want}")
        norms = np.linalg.norm(self.rotations.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > 1e-6)[0]
        if bad.size:
            raise SceneError(
                f"rotation at primitive {bad[0]} is not unit-norm "
                f"(|q| = {norms[bad[0]]:.8f})"
            )
        if not (0.0 <= self.background.min() and self.background.max() <= 1.0):
            raise SceneError("background must lie in [0, 1]^3")

    def check_finite(self) -> None:
        """Raise naming the first non-finite parameter, for render errors."""
        for name in ("positions", "log_scales", "rotations", "opacity_logits",
                     "sh_coeffs", "sigma_d"):
            arr = getattr(self, name)
            finite = np.isfinite(arr)
            if not finite.all():
                idx = int(np.argwhere(~finite)[0][0])
                raise SceneError(f"non-finite {name} at primitive {idx}")

    # -- sequence protocol --------------------------------------------------

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, i: int) -> GaussianPrimitive:
        return GaussianPrimitive(
            position=self.positions[i].copy(),
            log_scale=self.log_scales[i].copy(),
            rotation=self.rotations[i].copy(),
            opacity_logit=float(self.opacity_logits[i]),
            sh_coeffs=self.sh_coeffs[i].copy(),
            sigma_d=float(self.sigma_d[i]),
        )

    @classmethod
    def from_primitives(
        cls,
        primitives: list[GaussianPrimitive],
        sh_degree: int,
        background: tuple[float, float, float] = (0.0, 0.0, 0.0),
        dtype=np.float32,
    ) -> "GaussianScene":
        if not primitives:
            raise SceneError("scene must contain at least one primitive")
        return cls(
            positions=np.array([p.position for p in primitives], dtype=dtype),
            log_scales=np.array([p.log_scale for p in primitives], dtype=dtype),
            rotations=np.array([p.rotation for p in primitives], dtype=dtype),
            opacity_logits=np.array([p.opacity_logit for p in primitives], dtype=dtype),
            sh_coeffs=np.array([p.sh_coeffs for p in primitives], dtype=dtype),
            sigma_d=np.array([p.sigma_d for p in primitives], dtype=dtype),
            sh_degree=sh_degree,
            background=background,
        )

    # -- derived quantities ---------------------------------------------------

    @property
    def sh_dim(self) -> int:
        return SH_DIMS[self.sh_degree]

    @property
    def opacities(self) -> np.ndarray:
        return expit(self.opacity_logits.astype(np.float64))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.positions.astype(np.float64)
        return p.min(axis=0), p.max(axis=0)

    def centroid(self) -> np.ndarray:
        return self.positions.astype(np.float64).mean(axis=0)

    def extent(self) -> float:
        """Radius of the bounding sphere around the centroid."""
        p = self.positions.astype(np.float64)
        return float(np.linalg.norm(p - self.centroid(), axis=1).max())

    # -- copies ---------------------------------------------------------------

    def astype(self, dtype) -> "GaussianScene":
        return GaussianScene(
            self.positions.astype(dtype),
            self.log_scales.astype(dtype),
            self.rotations.astype(dtype),
            self.opacity_logits.astype(dtype),
            self.sh_coeffs.astype(dtype),
            self.sigma_d.astype(dtype),
            self.sh_degree,
            tuple(self.background),
            validate=False,
        )

    def copy(self) -> "GaussianScene":
        return self.astype(self.positions.dtype)

    def equals(self, other: "GaussianScene") -> bool:
        """Field-for-field bitwise equality (same dtype, same values)."""
        if len(self) != len(other) or self.sh_degree != other.sh_degree:
            return False
        for name in ("positions", "log_scales", "rotations", "opacity_logits",
                     "sh_coeffs", "sigma_d"):
            a, b = getattr(self, name), getattr(other, name)
            if a.dtype != b.dtype or a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return True


@dataclass
class CameraSet:
    """Cameras paired with ground-truth image paths, sharing one resolution."""

    cameras: list = field(default_factory=list)
    image_paths: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.cameras) != len(self.image_paths):
            raise ValueError("cameras and image_paths must have equal length")
        sizes = {(c.width, c.height) for c in self.cameras}
        if len(sizes) > 1:
            raise ValueError(f"all cameras must share one resolution, got {sizes}")

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self):
        return iter(zip(self.cameras, self.image_paths))

    def load_images(self) -> list[np.ndarray]:
        from .imgio import load_image

        return [load_image(p) for p in self.image_paths]

    def to_json(self, path: str | Path, relative_to: str | Path | None = None) -> None:
        """Persist as {width, height, fx, fy, cx, cy, frames: [...]}."""
        if not self.cameras:
            raise ValueError("cannot serialize an empty camera set")
        c0 = self.cameras[0]
        frames = []
        for cam, img in zip(self.cameras, self.image_paths):
            p = Path(img)
            if relative_to is not None:
                p = p.relative_to(relative_to)
            frames.append(
                {
                    "world_to_camera": [float(v) for v in cam.world_to_camera.reshape(-1)],
                    "image": str(p),
                }
            )
        doc = {
            "width": c0.width,
            "height": c0.height,
            "fx": c0.fx,
            "fy": c0.fy,
            "cx": c0.cx,
            "cy": c0.cy,
            "near": c0.near,
            "far": c0.far,
            "frames": frames,
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "CameraSet":
        from .camera import Camera

        path = Path(path)
        doc = json.loads(path.read_text())
        cams, imgs = [], []
        for fr in doc["frames"]:
            w2c = np.asarray(fr["world_to_camera"], dtype=np.float64).reshape(4, 4)
            cams.append(
                Camera(
                    width=int(doc["width"]),
                    height=int(doc["height"]),
                    fx=float(doc["fx"]),
                    fy=float(doc["fy"]),
                    cx=float(doc["cx"]),
                    cy=float(doc["cy"]),
                    world_to_camera=w2c,
                    near=float(doc.get("near", 0.1)),
                    far=float(doc.get("far", 100.0)),
                )
            )
            img = Path(fr["image"])
            if not img.is_absolute():
                img = path.parent / img
            imgs.append(str(img))
        return cls(cameras=cams, image_paths=imgs)
