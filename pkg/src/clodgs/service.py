"""HTTP frame service: the boundary interactive viewers talk to.

Stateless with respect to rendering (a response depends only on the request
and the immutable scene); scenes are loaded once and cached under a lock.
"""

from __future__ import annotations

import base64
import math
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from . import __version__
from .camera import Camera, orbit_camera
from .clod import LodQuery
from .imgio import png_bytes
from .model import SceneError
from .ply import PlyError, load_ply
from .render import RenderConfig, RenderError, render


class OrbitPose(BaseModel):
    azimuth: float = 0.0
    elevation: float = 20.0
    radius: float = 3.0
    target: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])


class RenderRequest(BaseModel):
    scene: str
    width: int = 256
    height: int = 256
    s_v: float = 1.0
    tau: float = 1.0 / 255.0
    mode: str = "clod"  # "clod", "off", or "topk:N"
    world_to_camera: list[float] | None = None  # 16 floats, row-major
    orbit: OrbitPose | None = None
    fx: float | None = None
    fy: float | None = None
    cx: float | None = None
    cy: float | None = None
    fov_deg: float = 50.0


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class SceneStore:
    """Load-once scene cache over a directory of PLY files."""

    def __init__(self, scenes_dir: str | Path):
        self.scenes_dir = Path(scenes_dir)
        if not self.scenes_dir.is_dir():
            raise ServiceError(500, "bad_scenes_dir", f"not a directory: {scenes_dir}")
        self._cache: dict[str, object] = {}
        self._lock = threading.Lock()

    def listing(self) -> list[dict]:
        entries = []
        for path in sorted(self.scenes_dir.glob("*.ply")):
            entry: dict = {"id": path.stem, "file_mb": path.stat().st_size / (1024 * 1024)}
            try:
                scene = self.get(path.stem)
            except ServiceError as exc:
                entry["error"] = exc.message
                entries.append(entry)
                continue
            lo, hi = scene.bounds()
            entry.update(
                n_total=len(scene),
                sh_degree=scene.sh_degree,
                bounds={"min": [float(v) for v in lo], "max": [float(v) for v in hi]},
            )
            entries.append(entry)
        return entries

    def get(self, scene_id: str):
        if any(sep in scene_id for sep in ("/", "\\", "..")):
            raise ServiceError(400, "bad_scene_id", f"invalid scene id {scene_id!r}")
        with self._lock:
            if scene_id in self._cache:
                cached = self._cache[scene_id]
                if isinstance(cached, ServiceError):
                    raise cached
                return cached
        path = self.scenes_dir / f"{scene_id}.ply"
        if not path.exists():
            raise ServiceError(404, "unknown_scene", f"no scene named {scene_id!r}")
        try:
            scene = load_ply(path)
        except (PlyError, SceneError, OSError) as exc:
            err = ServiceError(422, "unloadable_scene", f"{path.name}: {exc}")
            with self._lock:
                self._cache[scene_id] = err
            raise err
        with self._lock:
            self._cache.setdefault(scene_id, scene)
            return self._cache[scene_id]


def _camera_from_request(req: RenderRequest, scene) -> Camera:
    if req.width < 1 or req.height < 1:
        raise ServiceError(400, "bad_size", "width/height must be positive")
    if req.world_to_camera is not None:
        if len(req.world_to_camera) != 16:
            raise ServiceError(
                400, "bad_pose", "world_to_camera must hold 16 row-major floats"
            )
        w2c = np.asarray(req.world_to_camera, dtype=np.float64).reshape(4, 4)
        f = 0.5 * req.width / math.tan(math.radians(req.fov_deg) / 2.0)
        try:
            return Camera(
                width=req.width, height=req.height,
                fx=req.fx if req.fx is not None else f,
                fy=req.fy if req.fy is not None else f,
                cx=req.cx if req.cx is not None else (req.width - 1) / 2.0,
                cy=req.cy if req.cy is not None else (req.height - 1) / 2.0,
                world_to_camera=w2c,
                near=0.01, far=1e6,
            )
        except ValueError as exc:
            raise ServiceError(400, "bad_pose", str(exc)) from exc
    orbit = req.orbit or OrbitPose(target=[float(v) for v in scene.centroid()])
    try:
        cam = orbit_camera(
            orbit.azimuth, orbit.elevation, max(orbit.radius, 1e-6),
            np.asarray(orbit.target, dtype=np.float64),
            req.width, req.height, fov_deg=req.fov_deg,
            near=1e-3 * max(orbit.radius, 1e-3), far=1e6,
        )
    except ValueError as exc:
        raise ServiceError(400, "bad_pose", str(exc)) from exc
    if req.fx is not None or req.fy is not None:
        cam = Camera(
            width=cam.width, height=cam.height,
            fx=req.fx or cam.fx, fy=req.fy or cam.fy,
            cx=req.cx if req.cx is not None else cam.cx,
            cy=req.cy if req.cy is not None else cam.cy,
            world_to_camera=cam.world_to_camera, near=cam.near, far=cam.far,
        )
    return cam


def _parse_mode(mode: str, n_total: int) -> tuple[str, int | None]:
    if mode in ("clod", "off"):
        return mode, None
    if mode.startswith("topk:"):
        try:
            k = int(mode.split(":", 1)[1])
        except ValueError as exc:
            raise ServiceError(400, "bad_mode", f"bad topk count in {mode!r}") from exc
        if k < 0 or k > n_total:
            raise ServiceError(400, "bad_mode", f"topk must be in [0, {n_total}]")
        return "topk", k
    raise ServiceError(400, "bad_mode", f"unknown mode {mode!r}")


def create_app(
    scenes_dir: str | Path,
    max_size: int = 1024,
    workers: int = 1,
) -> FastAPI:
    app = FastAPI(title="clodgs frame service", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SceneStore(scenes_dir)
    config = RenderConfig(workers=workers)

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/scenes")
    def scenes():
        return {"scenes": store.listing()}

    @app.post("/render")
    def render_frame(req: RenderRequest, request: Request):
        if req.width > max_size or req.height > max_size:
            raise ServiceError(
                413, "oversize", f"requested {req.width}x{req.height} exceeds {max_size}"
            )
        if req.s_v < 1.0:
            raise ServiceError(400, "bad_lod", "s_v must be >= 1")
        if not (0.0 < req.tau < 1.0):
            raise ServiceError(400, "bad_lod", "tau must be in (0, 1)")
        scene = store.get(req.scene)
        mode, topk = _parse_mode(req.mode, len(scene))
        cam = _camera_from_request(req, scene)
        lod = LodQuery(s_v=req.s_v, tau=req.tau)
        t0 = time.perf_counter()
        try:
            art = render(scene, cam, lod, config, mode=mode, topk=topk)
        except RenderError as exc:
            raise ServiceError(422, "render_failed", str(exc)) from exc
        ms = (time.perf_counter() - t0) * 1000.0
        png = png_bytes(art.image)
        stats = {
            "rendered_count": art.rendered_count,
            "n_total": art.n_total,
            "eta_actual": art.rendered_ratio,
            "render_ms": ms,
            "request": req.model_dump(),
        }
        accept = request.headers.get("accept", "")
        if "image/png" in accept:
            headers = {
                "X-Rendered-Count": str(art.rendered_count),
                "X-N-Total": str(art.n_total),
                "X-Eta-Actual": repr(art.rendered_ratio),
                "X-Render-Ms": f"{ms:.3f}",
            }
            return Response(content=png, media_type="image/png", headers=headers)
        stats["image_b64"] = base64.b64encode(png).decode("ascii")
        stats["format"] = "png"
        stats["width"] = req.width
        stats["height"] = req.height
        return stats

    return app


def serve(scenes_dir: str | Path, port: int = 7878, host: str = "127.0.0.1",
          max_size: int = 1024, workers: int = 1) -> None:
    import uvicorn

    uvicorn.run(
        create_app(scenes_dir, max_size=max_size, workers=workers),
        host=host, port=port, log_level="info",
    )
