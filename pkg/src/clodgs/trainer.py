"""Coarse-to-fine training loop.

Each iteration renders one camera (round-robin) at a virtual distance scale
drawn from U(1, s_max), backpropagates the weighted render + count
regularization objective, and applies per-class adaptive-moment updates.
The LoD mechanism is bypassed entirely for the first
``mechanism_start_iter`` iterations, during which the loop is plain splat
fitting on the fixed primitive set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .clod import (
    DEFAULT_TAU,
    LodQuery,
    soft_ratio_backward,
    soft_ratio_rational_backward,
    soft_rendered_ratio,
    soft_rendered_ratio_rational,
)
from .model import GaussianScene
from .optim import Adam
from .ply import save_ply
from .render import (
    ParamGradients,
    RenderConfig,
    attenuation_gradients,
    render,
    render_with_gradients,
)

PARAM_NAMES = ("position", "log_scale", "rotation", "opacity_logit", "sh_coeffs", "sigma_d")

_SCENE_FIELDS = {
    "position": "positions",
    "log_scale": "log_scales",
    "rotation": "rotations",
    "opacity_logit": "opacity_logits",
    "sh_coeffs": "sh_coeffs",
    "sigma_d": "sigma_d",
}


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 30000
    mechanism_start_iter: int = 5000
    s_max: float = 5.0
    lambda_reg: float = 1.0
    lambda_dssim: float = 0.2
    tau: float = DEFAULT_TAU
    use_adaptive_weight: bool = True
    lr_position: float = 1.6e-4
    lr_position_final: float = 1.6e-6
    lr_opacity: float = 0.05
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3
    lr_sh: float = 2.5e-3
    lr_sigma_d: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-15
    seed: int = 0
    checkpoint_every: int = 0  # 0 disables periodic checkpoints
    workers: int = 1
    soft_temperature: float | None = None  # None -> tau (logistic surrogate only)
    # Soft count surrogate inside the regularizer: "rational" keeps gradient
    # on primitives far above the threshold (the logistic saturates there,
    # which stalls the count pressure at short iteration budgets).
    reg_surrogate: str = "rational"

    def __post_init__(self):
        # mechanism_start_iter >= iterations is allowed: the mechanism then
        # never activates and training is plain fitting end to end
        if self.mechanism_start_iter < 0:
            raise ValueError("mechanism_start_iter must be >= 0")
        if self.s_max < 1.0:
            raise ValueError("s_max must be >= 1")
        for name in ("lr_position", "lr_opacity", "lr_scale", "lr_rotation",
                     "lr_sh", "lr_sigma_d"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.reg_surrogate not in ("rational", "logistic"):
            raise ValueError(f"unknown reg_surrogate {self.reg_surrogate!r}")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Laptop-scale preset: the full schedule shrunk to 2000 iterations.

        The opacity step is reduced from the full-scale convention: at this
        iteration budget the faster opacity path otherwise outruns the decay
        parameter and the count pressure prunes globally instead of
        scale-selectively.
        """
        base = dict(
            iterations=2000, mechanism_start_iter=200, checkpoint_every=500,
            lr_opacity=0.02,
        )
        base.update(overrides)
        return cls(**base)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "TrainConfig":
        data = json.loads(Path(path).read_text())
        data.update(overrides)
        return cls(**data)

    def render_config(self) -> RenderConfig:
        return RenderConfig(workers=self.workers)


class TrainState:
    """Mutable optimization state: parameters, moments, iteration, RNG."""

    def __init__(self, scene: GaussianScene, cfg: TrainConfig):
        if scene.sh_degree > 1:
            raise ValueError("training supports sh_degree <= 1")
        self.cfg = cfg
        self.sh_degree = scene.sh_degree
        self.background = tuple(scene.background)
        self.params: dict[str, np.ndarray] = {
            name: getattr(scene, _SCENE_FIELDS[name]).astype(np.float64)
            for name in PARAM_NAMES
        }
        self.optimizer = Adam(self.params, cfg.beta1, cfg.beta2, cfg.adam_eps)
        self.iteration = 0
        self.rng = np.random.default_rng(cfg.seed)

    def scene(self) -> GaussianScene:
        return GaussianScene(
            positions=self.params["position"],
            log_scales=self.params["log_scale"],
            rotations=self.params["rotation"],
            opacity_logits=self.params["opacity_logit"],
            sh_coeffs=self.params["sh_coeffs"],
            sigma_d=self.params["sigma_d"],
            sh_degree=self.sh_degree,
            background=self.background,
            validate=False,
        )

    def snapshot(self) -> GaussianScene:
        """Float32 copy of the current parameters (checkpoint payload)."""
        return self.scene().astype(np.float32)

    def learning_rates(self) -> dict[str, float]:
        cfg = self.cfg
        frac = min(self.iteration / max(cfg.iterations, 1), 1.0)
        lr_pos = cfg.lr_position * (cfg.lr_position_final / cfg.lr_position) ** frac
        return {
            "position": lr_pos,
            "log_scale": cfg.lr_scale,
            "rotation": cfg.lr_rotation,
            "opacity_logit": cfg.lr_opacity,
            "sh_coeffs": cfg.lr_sh,
            "sigma_d": cfg.lr_sigma_d,
        }


def sample_scale(state: TrainState, cfg: TrainConfig) -> float:
    """1.0 before the mechanism warm-up, then U(1, s_max) from the state RNG."""
    if state.iteration < cfg.mechanism_start_iter:
        return 1.0
    return float(state.rng.uniform(1.0, cfg.s_max))


def _soft_ratio(art, lod, n, surrogate, temperature):
    alpha_pp = art.state["alpha_pp"]
    valid = art.state["proj"].valid
    if surrogate == "rational":
        return soft_rendered_ratio_rational(alpha_pp, valid, lod, n)
    return soft_rendered_ratio(alpha_pp, valid, lod, n, temperature=temperature)


def _soft_ratio_backward(art, lod, n, surrogate, temperature, g_eta):
    alpha_pp = art.state["alpha_pp"]
    valid = art.state["proj"].valid
    if surrogate == "rational":
        return soft_ratio_rational_backward(alpha_pp, valid, lod, n, g_eta)
    return soft_ratio_backward(alpha_pp, valid, lod, n, g_eta, temperature=temperature)


def loss_and_gradients(
    scene: GaussianScene,
    cam,
    gt: np.ndarray,
    lod: LodQuery,
    s_max: float,
    lambda_reg: float = 1.0,
    lambda_dssim: float = 0.2,
    use_adaptive_weight: bool = True,
    mode: str = "clod",
    config: RenderConfig | None = None,
    soft_temperature: float | None = None,
    reg_surrogate: str = "rational",
) -> tuple[metrics.LossBreakdown, ParamGradients, "RenderArtifacts"]:
    """Full objective and its analytic parameter gradients for one view."""
    art = render(scene, cam, lod, config, mode=mode)
    if mode == "clod":
        eta_soft = _soft_ratio(art, lod, len(scene), reg_surrogate, soft_temperature)
    else:
        eta_soft = art.rendered_ratio
    breakdown = metrics.total_loss(
        art.image, gt, lod.s_v, s_max, eta_soft,
        lambda_reg=lambda_reg, lambda_dssim=lambda_dssim,
        use_adaptive_weight=use_adaptive_weight,
    )
    g_image, g_eta = metrics.total_loss_grads(
        art.image, gt, breakdown, lambda_reg=lambda_reg, lambda_dssim=lambda_dssim,
    )
    grads = render_with_gradients(scene, cam, lod, g_image, artifacts=art)
    if mode == "clod" and g_eta != 0.0:
        d_alpha_pp = _soft_ratio_backward(
            art, lod, len(scene), reg_surrogate, soft_temperature, g_eta
        )
        grads.add_(attenuation_gradients(scene, cam, lod, art, d_alpha_pp))
    return breakdown, grads, art


def compute_loss(
    scene: GaussianScene,
    cam,
    gt: np.ndarray,
    lod: LodQuery,
    s_max: float,
    **kwargs,
) -> float:
    """Forward-only objective (the finite-difference oracle's target)."""
    mode = kwargs.pop("mode", "clod")
    config = kwargs.pop("config", None)
    soft_temperature = kwargs.pop("soft_temperature", None)
    reg_surrogate = kwargs.pop("reg_surrogate", "rational")
    art = render(scene, cam, lod, config, mode=mode)
    if mode == "clod":
        eta_soft = _soft_ratio(art, lod, len(scene), reg_surrogate, soft_temperature)
    else:
        eta_soft = art.rendered_ratio
    breakdown = metrics.total_loss(art.image, gt, lod.s_v, s_max, eta_soft, **kwargs)
    return breakdown.l_total


def train_step(
    state: TrainState, cam, gt: np.ndarray, cfg: TrainConfig
) -> dict:
    """One optimization step; returns the logged record."""
    s_v = sample_scale(state, cfg)
    mode = "off" if state.iteration < cfg.mechanism_start_iter else "clod"
    lod = LodQuery(s_v=s_v, tau=cfg.tau)
    scene = state.scene()
    breakdown, grads, art = loss_and_gradients(
        scene, cam, gt, lod, cfg.s_max,
        lambda_reg=cfg.lambda_reg, lambda_dssim=cfg.lambda_dssim,
        use_adaptive_weight=cfg.use_adaptive_weight, mode=mode,
        config=cfg.render_config(), soft_temperature=cfg.soft_temperature,
        reg_surrogate=cfg.reg_surrogate,
    )
    if not np.isfinite(breakdown.l_total):
        raise RuntimeError(
            f"non-finite loss at iteration {state.iteration} "
            f"(s_v={s_v:.4f}, mode={mode}): {breakdown.to_dict()}"
        )
    state.optimizer.step(
        state.params,
        {
            "position": grads.position,
            "log_scale": grads.log_scale,
            "rotation": grads.rotation,
            "opacity_logit": grads.opacity_logit,
            "sh_coeffs": grads.sh_coeffs,
            "sigma_d": grads.sigma_d,
        },
        state.learning_rates(),
    )
    q = state.params["rotation"]
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    state.iteration += 1
    record = {"iteration": state.iteration, "mode": mode}
    record.update(breakdown.to_dict())
    record["eta_actual"] = art.rendered_ratio
    record["rendered_count"] = art.rendered_count
    return record


def _write_sidecar(path: Path, state: TrainState) -> None:
    """Deterministic optimizer-state container: JSON header + raw arrays."""
    arrays = dict(state.optimizer.state_arrays())
    header = {
        "iteration": state.iteration,
        "adam_step": state.optimizer.step_count,
        "rng_state": state.rng.bit_generator.state,
        "arrays": [
            {"name": k, "shape": list(v.shape), "dtype": str(v.dtype)}
            for k, v in arrays.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v).tobytes())


def load_sidecar(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    n = int.from_bytes(raw[:8], "little")
    header = json.loads(raw[8 : 8 + n].decode("utf-8"))
    arrays = {}
    offset = 8 + n
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        cnt = int(np.prod(spec["shape"])) if spec["shape"] else 1
        arrays[spec["name"]] = np.frombuffer(
            raw, dtype=dt, count=cnt, offset=offset
        ).reshape(spec["shape"])
        offset += cnt * dt.itemsize
    return header, arrays


def train(
    scene: GaussianScene,
    cameras,
    gts,
    cfg: TrainConfig,
    run_dir: str | Path | None = None,
    log_every: int = 1,
) -> tuple[GaussianScene, list[dict]]:
    """Optimize `scene` against ground-truth views.

    Writes a JSON-lines log, periodic PLY checkpoints with optimizer
    sidecars, and a final PLY when `run_dir` is given. Fully determined by
    (seed, config, scene, cameras).
    """
    if len(cameras) < 2:
        raise ValueError("training needs at least 2 cameras")
    if len(cameras) != len(gts):
        raise ValueError("cameras and ground-truth images must pair up")
    state = TrainState(scene, cfg)
    log: list[dict] = []
    run_dir = Path(run_dir) if run_dir is not None else None
    log_fh = None
    ckpt_dir = None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        log_fh = open(run_dir / "log.jsonl", "w")
    try:
        for it in range(cfg.iterations):
            idx = it % len(cameras)
            record = train_step(state, cameras[idx], gts[idx], cfg)
            record["camera"] = idx
            if (it + 1) % log_every == 0 or it + 1 == cfg.iterations:
                log.append(record)
                if log_fh:
                    log_fh.write(json.dumps(record, sort_keys=True) + "\n")
            if (
                ckpt_dir is not None
                and cfg.checkpoint_every > 0
                and (it + 1) % cfg.checkpoint_every == 0
            ):
                tag = f"iter_{it + 1:06d}"
                save_ply(state.snapshot(), ckpt_dir / f"{tag}.ply")
                _write_sidecar(ckpt_dir / f"{tag}.opt", state)
        from .eval_harness import evaluate_views

        final = evaluate_views(
            state.snapshot(), cameras, gts, LodQuery(s_v=1.0, tau=cfg.tau),
            config=cfg.render_config(),
        )
        summary = {"type": "final_eval", "s_v": 1.0}
        summary.update({k: final[k] for k in ("psnr", "ssim", "ratio", "count")})
        log.append(summary)
        if log_fh:
            log_fh.write(json.dumps(summary, sort_keys=True) + "\n")
    finally:
        if log_fh:
            log_fh.close()
    trained = state.snapshot()
    if run_dir is not None:
        save_ply(trained, run_dir / "final.ply")
        _write_sidecar(run_dir / "final.opt", state)
    return trained, log
