"""Command-line interface.

Every subcommand accepts --config (a JSON file of argument defaults) plus
flag overrides, and writes its outputs under a run directory with a
manifest.json listing what was produced.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .clod import DEFAULT_TAU, LodQuery
from .model import CameraSet
from .ply import inspect_ply, load_ply, save_ply


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise SystemExit(f"config {path} must hold a JSON object")
    return data


def _apply_config(args: argparse.Namespace, config: dict, parser_defaults: dict):
    """Config supplies defaults; explicit flags win."""
    for key, value in config.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise SystemExit(f"config key {key!r} is not a known option")
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)
    return args


def _write_manifest(run_dir: Path, command: str, params: dict, outputs: list[str]):
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "package_version": __version__,
        "params": params,
        "outputs": sorted(outputs),
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n"
    )


def _parse_grid(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(" ", "").split(",") if tok]


def cmd_synth(args) -> int:
    from .synth import (
        SynthSpec,
        generate_camera_set,
        generate_synthetic_scene,
        training_init_scene,
    )

    run = Path(args.out)
    run.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(
        count=args.count, seed=args.seed, layout=args.layout, sh_degree=args.sh_degree
    )
    scene = generate_synthetic_scene(spec)
    save_ply(scene, run / "scene_gt.ply")
    outputs = ["scene_gt.ply"]

    train_set = generate_camera_set(
        scene, args.cameras, args.seed + 1, run / "images_train",
        width=args.size, height=args.size, prefix="train",
    )
    train_set.to_json(run / "cameras_train.json", relative_to=run)
    outputs += ["cameras_train.json", "images_train/"]
    test_set = generate_camera_set(
        scene, args.test_cameras, args.seed + 2, run / "images_test",
        width=args.size, height=args.size, prefix="test",
    )
    test_set.to_json(run / "cameras_test.json", relative_to=run)
    outputs += ["cameras_test.json", "images_test/"]

    init = training_init_scene(scene, seed=args.seed + 3)
    save_ply(init, run / "init.ply")
    outputs.append("init.ply")
    _write_manifest(run, "synth", vars(args), outputs)
    print(f"synth: {len(scene)} primitives, {len(train_set)} train / "
          f"{len(test_set)} test views -> {run}")
    return 0


def cmd_train(args) -> int:
    from .trainer import TrainConfig, train

    run = Path(args.out)
    scene = load_ply(args.scene)
    cams = CameraSet.from_json(args.cameras)
    gts = cams.load_images()
    kwargs = dict(
        iterations=args.iterations,
        mechanism_start_iter=args.mechanism_start,
        s_max=args.s_max,
        lambda_reg=args.lambda_reg,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        workers=args.workers,
        use_adaptive_weight=not args.no_adaptive_weight,
    )
    if args.train_config:
        cfg = TrainConfig.from_json(args.train_config, **kwargs)
    else:
        cfg = TrainConfig(**kwargs)
    run.mkdir(parents=True, exist_ok=True)
    cfg.to_json(run / "train_config.json")
    trained, log = train(scene, cams.cameras, gts, cfg, run_dir=run)
    final = log[-1]
    _write_manifest(
        run, "train", vars(args),
        ["final.ply", "final.opt", "log.jsonl", "train_config.json", "checkpoints/"],
    )
    print(f"train: {cfg.iterations} iterations -> {run}/final.ply "
          f"(train psnr {final.get('psnr', float('nan')):.2f} dB)")
    return 0


def cmd_render(args) -> int:
    from .imgio import write_image
    from .render import RenderConfig, render

    scene = load_ply(args.scene)
    if args.cameras:
        cams = CameraSet.from_json(args.cameras)
        cam = cams.cameras[args.camera]
    else:
        from .synth import generate_cameras

        cam = generate_cameras(scene, max(2, args.camera + 1), seed=0,
                               width=args.size, height=args.size)[args.camera]
    mode, topk = args.mode, None
    if mode.startswith("topk:"):
        mode, topk = "topk", int(args.mode.split(":")[1])
    art = render(
        scene, cam, LodQuery(s_v=args.sv, tau=args.tau),
        RenderConfig(workers=args.workers), mode=mode, topk=topk,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_image(art.image, out)
    summary = art.summary()
    print(json.dumps(summary, sort_keys=True))
    if args.summary_json:
        Path(args.summary_json).write_text(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def cmd_curve(args) -> int:
    from .eval_harness import quality_curve, write_curve_csv, write_json

    run = Path(args.out)
    run.mkdir(parents=True, exist_ok=True)
    scene = load_ply(args.scene)
    cams = CameraSet.from_json(args.cameras)
    gts = cams.load_images()
    points = quality_curve(scene, cams.cameras, gts, _parse_grid(args.grid),
                           tau=args.tau)
    write_curve_csv(points, run / "curve.csv")
    write_json([p.to_dict() for p in points], run / "curve.json")
    _write_manifest(run, "curve", vars(args), ["curve.csv", "curve.json"])
    print((run / "curve.csv").read_text().strip())
    return 0


def cmd_dlod_compare(args) -> int:
    from .eval_harness import dlod_clod_compare, write_json
    from .imgio import write_image

    run = Path(args.out)
    run.mkdir(parents=True, exist_ok=True)
    high = load_ply(args.high)
    clod_model = load_ply(args.clod) if args.clod else high
    low = load_ply(args.low) if args.low else None
    cams = CameraSet.from_json(args.cameras)
    gts = cams.load_images()
    cam, gt = cams.cameras[args.camera], gts[args.camera]
    result = dlod_clod_compare(
        high, clod_model, cam, gt, low=low, low_topk_ratio=args.low_ratio,
        schedule=_parse_grid(args.schedule), tau=args.tau,
    )
    write_image(result["dlod_image"], run / "composite_dlod.png")
    write_image(result["clod_image"], run / "composite_clod.png")
    report = {
        "dlod": result["dlod"].to_dict(),
        "clod": result["clod"].to_dict(),
        "budget_dlod": result["budget_dlod"],
        "budget_clod": result["budget_clod"],
    }
    write_json(report, run / "report.json")
    _write_manifest(run, "dlod-compare", vars(args),
                    ["composite_dlod.png", "composite_clod.png", "report.json"])
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_summarize(args) -> int:
    from .eval_harness import summarize, write_json

    scene = load_ply(args.scene)
    cams = CameraSet.from_json(args.cameras)
    gts = cams.load_images()
    record = summarize(scene, cams.cameras, gts, tau=args.tau, ply_path=args.scene)
    print(json.dumps(record, indent=2, sort_keys=True))
    if args.out:
        run = Path(args.out)
        run.mkdir(parents=True, exist_ok=True)
        write_json(record, run / "summary.json")
        _write_manifest(run, "summarize", vars(args), ["summary.json"])
    return 0


def cmd_info(args) -> int:
    print(json.dumps(inspect_ply(args.scene), indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.scenes_dir, port=args.port, host=args.host,
          max_size=args.max_size, workers=args.workers)
    return 0


def cmd_bench(args) -> int:
    from .bench import format_report, run_benchmark

    report = run_benchmark(
        count=args.count, size=args.size, reps=args.reps, workers=args.workers
    )
    print(format_report(report))
    if args.out:
        run = Path(args.out)
        run.mkdir(parents=True, exist_ok=True)
        (run / "bench.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n"
        )
        _write_manifest(run, "bench", vars(args), ["bench.json"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clodgs",
        description="Continuous level-of-detail Gaussian splatting toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of argument defaults")

    p = sub.add_parser("synth", help="generate a synthetic scene + camera sets")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--layout", default="cluster-mix")
    p.add_argument("--sh-degree", type=int, default=1)
    p.add_argument("--cameras", type=int, default=20)
    p.add_argument("--test-cameras", type=int, default=6)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="optimize a scene against ground truth views")
    common(p)
    p.add_argument("--scene", required=True, help="initial PLY")
    p.add_argument("--cameras", required=True, help="camera-set JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--train-config", help="TrainConfig JSON")
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--mechanism-start", type=int, default=200)
    p.add_argument("--s-max", type=float, default=5.0)
    p.add_argument("--lambda-reg", type=float, default=1.0)
    p.add_argument("--no-adaptive-weight", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("render", help="render one view of a PLY scene")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--cameras", help="camera-set JSON (else synthetic orbit)")
    p.add_argument("--camera", type=int, default=0)
    p.add_argument("--sv", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--mode", default="clod", help="clod, off, or topk:N")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--out", required=True, help=".ppm or .png path")
    p.add_argument("--summary-json")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("curve", help="quality vs rendered-count curve")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--grid", default="1,1.5,2,2.5,3,4,5,6,8,10")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("dlod-compare", help="hard-switch vs continuous composite")
    common(p)
    p.add_argument("--high", required=True, help="high-quality model PLY")
    p.add_argument("--clod", help="continuous model PLY (default: same as --high)")
    p.add_argument("--low", help="low model PLY (default: top-k prune of --high)")
    p.add_argument("--low-ratio", type=float, default=0.2)
    p.add_argument("--cameras", required=True)
    p.add_argument("--camera", type=int, default=0)
    p.add_argument("--schedule", default="4,3,2,1")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dlod_compare)

    p = sub.add_parser("summarize", help="table-style record for a trained model")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_summarize)

    p = sub.add_parser("info", help="inspect a PLY file")
    common(p)
    p.add_argument("scene")
    p.set_defaults(fn=cmd_info)

    p = sub.add_parser("serve", help="start the HTTP frame service")
    common(p)
    p.add_argument("--scenes-dir", required=True)
    p.add_argument("--port", type=int, default=7878)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-size", type=int, default=1024)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("bench", help="compare compositing backends")
    common(p)
    p.add_argument("--count", type=int, default=20000)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = {
        a.dest: a.default
        for a in parser._subparsers._group_actions[0].choices[args.command]._actions
    }
    _apply_config(args, _load_config(getattr(args, "config", None)), defaults)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
