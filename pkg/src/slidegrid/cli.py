"""Command-line entry point: ``slidegrid <command> ...``.

Exit codes: 0 success, 2 config/usage error, 3 runtime or numerical error,
4 contract violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, camera, engine, skeleton
from .errors import ConfigError, SlideGridError
from .grid import Topology, build_schedule, init_grid

log = logging.getLogger("slidegrid")


def _write_json(obj, path):
    text = json.dumps(obj, indent=2)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n")


def cmd_plan(args):
    placements = engine.plan_line_sweeps(args.L, Topology(args.topology), args.W, args.S, args.P)
    counts = [0] * args.L
    for p in placements:
        for m, s in zip(p.members, p.steppable):
            if s:
                counts[m.view] += p.steps
    expected = 2 * args.P * args.W // args.S
    report = {"L": args.L, "topology": args.topology, "W": args.W, "S": args.S, "P": args.P,
              "expected_steps": expected, "steps_per_sample": counts,
              "uniform": all(c == expected for c in counts), "placements": len(placements)}
    if args.out:
        plan = engine.DenoisePlan(placements, expected, name="line")
        Path(args.out).write_text(plan.to_json(indent=2) + "\n")
    _write_json(report, None)
    return 0 if report["uniform"] else 3


def _config_from_args(args) -> bench.ExperimentConfig:
    cfg = bench.ExperimentConfig.load(args.config) if args.config else bench.ExperimentConfig()
    overrides = {
        "V": args.V, "T": args.T, "d": args.d, "alpha": args.alpha, "beta": args.beta,
        "seeds": args.seeds, "num_inputs": args.num_inputs, "input_views": args.inputs,
        "D": args.D, "sigma_max": args.sigma_max, "sigma_min": args.sigma_min,
        "spatial": args.spatial, "temporal": args.temporal, "group_size": args.group_size,
        "median_window": args.median_window, "median_overlap": args.median_overlap,
        "guidance_scale": args.guidance, "workers": args.workers, "output_dir": args.out,
        "psnr_peak": args.psnr_peak, "record_timing": True if args.timing else None,
    }
    return cfg.replace(**overrides)


def cmd_ablate(args):
    cfg = _config_from_args(args)
    result = bench.run_ablation(cfg)
    order = result.summary["ordering"]["sliding_vs_multigroup"]
    for name in bench.STRATEGIES:
        m = result.summary["strategies"][name]["mse_to_gold"]
        print(f"{name:>10s}  mse_to_gold = {m['mean']:.3e} +- {m['std']:.1e}")
    print(f"sliding < multigroup in {order['wins']}/{len(cfg.seeds)} seeds, "
          f"sign test p = {order['p_value']:.2e}")
    for k, f in result.files.items():
        print(f"wrote {f}")
    return 0


def cmd_gold(args):
    from .toy import gen_scene, gold_run

    cfg = _config_from_args(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    scene = gen_scene(cfg.V, cfg.T, cfg.d, cfg.alpha, cfg.beta, seed)
    sched = build_schedule(cfg.D, cfg.sigma_max, cfg.sigma_min)
    grid = init_grid(cfg.V, cfg.T, cfg.inputs, cfg.d, seed, sched, scene.ground_truth)
    out = gold_run(scene, grid, guidance=engine.GuidanceConfig(cfg.guidance_scale))
    dest = Path(args.out or cfg.output_dir)
    out.save(dest / "gold")
    grid.save(dest / "initial")
    _write_json({"scene": scene.to_dict(), "guidance_scale": cfg.guidance_scale},
                dest / "scene.json")
    print(f"wrote {dest}")
    return 0


def cmd_plucker(args):
    cams = camera.load_cameras(args.camera)
    cam = cams[args.index]
    pm = camera.plucker_embed(cam)
    camera.save_map(pm, args.out)
    print(f"wrote {args.out} shape={list(pm.shape)}")
    return 0


def cmd_triangulate(args):
    cams = camera.load_cameras(args.cameras)
    frames = skeleton.load_keypoints(args.keypoints)
    topo = skeleton.SkeletonTopology.load(args.topology) if args.topology else None
    out = []
    for views in frames:
        if len(views) != len(cams):
            raise ConfigError(f"{len(views)} keypoint views but {len(cams)} cameras")
        out.append(skeleton.triangulate_skeleton(views, cams, args.threshold, topo).to_dict())
    _write_json(out, args.out)
    return 0


def cmd_project(args):
    cams = camera.load_cameras(args.cameras)
    data = json.loads(Path(args.skeleton).read_text())
    frames = data if isinstance(data, list) else [data]
    out = [[skeleton.project_skeleton(c, skeleton.Skeleton3D.from_dict(f)).to_list()
            for c in cams] for f in frames]
    _write_json(out, args.out)
    return 0


def cmd_render(args):
    topo = skeleton.SkeletonTopology.load(args.topology) if args.topology else skeleton.COCO17
    frames = skeleton.load_keypoints(args.keypoints)
    skel = frames[args.frame][args.view]
    img = skeleton.rasterize_skeleton(skel, topo, args.height, args.width, args.thickness)
    skeleton.save_png(img, args.out)
    print(f"wrote {args.out}")
    return 0


def _read_mask(path) -> np.ndarray:
    from PIL import Image

    arr = np.asarray(Image.open(path).convert("L"))
    if not np.all((arr == 0) | (arr == 255) | (arr == 1)):
        raise ConfigError(f"{path} is not a binary mask")
    return (arr > 0).astype(np.uint8)


def cmd_vote(args):
    from PIL import Image

    voted = bench.vote_masks(*(_read_mask(p) for p in args.masks))
    Image.fromarray(voted * 255).save(args.out)
    print(f"wrote {args.out}")
    return 0


def _wsp(s):
    return [int(x) for x in s.split(",")]


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--V", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--num-inputs", type=int)
    p.add_argument("--inputs", type=int, nargs="+", help="explicit input view indices")
    p.add_argument("--D", type=int)
    p.add_argument("--sigma-max", type=float)
    p.add_argument("--sigma-min", type=float)
    p.add_argument("--spatial", type=_wsp, metavar="W,S,P")
    p.add_argument("--temporal", type=_wsp, metavar="W,S,P")
    p.add_argument("--group-size", type=int)
    p.add_argument("--median-window", type=int)
    p.add_argument("--median-overlap", type=int)
    p.add_argument("--guidance", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--psnr-peak", type=float)
    p.add_argument("--timing", action="store_true", help="also write timing.json")
    p.add_argument("-o", "--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slidegrid", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="emit and audit a single-line sliding plan")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--topology", choices=[t.value for t in Topology], default="circular")
    p.add_argument("--W", type=int, required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--P", type=int, required=True)
    p.add_argument("-o", "--out", help="write the plan JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("ablate", help="run the toy-world strategy ablation")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gold", help="dump one gold run")
    _add_config_flags(p)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gold)

    p = sub.add_parser("plucker", help="camera JSON -> Plücker map (float32, channel-last)")
    p.add_argument("camera")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_plucker)

    sk = sub.add_parser("skeleton", help="skeleton utilities").add_subparsers(
        dest="skeleton_command", required=True)
    p = sk.add_parser("triangulate")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--threshold", type=float, default=skeleton.DEFAULT_CONF_THRESHOLD)
    p.add_argument("--topology")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_triangulate)
    p = sk.add_parser("project")
    p.add_argument("--skeleton", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_project)
    p = sk.add_parser("render")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--view", type=int, default=0)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--thickness", type=float, default=2.0)
    p.add_argument("--topology")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("vote-masks", help="pixel-wise majority of three binary PNG masks")
    p.add_argument("masks", nargs=3)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_vote)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except SlideGridError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, json.JSONDecodeError, KeyError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
