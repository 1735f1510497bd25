"""Command-line entry point: ``colosynth <subcommand> ...``.

Exit codes: 0 success, 2 I/O, 3 validation, 4 geometry, 5 render.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .centerline import DEFAULT_LAMBDA, Centerline, auto_endpoints, extract_centerline, resample_waypoints
from .distance_field import compute_edt
from .errors import EXIT_VALIDATION, ColosynthError, InvalidConfig, MissingFile
from .mesh import build_colon_mesh
from .phantoms import SHAPES, make_mask
from .pipeline import PipelineConfig, run_pipeline, run_same_pose_grid, stage
from .texture import MODES, TextureSpec, generate_texture
from .volume_io import load_mask, load_polyline, save_mask, save_obj, save_polyline


def _triple(text: str, cast=int) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _float_triple(text: str) -> tuple:
    return _triple(text, float)


def cmd_run(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.output:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), "output_dir": args.output})
    manifest = run_pipeline(cfg, threads=args.threads)
    frames = sum(t["frame_count"] for t in manifest["traversals"])
    print(f"wrote {frames} frames in {len(manifest['traversals'])} traversal(s) to {cfg.output_dir}")
    return 0


def cmd_centerline(args) -> int:
    with stage("load"):
        mask = load_mask(args.mask)
    with stage("edt"):
        df = compute_edt(mask)
    with stage("centerline"):
        if args.auto:
            start, end = auto_endpoints(df)
        else:
            if args.start is None or args.end is None:
                raise InvalidConfig("give --start and --end, or --auto", stage="centerline")
            start, end = args.start, args.end
        cl = extract_centerline(df, start, end, args.lam)
    with stage("waypoints"):
        wp = resample_waypoints(cl, args.spacing)
    out = Path(args.output)
    save_polyline(cl.points, cl.arclength, out)
    wp_out = Path(args.waypoints) if args.waypoints else out.with_name(out.stem + "_waypoints.csv")
    save_polyline(wp.waypoints, wp.arclength, wp_out)
    print(f"start {start} end {end}: {len(cl)} voxels, {cl.length:.3f} mm, {len(wp)} waypoints at {wp.spacing_mm:.3f} mm")
    return 0


def cmd_unwrap(args) -> int:
    with stage("load"):
        mask = load_mask(args.mask)
        points, _ = load_polyline(args.centerline)
    with stage("mesh"):
        mesh = build_colon_mesh(mask, Centerline.from_points(points), iterations=args.iterations, step=args.step)
    save_obj(mesh, args.output)
    print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles, watertight={mesh.welded().is_watertight()}")
    return 0


def cmd_texture(args) -> int:
    d = {}
    if args.spec:
        path = Path(args.spec)
        if not path.is_file():
            raise MissingFile(str(path), stage="texture")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}", stage="texture") from exc
    for key in ("mode", "seed"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    with stage("texture"):
        spec = TextureSpec.from_dict(d)
        generate_texture(spec).save_png(args.output)
    print(f"{spec.mode} texture {spec.resolution[0]}x{spec.resolution[1]} -> {args.output}")
    return 0


def cmd_render_pose(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.output:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), "output_dir": args.output})
    manifest = run_same_pose_grid(cfg, args.pose_index, args.variants, threads=args.threads, sheet=not args.no_sheet)
    print(f"wrote {args.variants} variants to {Path(cfg.output_dir) / manifest['same_pose']['folder']}")
    return 0


def cmd_phantom(args) -> int:
    try:
        mask = make_mask(args.shape, args.dims, spacing=args.spacing)
    except ValueError as exc:
        raise InvalidConfig(str(exc), stage="phantom") from exc
    save_mask(mask, args.output)
    print(f"{args.shape}: dims {mask.dims}, {mask.foreground_count} foreground voxels -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colosynth", description="Synthetic colonoscopy frames from binary colon masks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run the full pipeline from a JSON config")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="override output_dir")
    s.add_argument("--threads", type=int, default=None, help="worker threads (default: COLOSYNTH_THREADS or CPU count)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("centerline", help="extract a centerline and equidistant waypoints")
    s.add_argument("--mask", required=True)
    s.add_argument("--start", type=_triple, help="start voxel x,y,z")
    s.add_argument("--end", type=_triple, help="end voxel x,y,z")
    s.add_argument("--auto", action="store_true", help="pick endpoints by a double geodesic sweep")
    s.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    s.add_argument("--spacing", type=float, default=5.0, help="waypoint spacing in mm")
    s.add_argument("-o", "--output", default="centerline.csv")
    s.add_argument("--waypoints", help="waypoint CSV path (default: <output>_waypoints.csv)")
    s.set_defaults(func=cmd_centerline)

    s = sub.add_parser("unwrap", help="mesh the mask and assign tube UVs")
    s.add_argument("--mask", required=True)
    s.add_argument("--centerline", required=True)
    s.add_argument("--iterations", type=int, default=10)
    s.add_argument("--step", type=float, default=0.5)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_unwrap)

    s = sub.add_parser("texture", help="synthesize a texture PNG")
    s.add_argument("--spec", help="JSON texture spec")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_texture)

    s = sub.add_parser("render-pose", help="render randomized variants at one pose")
    s.add_argument("--config", required=True)
    s.add_argument("--pose-index", type=int, required=True)
    s.add_argument("--variants", type=int, default=4)
    s.add_argument("-o", "--output", help="override output_dir")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--no-sheet", action="store_true", help="skip the contact sheet")
    s.set_defaults(func=cmd_render_pose)

    s = sub.add_parser("phantom", help="write an analytic test mask")
    s.add_argument("shape", choices=SHAPES)
    s.add_argument("dims", nargs="*", type=int, help="size parameters, e.g. radius length for a cylinder")
    s.add_argument("--spacing", type=_float_triple, default=(1.0, 1.0, 1.0))
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_phantom)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ColosynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
