"""End-to-end dataset generation: mask -> centerline -> mesh -> poses -> frames.

Output layout::

    out/
      manifest.json
      centerline.csv  waypoints.csv  mesh.obj
      stages/<key>/*.npy          cached intermediate arrays
      traversal_<k>/frame_<NNNNNN>.png|.pfm, poses.csv, params.jsonl
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import hashing
from .centerline import DEFAULT_LAMBDA, Centerline, WaypointPath, auto_endpoints, extract_centerline, resample_waypoints
from .distance_field import compute_edt
from .errors import ColosynthError, InvalidConfig, InvalidSpec, IoFailure, MissingFile, PoseIndexOutOfRange
from .geometry import Pose
from .mesh import TriMesh, build_colon_mesh
from .randomizer import RandomizationSpec, RenderConfig, fixed_ranges, sample_config
from .render.renderer import Scene, render_frame, thread_count
from .texture import TextureImage, TextureSpec, generate_texture
from .trajectory import TraversalTiming, build_spline, generate_poses
from .volume_io import VoxelMask, load_mask, save_obj, save_polyline, save_pose_log, write_pfm, write_png

log = logging.getLogger(__name__)

CACHE_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    mask: str
    endpoints: object = "auto"  # "auto" or ((x, y, z), (x, y, z)) voxel indices
    lam: float = DEFAULT_LAMBDA
    spacing_mm: float = 5.0
    smoothing_iterations: int = 10
    smoothing_step: float = 0.5
    texture_resolution: tuple[int, int] = (512, 512)
    timing: TraversalTiming = field(default_factory=TraversalTiming)
    randomization: RandomizationSpec | None = None
    output_dir: str = "out"
    image_resolution: tuple[int, int] = (256, 256)
    seed: int = 0
    traversals: int = 1
    max_frames: int | None = None

    def validate(self) -> "PipelineConfig":
        if self.endpoints != "auto":
            try:
                ep = np.asarray(self.endpoints)
            except ValueError:
                ep = np.zeros(0)
            if ep.shape != (2, 3) or ep.dtype.kind not in "iu":
                raise InvalidConfig(f"endpoints must be 'auto' or two integer voxel triples, got {self.endpoints}")
        if not self.lam >= 0:
            raise InvalidConfig("lambda must be >= 0")
        if not self.spacing_mm > 0:
            raise InvalidConfig("spacing_mm must be > 0")
        if int(self.smoothing_iterations) != self.smoothing_iterations or self.smoothing_iterations < 0:
            raise InvalidConfig("smoothing iterations must be a non-negative integer")
        if not 0 <= self.smoothing_step <= 1:
            raise InvalidConfig("smoothing step must lie in [0, 1]")
        if self.traversals < 1:
            raise InvalidConfig("traversals must be >= 1")
        if self.max_frames is not None and self.max_frames < 1:
            raise InvalidConfig("max_frames must be >= 1")
        if len(self.image_resolution) != 2 or min(self.image_resolution) < 1:
            raise InvalidConfig("image_resolution must be two positive integers")
        if not 0 <= int(self.seed) <= hashing.MASK64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        self.timing.validate()
        try:
            TextureSpec(resolution=tuple(self.texture_resolution)).validate()
        except InvalidSpec as exc:
            raise InvalidConfig(f"texture_resolution: {exc.args[0]}") from exc
        self.spec().validate()
        return self

    def spec(self) -> RandomizationSpec:
        """Randomization spec with the pipeline seed as master seed (all-fixed if none given)."""
        spec = self.randomization or RandomizationSpec(fixed_ranges(), "per_traversal")
        return replace(spec, master_seed=int(self.seed))

    def to_dict(self) -> dict:
        return {
            "mask": str(self.mask),
            "endpoints": self.endpoints if self.endpoints == "auto" else [list(map(int, e)) for e in self.endpoints],
            "lambda": self.lam,
            "spacing_mm": self.spacing_mm,
            "smoothing": {"iterations": self.smoothing_iterations, "step": self.smoothing_step},
            "texture_resolution": list(self.texture_resolution),
            "timing": {
                "speed_mm_s": self.timing.speed_mm_s,
                "fps": self.timing.fps,
                "lookahead_mm": self.timing.lookahead_mm,
            },
            "randomization": None if self.randomization is None else self.randomization.to_dict(),
            "output_dir": str(self.output_dir),
            "image_resolution": list(self.image_resolution),
            "seed": int(self.seed),
            "traversals": self.traversals,
            "max_frames": self.max_frames,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "PipelineConfig":
        known = {
            "mask", "endpoints", "lambda", "spacing_mm", "smoothing", "texture_resolution", "timing",
            "randomization", "output_dir", "image_resolution", "seed", "traversals", "max_frames",
        }
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        if "mask" not in d:
            raise InvalidConfig("config needs a 'mask' path")
        base = Path(base_dir) if base_dir is not None else None

        def path(p):
            p = Path(p)
            return str(base / p) if base is not None and not p.is_absolute() else str(p)

        endpoints = d.get("endpoints", "auto")
        if isinstance(endpoints, dict):
            endpoints = (endpoints.get("start"), endpoints.get("end"))
        if endpoints != "auto":
            try:
                endpoints = tuple(tuple(int(v) for v in e) for e in endpoints)
            except (TypeError, ValueError) as exc:
                raise InvalidConfig(f"bad endpoints {d.get('endpoints')}") from exc
        smoothing = d.get("smoothing", {})
        timing = d.get("timing", {})
        bad_timing = set(timing) - {"speed_mm_s", "fps", "lookahead_mm"}
        if bad_timing:
            raise InvalidConfig(f"unknown timing keys {sorted(bad_timing)}")
        rnd = d.get("randomization")
        try:
            cfg = cls(
                mask=path(d["mask"]),
                endpoints=endpoints,
                lam=float(d.get("lambda", DEFAULT_LAMBDA)),
                spacing_mm=float(d.get("spacing_mm", 5.0)),
                smoothing_iterations=int(smoothing.get("iterations", 10)),
                smoothing_step=float(smoothing.get("step", 0.5)),
                texture_resolution=tuple(int(n) for n in d.get("texture_resolution", (512, 512))),
                timing=TraversalTiming(**{k: float(v) for k, v in timing.items()}),
                randomization=None if rnd is None else RandomizationSpec.from_dict(rnd),
                output_dir=path(d.get("output_dir", "out")),
                image_resolution=tuple(int(n) for n in d.get("image_resolution", (256, 256))),
                seed=int(d.get("seed", 0)),
                traversals=int(d.get("traversals", 1)),
                max_frames=None if d.get("max_frames") is None else int(d["max_frames"]),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(str(path), stage="config")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}", stage="config") from exc
        return cls.from_dict(d, base_dir=path.parent)


@contextmanager
def stage(name: str):
    """Attach the stage name to errors raised inside the block."""
    try:
        yield
    except ColosynthError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _mask_digest(mask: VoxelMask) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(mask.data.shape, dtype="<i8").tobytes())
    h.update(np.asarray(mask.spacing, dtype="<f8").tobytes())
    h.update(np.packbits(mask.data.ravel(order="C")).tobytes())
    return h.hexdigest()


def _key(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:16]


def _load_arrays(folder: Path, names) -> dict | None:
    files = {n: folder / f"{n}.npy" for n in names}
    if not all(f.is_file() for f in files.values()):
        return None
    return {n: np.load(f, allow_pickle=False) for n, f in files.items()}


def _save_arrays(folder: Path, arrays: dict) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    for name, arr in arrays.items():
        np.save(folder / f"{name}.npy", np.asarray(arr, order="C"), allow_pickle=False)


@dataclass(eq=False)
class Geometry:
    mask: VoxelMask
    centerline: Centerline
    waypoints: WaypointPath
    mesh: TriMesh
    endpoints: tuple
    mask_digest: str
    cache_hits: dict


def prepare_geometry(config: PipelineConfig, out: Path) -> Geometry:
    """Load -> distance field -> centerline -> waypoints -> mesh, with on-disk caching."""
    with stage("load"):
        mask = load_mask(config.mask)
    digest = _mask_digest(mask)
    stages_dir = out / "stages"
    hits = {}

    cl_key = _key(CACHE_VERSION, digest, config.endpoints, config.lam, config.spacing_mm)
    cached = _load_arrays(stages_dir / f"centerline_{cl_key}", ("points", "arclength", "voxels", "cost", "endpoints", "waypoints", "waypoint_s", "waypoint_spacing"))
    hits["centerline"] = cached is not None
    if cached is None:
        df = None
        with stage("edt"):
            df = compute_edt(mask)
        with stage("centerline"):
            endpoints = auto_endpoints(df) if config.endpoints == "auto" else tuple(config.endpoints)
            cl = extract_centerline(df, endpoints[0], endpoints[1], config.lam)
        with stage("waypoints"):
            wp = resample_waypoints(cl, config.spacing_mm)
        _save_arrays(
            stages_dir / f"centerline_{cl_key}",
            {
                "points": cl.points, "arclength": cl.arclength, "voxels": cl.voxels, "cost": np.array(cl.cost),
                "endpoints": np.asarray(endpoints, dtype=np.int64), "waypoints": wp.waypoints,
                "waypoint_s": wp.arclength, "waypoint_spacing": np.array(wp.spacing_mm),
            },
        )
    else:
        cl = Centerline(cached["points"], cached["arclength"], cached["voxels"], float(cached["cost"]))
        wp = WaypointPath(cached["waypoints"], float(cached["waypoint_spacing"]), cached["waypoint_s"])
        endpoints = tuple(tuple(int(v) for v in e) for e in cached["endpoints"])

    mesh_key = _key(CACHE_VERSION, cl_key, config.smoothing_iterations, config.smoothing_step)
    cached = _load_arrays(stages_dir / f"mesh_{mesh_key}", ("vertices", "triangles", "normals", "uvs"))
    hits["mesh"] = cached is not None
    if cached is None:
        with stage("mesh"):
            mesh = build_colon_mesh(mask, cl, iterations=config.smoothing_iterations, step=config.smoothing_step)
        _save_arrays(
            stages_dir / f"mesh_{mesh_key}",
            {"vertices": mesh.vertices, "triangles": mesh.triangles, "normals": mesh.normals, "uvs": mesh.uvs},
        )
    else:
        mesh = TriMesh(cached["vertices"], cached["triangles"], cached["normals"], cached["uvs"])
    log.info("geometry ready (cache hits: %s)", hits)
    return Geometry(mask, cl, wp, mesh, endpoints, digest, hits)


def traversal_poses(config: PipelineConfig, geo: Geometry) -> list[Pose]:
    with stage("trajectory"):
        poses = generate_poses(build_spline(geo.waypoints), config.timing)
    if config.max_frames is not None:
        poses = poses[: config.max_frames]
    return poses


@functools.lru_cache(maxsize=8)
def _texture(spec: TextureSpec) -> TextureImage:
    return generate_texture(spec)


def frame_config(config: PipelineConfig, spec: RandomizationSpec, traversal: int, frame: int) -> RenderConfig:
    """Sampled config with the pipeline's fixed image and texture resolution applied."""
    cfg = sample_config(spec, traversal, frame)
    return replace(
        cfg,
        camera=replace(cfg.camera, resolution=tuple(config.image_resolution)),
        texture=replace(cfg.texture, resolution=tuple(config.texture_resolution)),
    ).validate()


def _render_one(scene: Scene, cfg: RenderConfig, pose: Pose, seed: int, frame: int):
    with stage("texture"):
        tex = _texture(cfg.texture)
    with stage("render"):
        return render_frame(
            scene, tex, pose, cfg.camera, cfg.material, cfg.postfx, cfg.light,
            seed=seed, frame_index=frame, config_snapshot=cfg.to_dict(), threads=1,
        )


def _frame_seed(seed: int, traversal: int, frame: int) -> int:
    return int(hashing.hash64(seed, traversal, frame, "render"))


def _pose_json(pose: Pose) -> dict:
    return {"position": [float(v) for v in pose.position], "orientation": [float(v) for v in pose.orientation]}


def _render_batch(jobs, threads: int | None):
    """Run (scene, cfg, pose, seed, frame) jobs, frames in parallel, results in order."""
    n = thread_count(threads)
    if n == 1:
        return [_render_one(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda j: _render_one(*j), jobs))


def _write_frame(folder: Path, stem: str, packet) -> None:
    try:
        write_png(folder / f"{stem}.png", packet.rgb)
        write_pfm(folder / f"{stem}.pfm", packet.depth)
    except OSError as exc:
        raise IoFailure(str(exc), stage="write") from exc


def _write_jsonl(path: Path, records) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def _write_manifest(out: Path, config: PipelineConfig, geo: Geometry, entries: list[dict], extra: dict | None = None) -> dict:
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(out).as_posix()] = sha256_file(p)
    manifest = {
        "config": config.to_dict(),
        "endpoints": [list(e) for e in geo.endpoints],
        "traversals": entries,
        "artifacts": {
            "mask": geo.mask_digest,
            "centerline": files.get("centerline.csv"),
            "mesh": files.get("mesh.obj"),
        },
        "files": files,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _write_geometry(out: Path, geo: Geometry) -> None:
    save_polyline(geo.centerline.points, geo.centerline.arclength, out / "centerline.csv")
    save_polyline(geo.waypoints.waypoints, geo.waypoints.arclength, out / "waypoints.csv")
    save_obj(geo.mesh, out / "mesh.obj")


def run_pipeline(config: PipelineConfig, threads: int | None = None) -> dict:
    """Generate every traversal and return the manifest dictionary."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    geo = prepare_geometry(config, out)
    _write_geometry(out, geo)
    poses = traversal_poses(config, geo)
    with stage("render"):
        scene = Scene.from_mesh(geo.mesh)
    spec = config.spec()
    times = np.arange(len(poses)) / config.timing.fps

    entries = []
    for k in range(config.traversals):
        folder = out / f"traversal_{k}"
        folder.mkdir(parents=True, exist_ok=True)
        jobs = [
            (scene, frame_config(config, spec, k, i), pose, _frame_seed(config.seed, k, i), i)
            for i, pose in enumerate(poses)
        ]
        packets = _render_batch(jobs, threads)
        records = []
        for i, packet in enumerate(packets):
            _write_frame(folder, f"frame_{i:06d}", packet)
            records.append(
                {"frame": i, "t_sec": float(times[i]), "pose": _pose_json(packet.pose), "config": packet.config_snapshot}
            )
        save_pose_log(poses, folder / "poses.csv", times=times)
        _write_jsonl(folder / "params.jsonl", records)
        entries.append(
            {"traversal_id": k, "frame_count": len(poses), "pose_log": f"traversal_{k}/poses.csv", "params": f"traversal_{k}/params.jsonl"}
        )
        log.info("traversal %d: %d frames", k, len(poses))
    return _write_manifest(out, config, geo, entries)


def contact_sheet(images: list[np.ndarray], gap: int = 4) -> np.ndarray:
    """Side-by-side strip of equally sized images on a black background."""
    h, w = images[0].shape[:2]
    sheet = np.zeros((h, len(images) * w + (len(images) - 1) * gap, 3))
    for i, img in enumerate(images):
        sheet[:, i * (w + gap) : i * (w + gap) + w] = img
    return sheet


def run_same_pose_grid(config: PipelineConfig, pose_index: int, n_variants: int, threads: int | None = None, sheet: bool = True) -> dict:
    """Render ``n_variants`` randomized frames at one pose of traversal 0."""
    config.validate()
    if n_variants < 2:
        raise InvalidConfig(f"n_variants must be >= 2, got {n_variants}", stage="same-pose")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    geo = prepare_geometry(config, out)
    _write_geometry(out, geo)
    poses = traversal_poses(config, geo)
    if not 0 <= pose_index < len(poses):
        raise PoseIndexOutOfRange(f"pose index {pose_index} outside 0..{len(poses) - 1}", stage="same-pose")
    pose = poses[pose_index]
    with stage("render"):
        scene = Scene.from_mesh(geo.mesh)
    spec = replace(config.spec(), mode="per_frame")
    # variant v uses frame key v of traversal 0 and the same noise seed for every variant
    seed = _frame_seed(config.seed, 0, pose_index)
    jobs = [(scene, frame_config(config, spec, 0, v), pose, seed, v) for v in range(n_variants)]
    packets = _render_batch(jobs, threads)

    folder = out / f"same_pose_{pose_index:06d}"
    folder.mkdir(parents=True, exist_ok=True)
    records = []
    for v, packet in enumerate(packets):
        _write_frame(folder, f"variant_{v:03d}", packet)
        records.append({"variant": v, "pose_index": pose_index, "pose": _pose_json(pose), "config": packet.config_snapshot})
    _write_jsonl(folder / "params.jsonl", records)
    if sheet:
        write_png(folder / "contact_sheet.png", contact_sheet([p.rgb for p in packets]))
    entry = {"pose_index": pose_index, "variants": n_variants, "folder": folder.relative_to(out).as_posix()}
    return _write_manifest(out, config, geo, [], extra={"same_pose": entry})
