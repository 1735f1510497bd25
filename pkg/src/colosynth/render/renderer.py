"""Pinhole ray casting of the textured lumen under a camera headlight."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshWithoutUVs, NonFiniteCamera
from ..geometry import Pose
from ..mesh import TriMesh
from ..texture import TextureImage, sample_texture
from .bvh import BVH
from .params import CameraIntrinsics, LightParams, MaterialParams, PostFxParams
from .postfx import apply_postfx
from .shading import shade

# Scale so the default camera (ISO 200, f/16) with a 1000-unit headlight gives a
# mid-gray mean on the 10 mm radius cylinder phantom.
EXPOSURE_CONSTANT = 160.0
AMBIENT = 0.015
AMBIENT_REFERENCE_INTENSITY = 1000.0
TILE_ROWS = 16


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("COLOSYNTH_THREADS", os.cpu_count() or 1))
    return max(1, int(threads))


@dataclass(frozen=True, eq=False)
class Scene:
    """A mesh plus its read-only acceleration structure and per-triangle u tangents."""

    mesh: TriMesh
    bvh: BVH
    tangents: np.ndarray  # (T, 3) dP/du, zero where undefined

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "Scene":
        if mesh.uvs is None:
            raise MeshWithoutUVs("mesh has no texture coordinates; unwrap it first", stage="render")
        return cls(mesh, BVH.build(mesh.vertices, mesh.triangles), _u_tangents(mesh))


def _u_tangents(mesh: TriMesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    uv = mesh.uvs[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    d1, d2 = uv[:, 1] - uv[:, 0], uv[:, 2] - uv[:, 0]
    det = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    ok = np.abs(det) > 1e-12
    t = (e1 * d2[:, 1:2] - e2 * d1[:, 1:2]) / np.where(ok, det, 1.0)[:, None]
    return np.where(ok[:, None], t, 0.0)


@dataclass(eq=False)
class FramePacket:
    rgb: np.ndarray  # (H, W, 3) linear RGB after post-processing
    depth: np.ndarray  # (H, W) mm, 0 where the ray misses
    pose: Pose
    frame_index: int = 0
    config_snapshot: dict | None = None
    hit: np.ndarray | None = field(default=None, repr=False)


def camera_rays(pose: Pose, cam: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Unit world-space ray directions (H, W, 3) through pixel centers, plus the origin."""
    w, h = cam.width, cam.height
    tan_half = np.tan(np.radians(cam.fov_deg) / 2.0)
    xs = (2.0 * (np.arange(w) + 0.5) / w - 1.0) * tan_half * (w / h)
    ys = (1.0 - 2.0 * (np.arange(h) + 0.5) / h) * tan_half
    local = np.empty((h, w, 3))
    local[..., 0] = xs[None, :]
    local[..., 1] = ys[:, None]
    local[..., 2] = -1.0
    local /= np.linalg.norm(local, axis=-1, keepdims=True)
    dirs = local @ pose.rotation_matrix().T
    return np.asarray(pose.position, dtype=np.float64), dirs


def _check_pose(pose: Pose) -> None:
    q = np.asarray(pose.orientation, dtype=np.float64)
    p = np.asarray(pose.position, dtype=np.float64)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))) or abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise NonFiniteCamera(f"camera pose is not finite or not unit-norm: {pose}", stage="render")


def trace_depth(scene: Scene, origin: np.ndarray, dirs: np.ndarray, threads: int | None = None):
    """Closest hits for an (H, W, 3) ray grid, traced in row tiles."""
    h, w = dirs.shape[:2]
    flat = np.ascontiguousarray(dirs.reshape(-1, 3))
    origins = np.broadcast_to(origin, flat.shape)
    t = np.empty(h * w)
    tri = np.empty(h * w, dtype=np.int64)
    b1 = np.empty(h * w)
    b2 = np.empty(h * w)

    def work(row0):
        sl = slice(row0 * w, min(h, row0 + TILE_ROWS) * w)
        t[sl], tri[sl], b1[sl], b2[sl] = scene.bvh.intersect(origins[sl], flat[sl])

    tiles = range(0, h, TILE_ROWS)
    n = thread_count(threads)
    if n == 1:
        for r in tiles:
            work(r)
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(work, tiles))
    return t.reshape(h, w), tri.reshape(h, w), b1.reshape(h, w), b2.reshape(h, w)


def exposure_scale(cam: CameraIntrinsics) -> float:
    return (cam.iso / 100.0) / (cam.aperture_fnumber**2) * EXPOSURE_CONSTANT


def shade_hits(scene, texture, origin, dirs, t, tri, b1, b2, mat, light) -> np.ndarray:
    """Radiance image for traced hits; misses stay black."""
    h, w = t.shape
    out = np.zeros((h, w, 3))
    hit = tri >= 0
    if not np.any(hit):
        return out
    idx = tri[hit]
    a, b = b1[hit][:, None], b2[hit][:, None]
    corners = scene.mesh.triangles[idx]
    d = dirs[hit]
    points = origin + t[hit][:, None] * d
    nv = scene.mesh.normals
    n = (1.0 - a - b) * nv[corners[:, 0]] + a * nv[corners[:, 1]] + b * nv[corners[:, 2]]
    n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-12)
    view = -d
    n = np.where((np.sum(n * view, axis=1) < 0)[:, None], -n, n)  # face the eye
    uvs = scene.mesh.uvs
    uv = (1.0 - a - b) * uvs[corners[:, 0]] + a * uvs[corners[:, 1]] + b * uvs[corners[:, 2]]
    radiance = shade(points, n, view, uv, texture, mat, light, origin, tangent=scene.tangents[idx])
    albedo = sample_texture(texture, uv[:, 0], uv[:, 1])
    ambient = AMBIENT * albedo * np.asarray(light.color) * (light.intensity / AMBIENT_REFERENCE_INTENSITY)
    out[hit] = radiance + ambient
    return out


def render_frame(
    mesh: TriMesh | Scene,
    texture: TextureImage,
    pose: Pose,
    cam: CameraIntrinsics | None = None,
    mat: MaterialParams | None = None,
    fx: PostFxParams | None = None,
    light: LightParams | None = None,
    seed: int = 0,
    frame_index: int = 0,
    config_snapshot: dict | None = None,
    threads: int | None = None,
    clamp: bool = True,
) -> FramePacket:
    """Render one frame. Pass a prebuilt :class:`Scene` to reuse its BVH across frames.

    With ``clamp=False`` the returned RGB is the post-processed image before
    the final [0, 1] clamp.
    """
    cam = (cam or CameraIntrinsics()).validate()
    mat = (mat or MaterialParams()).validate()
    fx = (fx or PostFxParams()).validate()
    light = (light or LightParams()).validate()
    _check_pose(pose)
    scene = mesh if isinstance(mesh, Scene) else Scene.from_mesh(mesh)

    origin, dirs = camera_rays(pose, cam)
    t, tri, b1, b2 = trace_depth(scene, origin, dirs, threads)
    radiance = shade_hits(scene, texture, origin, dirs, t, tri, b1, b2, mat, light)
    exposed = radiance * exposure_scale(cam)
    rgb = apply_postfx(exposed, fx, cam, seed, clamp=clamp)
    return FramePacket(rgb, t, pose, frame_index, config_snapshot, hit=tri >= 0)
