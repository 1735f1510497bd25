"""Analytic test geometry: voxelized tubes and balls, and exact triangle meshes.

Voxel phantoms place the tube axis on voxel centers so the analytic axis is
known exactly. All world coordinates follow the pipeline convention
(world = voxel index * spacing).
"""

from __future__ import annotations

import numpy as np

from .centerline import Centerline
from .volume_io import VoxelMask

SHAPES = ("cylinder", "bend", "u", "helix", "sphere")


def _tube_mask(dims, polyline_vox: np.ndarray, radius_vox: float, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    """Voxels whose center lies within ``radius_vox`` of a polyline (voxel units)."""
    grid = np.stack(np.meshgrid(*[np.arange(n, dtype=np.float64) for n in dims], indexing="ij"), axis=-1)
    best = np.full(tuple(dims), np.inf)
    for a, b in zip(polyline_vox[:-1], polyline_vox[1:]):
        ab = b - a
        denom = float(np.dot(ab, ab))
        t = np.clip(((grid - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(tuple(dims))
        d = np.linalg.norm(grid - (a + t[..., None] * ab), axis=-1)
        np.minimum(best, d, out=best)
    return VoxelMask(best <= radius_vox + 1e-9, spacing)


def cylinder_mask(radius: int = 5, length: int = 40, margin: int = 2, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    """Straight tube along z; foreground spans ``length`` slices."""
    n = 2 * radius + 1 + 2 * margin
    c = radius + margin
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    disc = (x - c) ** 2 + (y - c) ** 2 <= radius * radius
    data = np.zeros((n, n, length + 2 * margin), dtype=bool)
    data[:, :, margin : margin + length] = disc[:, :, None]
    return VoxelMask(data, spacing)


def cylinder_axis(radius: int = 5, length: int = 40, margin: int = 2) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    """Voxel indices of the two end-cap centers of :func:`cylinder_mask`."""
    c = radius + margin
    return (c, c, margin), (c, c, margin + length - 1)


def bend_mask(radius: int = 4, leg: int = 24, margin: int = 2, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    """L-shaped tube: up along z, then along x, with a sharp 90 degree corner."""
    c = radius + margin
    corner = np.array([c, c, c + leg], dtype=float)
    poly = np.array([[c, c, c], corner, corner + [leg, 0, 0]], dtype=float)
    dims = (c + leg + radius + margin + 1, 2 * c + 1, c + leg + radius + margin + 1)
    return _tube_mask(dims, poly, radius, spacing)


def bend_tips(radius: int = 4, leg: int = 24, margin: int = 2):
    c = radius + margin
    return (c, c, c), (c + leg, c, c + leg)


def u_mask(radius: int = 1, size: int = 10, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    """U-shaped tube in a ``size``^3 box: two legs along z joined by a bridge along x."""
    lo, hi = radius + 1, size - radius - 2
    mid = size // 2
    poly = np.array([[lo, mid, lo], [lo, mid, hi], [hi, mid, hi], [hi, mid, lo]], dtype=float)
    return _tube_mask((size, size, size), poly, radius, spacing)


def helix_points(radius: float = 10.0, pitch: float = 20.0, turns: float = 2.0, step: float = 0.1, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Points along a z-axis helix, roughly ``step`` mm apart."""
    length = turns * np.hypot(2 * np.pi * radius, pitch)
    t = np.linspace(0.0, 2 * np.pi * turns, max(2, int(np.ceil(length / step)) + 1))
    pts = np.column_stack([radius * np.cos(t), radius * np.sin(t), pitch * t / (2 * np.pi)])
    return pts + np.asarray(center, dtype=float)


def helix_mask(tube_radius: int = 3, radius: float = 10.0, pitch: float = 20.0, turns: float = 1.5, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    margin = tube_radius + 2
    center = (radius + margin, radius + margin, margin)
    poly = helix_points(radius, pitch, turns, step=1.0, center=center)
    dims = (int(2 * (radius + margin)) + 1, int(2 * (radius + margin)) + 1, int(np.ceil(poly[:, 2].max() + margin)) + 1)
    return _tube_mask(dims, poly, tube_radius, spacing)


def sphere_mask(radius: int = 8, margin: int = 2, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    n = 2 * (radius + margin) + 1
    c = radius + margin
    g = np.indices((n, n, n))
    return VoxelMask(((g - c) ** 2).sum(axis=0) <= radius * radius, spacing)


_DEFAULT_SIZES = {"cylinder": (5, 40), "bend": (4, 24), "u": (1, 10), "helix": (3,), "sphere": (8,)}


def make_mask(shape: str, dims=None, spacing=(1.0, 1.0, 1.0)) -> VoxelMask:
    """Build a named phantom; ``dims`` overrides its leading size parameters.

    cylinder: (radius, length); bend: (radius, leg); u: (radius, box size);
    helix: (tube radius,); sphere: (radius,).
    """
    if shape not in _DEFAULT_SIZES:
        raise ValueError(f"unknown phantom shape {shape!r}; choose from {SHAPES}")
    sizes = list(_DEFAULT_SIZES[shape])
    for i, value in enumerate(list(dims or ())[: len(sizes)]):
        sizes[i] = int(value)
    builder = {"cylinder": cylinder_mask, "bend": bend_mask, "u": u_mask, "helix": helix_mask, "sphere": sphere_mask}[shape]
    return builder(*sizes, spacing=spacing)


def quarter_arc(radius: float = 20.0, step: float = 0.1) -> Centerline:
    """Quarter circle in the xy-plane discretized at about ``step`` mm."""
    n = int(np.ceil(0.5 * np.pi * radius / step))
    t = np.linspace(0.0, 0.5 * np.pi, n + 1)
    return Centerline.from_points(np.column_stack([radius * np.cos(t), radius * np.sin(t), np.zeros_like(t)]))


def closed_cylinder_mesh(radius: float = 10.0, length: float = 100.0, segments: int = 256, rings: int = 64, cap_rings: int = 16):
    """Finely tessellated tube along +z from z=0 to z=length with both ends capped.

    Normals face the interior; u runs around the circumference and v along z.
    Returns a :class:`colosynth.mesh.TriMesh`.
    """
    from .mesh import TriMesh

    theta = np.arange(segments) * (2 * np.pi / segments)
    verts, uvs, norms, tris = [], [], [], []

    def add(p, uv, n):
        verts.append(p)
        uvs.append(uv)
        norms.append(n)
        return len(verts) - 1

    # side wall, seam column duplicated at u = 1
    side = np.empty((rings + 1, segments + 1), dtype=np.int64)
    for i in range(rings + 1):
        z = length * i / rings
        for j in range(segments + 1):
            a = theta[j % segments]
            side[i, j] = add(
                (radius * np.cos(a), radius * np.sin(a), z), (j / segments, i / rings), (-np.cos(a), -np.sin(a), 0.0)
            )
    for i in range(rings):
        for j in range(segments):
            a, b, c, d = side[i, j], side[i, j + 1], side[i + 1, j + 1], side[i + 1, j]
            # wound so the geometric normal points toward the axis
            tris.append((a, c, b))
            tris.append((a, d, c))
    for z, inward in ((0.0, 1.0), (length, -1.0)):
        center = add((0.0, 0.0, z), (0.0, z / length), (0.0, 0.0, inward))
        ring_ids = np.empty((cap_rings, segments), dtype=np.int64)
        for r in range(cap_rings):
            rad = radius * (r + 1) / cap_rings
            for j in range(segments):
                a = theta[j]
                ring_ids[r, j] = add((rad * np.cos(a), rad * np.sin(a), z), (j / segments, z / length), (0.0, 0.0, inward))
        for j in range(segments):
            k = (j + 1) % segments
            tri = (center, ring_ids[0, j], ring_ids[0, k])
            tris.append(tri if inward > 0 else tri[::-1])
            for r in range(cap_rings - 1):
                a, b, c, d = ring_ids[r, j], ring_ids[r, k], ring_ids[r + 1, k], ring_ids[r + 1, j]
                for t in ((a, d, c), (a, c, b)):
                    tris.append(t if inward > 0 else t[::-1])
    return TriMesh(
        np.asarray(verts, dtype=np.float64),
        np.asarray(tris, dtype=np.int64),
        np.asarray(norms, dtype=np.float64),
        np.asarray(uvs, dtype=np.float64),
    )
