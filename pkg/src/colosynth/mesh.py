"""Surface extraction, smoothing, orientation and tube UV unwrapping.

The isosurface is extracted from the binary field sampled at voxel centers,
padded by one background layer. The marching-cubes case table is generated
at import time from a per-face rule (see ``_case_triangles``), which makes
the output watertight for every mask.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .centerline import Centerline
from .errors import DegenerateCenterline, EmptyMask
from .volume_io import VoxelMask


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray  # (V, 3) mm
    triangles: np.ndarray  # (F, 3) int64
    normals: np.ndarray  # (V, 3) unit
    uvs: np.ndarray | None = None  # (V, 2)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        """Undirected edges with multiplicity, shape (3F, 2), each row sorted."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(e, axis=1)

    def unique_edges(self) -> np.ndarray:
        return np.unique(self.edges(), axis=0)

    def euler_characteristic(self) -> int:
        used = np.unique(self.triangles)
        return int(len(used) - len(self.unique_edges()) + len(self.triangles))

    def is_watertight(self) -> bool:
        _, counts = np.unique(self.edges(), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def welded(self) -> "TriMesh":
        """Merge vertices with identical positions (undoes UV seam duplication); drops UVs."""
        verts, first, inverse = np.unique(self.vertices, axis=0, return_index=True, return_inverse=True)
        return TriMesh(verts, inverse.reshape(-1)[self.triangles], self.normals[first])

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def signed_volume(self) -> float:
        p = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def face_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted (unnormalized) face normals following the winding."""
    p = vertices[triangles]
    return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    fn = face_normals(vertices, triangles)
    acc = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(acc, triangles[:, k], fn)
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    norm[norm == 0.0] = 1.0
    return acc / norm


# Cube corners are numbered by their (x, y, z) bits; edges join corners one bit apart.
_CORNER_BITS = np.array([(i & 1, (i >> 1) & 1, (i >> 2) & 1) for i in range(8)], dtype=np.int64)
_EDGES = np.array([(a, a | (1 << axis)) for axis in range(3) for a in range(8) if not a & (1 << axis)], dtype=np.int64)
_FACES = [
    # corner cycles of the six cube faces
    (0, 2, 6, 4), (1, 3, 7, 5),  # x = 0, x = 1
    (0, 1, 5, 4), (2, 3, 7, 6),  # y = 0, y = 1
    (0, 1, 3, 2), (4, 5, 7, 6),  # z = 0, z = 1
]


def _edge_index(a: int, b: int) -> int:
    a, b = min(a, b), max(a, b)
    return int(np.flatnonzero((_EDGES[:, 0] == a) & (_EDGES[:, 1] == b))[0])


def _case_triangles(inside: tuple[bool, ...]) -> list[tuple[int, int, int]]:
    """Triangles (as edge triples) for one corner configuration.

    Surface segments are drawn face by face; a face with alternating corners
    always cuts off its inside corners separately. The rule depends only on
    the face, so the two cubes sharing a face agree and the surface closes.
    """
    link: dict[int, list[int]] = {}
    for face in _FACES:
        crossings = []
        for k in range(4):
            a, b = face[k], face[(k + 1) % 4]
            if inside[a] != inside[b]:
                crossings.append((k, _edge_index(a, b)))
        if len(crossings) == 2:
            pairs = [(crossings[0][1], crossings[1][1])]
        elif len(crossings) == 4:
            edge_of = {k: e for k, e in crossings}
            pairs = [(edge_of[(k - 1) % 4], edge_of[k]) for k in range(4) if inside[face[k]]]
        else:
            pairs = []
        for e0, e1 in pairs:
            link.setdefault(e0, []).append(e1)
            link.setdefault(e1, []).append(e0)

    mid = (_CORNER_BITS[_EDGES[:, 0]] + _CORNER_BITS[_EDGES[:, 1]]) / 2.0
    triangles = []
    unvisited = set(link)
    while unvisited:
        first = min(unvisited)
        cycle, prev, cur = [first], None, first
        while True:
            nxt = [e for e in link[cur] if e != prev]
            nxt = min(nxt) if prev is None else nxt[0]
            if nxt == first:
                break
            cycle.append(nxt)
            prev, cur = cur, nxt
        unvisited -= set(cycle)
        pts = mid[cycle]
        newell = np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
        outward = np.zeros(3)
        for e in cycle:
            a, b = _EDGES[e]
            outward += (_CORNER_BITS[b] - _CORNER_BITS[a]) * (1.0 if inside[a] else -1.0)
        if np.dot(newell, outward) < 0:
            cycle = cycle[::-1]
        triangles.extend(_triangulate(cycle))
    return triangles


_FACE_EDGE_SETS = [
    {_edge_index(f[k], f[(k + 1) % 4]) for k in range(4)} for f in _FACES
]


def _diagonal_ok(a: int, b: int) -> bool:
    # a chord between crossings on one face could be chosen by the neighbor cube too
    return not any(a in s and b in s for s in _FACE_EDGE_SETS)


def _triangulate(poly: list[int]) -> list[tuple[int, int, int]]:
    """Triangulate a crossing cycle using only chords that stay inside the cube."""
    if len(poly) == 3:
        return [tuple(poly)]
    first, last = poly[0], poly[-1]
    for k in range(1, len(poly) - 1):
        if k > 1 and not _diagonal_ok(first, poly[k]):
            continue
        if k < len(poly) - 2 and not _diagonal_ok(poly[k], last):
            continue
        left = _triangulate(poly[: k + 1]) if k > 1 else []
        right = _triangulate(poly[k:]) if k < len(poly) - 2 else []
        if (k > 1 and left is None) or (k < len(poly) - 2 and right is None):
            continue
        return (left or []) + [(first, poly[k], last)] + (right or [])
    return None


def _build_case_table() -> np.ndarray:
    cases = [_case_triangles(tuple(bool(c >> i & 1) for i in range(8))) for c in range(256)]
    width = max(len(t) for t in cases)
    table = np.full((256, width, 3), -1, dtype=np.int64)
    for c, tris in enumerate(cases):
        if tris:
            table[c, : len(tris)] = tris
    return table


_CASES = _build_case_table()


def marching_cubes(mask: VoxelMask, iso: float = 0.5) -> TriMesh:
    """Closed isosurface of the padded binary field, vertices in world mm.

    Triangles are wound counter-clockwise seen from outside the foreground,
    and the returned normals point outward.
    """
    if not 0.0 < iso < 1.0:
        raise ValueError("iso must lie in (0, 1)")
    if not mask.data.any():
        raise EmptyMask("mask has no foreground voxels")
    field = np.pad(mask.data, 1, constant_values=False)
    dims = np.asarray(field.shape, dtype=np.int64)
    strides = np.array([dims[1] * dims[2], dims[2], 1], dtype=np.int64)

    corners = np.stack(
        [field[b[0] : dims[0] - 1 + b[0], b[1] : dims[1] - 1 + b[1], b[2] : dims[2] - 1 + b[2]] for b in _CORNER_BITS],
        axis=-1,
    )
    case = (corners.astype(np.int64) << np.arange(8)).sum(axis=-1)
    origins = np.argwhere((case != 0) & (case != 255)).astype(np.int64)  # C order, deterministic
    case = case[tuple(origins.T)]
    corner_ids = (origins @ strides)[:, None] + _CORNER_BITS @ strides  # (m, 8)

    slots = _CASES[case]  # (m, width, 3) edge numbers, -1 padded
    valid = slots[:, :, 0] >= 0
    cube_of = np.broadcast_to(np.arange(len(case))[:, None], valid.shape)[valid]
    tri_edges = slots[valid]  # (F, 3)
    ends = _EDGES[tri_edges]  # (F, 3, 2) cube corner numbers
    ga = corner_ids[cube_of[:, None], ends[..., 0]]
    gb = corner_ids[cube_of[:, None], ends[..., 1]]

    n_points = int(dims.prod())
    keys = np.minimum(ga, gb) * n_points + np.maximum(ga, gb)
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
    triangles = inverse.reshape(-1, 3).astype(np.int64)

    lo, hi = uniq // n_points, uniq % n_points
    flat = field.ravel()
    p_in = np.where(flat[lo], lo, hi)
    p_out = np.where(flat[lo], hi, lo)
    grid_in = np.column_stack(np.unravel_index(p_in, field.shape)).astype(np.float64)
    grid_out = np.column_stack(np.unravel_index(p_out, field.shape)).astype(np.float64)
    # field is 1 inside, 0 outside: the crossing sits (1 - iso) of the way out
    vertices = (grid_in + (1.0 - iso) * (grid_out - grid_in) - 1.0) * np.asarray(mask.spacing)
    return TriMesh(vertices, triangles, vertex_normals(vertices, triangles))


def _adjacency(mesh: TriMesh) -> sparse.csr_matrix:
    e = mesh.unique_edges()
    n = mesh.n_vertices
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def smooth_mesh(mesh: TriMesh, iterations: int = 10, step: float = 0.5) -> TriMesh:
    """Uniform Laplacian smoothing; each pass moves vertices ``step`` toward their 1-ring mean."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if iterations == 0:
        return mesh
    if not 0.0 < step < 1.0:
        raise ValueError("step must lie in (0, 1)")
    adj = _adjacency(mesh)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    deg[deg == 0] = 1.0
    v = mesh.vertices.copy()
    for _ in range(iterations):
        mean = (adj @ v) / deg[:, None]
        v = v + step * (mean - v)
    normals = vertex_normals(v, mesh.triangles)
    if mesh.normals is not None and len(mesh.normals):
        # keep the orientation convention of the input
        sign = np.sign(np.einsum("ij,ij->i", normals, mesh.normals).sum())
        if sign < 0:
            normals = -normals
    return replace(mesh, vertices=v, normals=normals)


def _densify(c: Centerline, step: float) -> Centerline:
    if len(c) < 2 or c.length <= 0.0:
        raise DegenerateCenterline("need at least 2 distinct centerline points")
    n = max(1, int(np.ceil(c.length / step)))
    s = np.linspace(0.0, c.length, n + 1)
    pts = np.column_stack([np.interp(s, c.arclength, c.points[:, i]) for i in range(3)])
    return Centerline(pts, s)


def orient_inward(mesh: TriMesh, cl: Centerline) -> TriMesh:
    """Flip whole connected components whose normals mostly face away from the centerline."""
    dense = _densify(cl, 0.5)
    _, nearest = cKDTree(dense.points).query(mesh.vertices)
    to_center = dense.points[nearest] - mesh.vertices
    dots = np.einsum("ij,ij->i", mesh.normals, to_center)
    n_comp, labels = connected_components(_adjacency(mesh), directed=False)
    flip_comp = np.zeros(n_comp, dtype=bool)
    for k in range(n_comp):
        d = dots[labels == k]
        flip_comp[k] = np.count_nonzero(d < 0) > np.count_nonzero(d > 0)
    if not flip_comp.any():
        return mesh
    flip_v = flip_comp[labels]
    tris = mesh.triangles.copy()
    flip_t = flip_v[tris[:, 0]]
    tris[flip_t] = tris[flip_t][:, ::-1]
    normals = np.where(flip_v[:, None], -mesh.normals, mesh.normals)
    return replace(mesh, triangles=tris, normals=normals)


@dataclass(frozen=True, eq=False)
class CenterlineFrameField:
    positions: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    binormals: np.ndarray
    arclength: np.ndarray

    @property
    def length(self) -> float:
        return float(self.arclength[-1])


def least_aligned_axis(direction: np.ndarray) -> np.ndarray:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(direction)))] = 1.0
    return axis


def rotation_minimizing_frames(points: np.ndarray, tangents: np.ndarray, initial_normal=None) -> np.ndarray:
    """Normals transported along a polyline by the double-reflection rule (Wang et al. 2008)."""
    t0 = tangents[0]
    r = least_aligned_axis(t0) if initial_normal is None else np.asarray(initial_normal, dtype=np.float64)
    r = r - np.dot(r, t0) * t0
    r /= np.linalg.norm(r)
    normals = np.empty_like(points)
    normals[0] = r
    for i in range(len(points) - 1):
        v1 = points[i + 1] - points[i]
        c1 = float(np.dot(v1, v1))
        if c1 == 0.0:
            r_l, t_l = r, tangents[i]
        else:
            r_l = r - (2.0 / c1) * np.dot(v1, r) * v1
            t_l = tangents[i] - (2.0 / c1) * np.dot(v1, tangents[i]) * v1
        v2 = tangents[i + 1] - t_l
        c2 = float(np.dot(v2, v2))
        r = r_l if c2 == 0.0 else r_l - (2.0 / c2) * np.dot(v2, r_l) * v2
        t = tangents[i + 1]
        r = r - np.dot(r, t) * t
        r /= np.linalg.norm(r)
        normals[i + 1] = r
    return normals


def frame_field(cl: Centerline, sample_step: float = 0.5, tangent_window: float = 2.0) -> CenterlineFrameField:
    """Rotation-minimizing frames on a densified copy of the centerline.

    Tangents are chords over +-``tangent_window`` mm, which removes the
    staircase of voxel paths.
    """
    dense = _densify(cl, sample_step)
    s = dense.arclength
    ahead = np.column_stack([np.interp(np.minimum(s + tangent_window, s[-1]), s, dense.points[:, i]) for i in range(3)])
    behind = np.column_stack([np.interp(np.maximum(s - tangent_window, 0.0), s, dense.points[:, i]) for i in range(3)])
    tangents = ahead - behind
    tangents /= np.linalg.norm(tangents, axis=1, keepdims=True)
    normals = rotation_minimizing_frames(dense.points, tangents)
    binormals = np.cross(tangents, normals)
    return CenterlineFrameField(dense.points, tangents, normals, binormals, s)


def circumferential_u(offset: np.ndarray, normal: np.ndarray, binormal: np.ndarray) -> np.ndarray:
    """Angle of ``offset`` around the frame, mapped to [0, 1); 0 along +normal."""
    a = np.arctan2(np.einsum("ij,ij->i", offset, binormal), np.einsum("ij,ij->i", offset, normal))
    u = a / (2.0 * np.pi)
    u = np.where(u < 0.0, u + 1.0, u)
    return np.where(u >= 1.0, 0.0, u)


def unwrap_uv(mesh: TriMesh, frames: CenterlineFrameField) -> TriMesh:
    """Tube parameterization: v = arclength fraction, u = angle around the centerline.

    Triangles straddling the u = 0 seam get duplicated corners carrying
    ``u + 1`` so that interpolation inside them is continuous; the texture
    sampler wraps u, so these values address the same texels.
    """
    if len(frames.positions) < 2 or frames.length <= 0.0:
        raise DegenerateCenterline("frame field needs a centerline of positive length")
    _, nearest = cKDTree(frames.positions).query(mesh.vertices)
    offset = mesh.vertices - frames.positions[nearest]
    u = circumferential_u(offset, frames.normals[nearest], frames.binormals[nearest])
    v = np.clip(frames.arclength[nearest] / frames.length, 0.0, 1.0)

    tris = mesh.triangles
    cu = u[tris]  # (F, 3) per-corner u
    wrap = -np.round(cu - cu[:, :1])  # whole turns placing each corner next to corner 0
    shifted = cu + wrap
    shift = wrap - np.floor(shifted.min(axis=1, keepdims=True))
    corner_u = np.where(shift != 0.0, cu + shift, cu)
    # triangles enclosing the axis: u is singular there; squeeze around the circular mean
    pole = (shifted.max(axis=1) - shifted.min(axis=1)) > 0.5
    if pole.any():
        delta = shifted[pole] - shifted[pole][:, :1]
        mean = np.arctan2(np.sin(2 * np.pi * delta).mean(axis=1), np.cos(2 * np.pi * delta).mean(axis=1)) / (2 * np.pi)
        rel = delta - mean[:, None]
        rel = rel - np.round(rel)
        squeezed = cu[pole][:, :1] + mean[:, None] + np.clip(rel, -0.25, 0.25)
        corner_u[pole] = squeezed - np.floor(squeezed.min(axis=1, keepdims=True))

    needs_copy = corner_u != cu
    new_tris = tris.copy()
    extra_keys = {}
    extra_src, extra_u = [], []
    n = mesh.n_vertices
    for f, k in zip(*np.nonzero(needs_copy)):
        key = (int(tris[f, k]), float(corner_u[f, k]))
        idx = extra_keys.get(key)
        if idx is None:
            idx = n + len(extra_src)
            extra_keys[key] = idx
            extra_src.append(key[0])
            extra_u.append(key[1])
        new_tris[f, k] = idx
    src = np.asarray(extra_src, dtype=np.int64)
    vertices = np.concatenate([mesh.vertices, mesh.vertices[src]])
    normals = np.concatenate([mesh.normals, mesh.normals[src]])
    uvs = np.concatenate([np.column_stack([u, v]), np.column_stack([np.asarray(extra_u), v[src]])])
    return TriMesh(vertices, new_tris, normals, uvs)


def seam_span(mesh: TriMesh) -> np.ndarray:
    """Per-triangle max(u) - min(u) over its corners."""
    cu = mesh.uvs[mesh.triangles, 0]
    return cu.max(axis=1) - cu.min(axis=1)


def build_colon_mesh(mask: VoxelMask, cl: Centerline, iso: float = 0.5, iterations: int = 10, step: float = 0.5) -> TriMesh:
    """marching_cubes -> smooth_mesh -> orient_inward -> unwrap_uv."""
    mesh = marching_cubes(mask, iso)
    mesh = smooth_mesh(mesh, iterations, step)
    mesh = orient_inward(mesh, cl)
    return unwrap_uv(mesh, frame_field(cl))
