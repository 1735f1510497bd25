"""Wall-penalized shortest paths through the colon lumen.

A path is searched over foreground voxels with 26-connectivity. An edge between
voxels ``a`` and ``b`` costs::

    step_mm(a, b) * (dfb_max / min(dfb(a), dfb(b))) ** lam

so ``lam = 0`` gives the plain geometric shortest path and larger ``lam``
pushes the path away from the wall toward the lumen center.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numba
import numpy as np

from .distance_field import DistanceField
from .errors import DegenerateCenterline, Disconnected, EmptyMask, EndpointInBackground

DEFAULT_LAMBDA = 2.0

_OFFSETS = np.array(
    [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)],
    dtype=np.int64,
)


@dataclass(frozen=True, eq=False)
class Centerline:
    points: np.ndarray  # (n, 3) world mm
    arclength: np.ndarray  # (n,) cumulative mm
    voxels: np.ndarray | None = None  # (n, 3) voxel indices, when extracted from a grid
    cost: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @classmethod
    def from_points(cls, points) -> "Centerline":
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
        return cls(points, np.concatenate([[0.0], np.cumsum(steps)]))


@dataclass(frozen=True, eq=False)
class WaypointPath:
    waypoints: np.ndarray  # (n+1, 3) world mm
    spacing_mm: float
    arclength: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.waypoints)


@numba.njit(cache=True, nogil=True)
def _dijkstra(dfb, spacing, offsets, lam, dfb_max, source, target):
    nx, ny, nz = dfb.shape
    n = nx * ny * nz
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    steps = np.empty(offsets.shape[0])
    for o in range(offsets.shape[0]):
        steps[o] = np.sqrt(
            (offsets[o, 0] * spacing[0]) ** 2 + (offsets[o, 1] * spacing[1]) ** 2 + (offsets[o, 2] * spacing[2]) ** 2
        )
    dist[source] = 0.0
    heap = [(0.0, source)]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        ux = u // (ny * nz)
        uy = (u // nz) % ny
        uz = u % nz
        du = dfb[ux, uy, uz]
        for o in range(offsets.shape[0]):
            vx = ux + offsets[o, 0]
            vy = uy + offsets[o, 1]
            vz = uz + offsets[o, 2]
            if vx < 0 or vy < 0 or vz < 0 or vx >= nx or vy >= ny or vz >= nz:
                continue
            dv = dfb[vx, vy, vz]
            if dv <= 0.0:
                continue
            v = (vx * ny + vy) * nz + vz
            if done[v]:
                continue
            w = steps[o]
            if lam != 0.0:
                w = w * (dfb_max / min(du, dv)) ** lam
            nd = d + w
            if nd < dist[v] or (nd == dist[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _flat(index, dims) -> int:
    return int(np.ravel_multi_index(tuple(int(i) for i in index), dims))


def _check_endpoint(df: DistanceField, index, name: str) -> tuple[int, int, int]:
    index = tuple(int(i) for i in index)
    if len(index) != 3 or any(i < 0 or i >= n for i, n in zip(index, df.dims)):
        raise EndpointInBackground(f"{name} {index} lies outside the volume {df.dims}")
    if df.dfb[index] <= 0.0:
        raise EndpointInBackground(f"{name} {index} is a background voxel")
    return index


def geodesic_distances(df: DistanceField, source, lam: float = 0.0, target=None):
    """Penalized geodesic distance (and predecessor) arrays from ``source``."""
    flat_target = -1 if target is None else _flat(target, df.dims)
    return _dijkstra(
        df.dfb,
        np.asarray(df.spacing, dtype=np.float64),
        _OFFSETS,
        float(lam),
        df.max,
        _flat(source, df.dims),
        flat_target,
    )


def extract_centerline(df: DistanceField, start, end, lam: float = DEFAULT_LAMBDA) -> Centerline:
    """Minimum-cost 26-connected path between two foreground voxels.

    Equal-cost alternatives resolve toward the lexicographically smaller
    predecessor voxel index, so output is reproducible bit for bit.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    start = _check_endpoint(df, start, "start")
    end = _check_endpoint(df, end, "end")
    dist, pred = geodesic_distances(df, start, lam, end)
    target = _flat(end, df.dims)
    if not np.isfinite(dist[target]):
        raise Disconnected(f"no foreground path from {start} to {end}")
    chain = [target]
    while chain[-1] != _flat(start, df.dims):
        chain.append(int(pred[chain[-1]]))
    voxels = np.column_stack(np.unravel_index(np.asarray(chain[::-1]), df.dims)).astype(np.int64)
    points = voxels * np.asarray(df.spacing)
    line = Centerline.from_points(points)
    return Centerline(line.points, line.arclength, voxels, float(dist[target]))


def _farthest(dist: np.ndarray, dims) -> tuple[int, int, int]:
    finite = np.where(np.isfinite(dist), dist, -1.0)
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(finite)), dims))


def auto_endpoints(df: DistanceField) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    """Double geodesic sweep from the deepest lumen voxel.

    The voxel farthest (geometric geodesic distance) from the maximal-distance
    voxel is the start; the voxel farthest from the start is the end.
    """
    if not df.foreground.any():
        raise EmptyMask("distance field has no foreground")
    seed = tuple(int(i) for i in np.unravel_index(int(np.argmax(df.dfb)), df.dims))
    dist, _ = geodesic_distances(df, seed, 0.0)
    start = _farthest(dist, df.dims)
    dist, _ = geodesic_distances(df, start, 0.0)
    end = _farthest(dist, df.dims)
    return start, end


def resample_waypoints(c: Centerline, requested_spacing_mm: float) -> WaypointPath:
    """Equidistant (in arclength) resampling of a centerline polyline."""
    if len(c) < 2:
        raise DegenerateCenterline("need at least 2 centerline points")
    if not requested_spacing_mm > 0:
        raise ValueError("requested spacing must be positive")
    total = c.length
    if total <= 0.0:
        raise DegenerateCenterline("centerline has zero length")
    n = max(1, int(round(total / requested_spacing_mm)))
    targets = np.arange(n + 1) * (total / n)
    targets[-1] = total
    waypoints = np.column_stack([np.interp(targets, c.arclength, c.points[:, i]) for i in range(3)])
    waypoints[0] = c.points[0]
    waypoints[-1] = c.points[-1]
    return WaypointPath(waypoints, total / n, targets)
