"""Bounding-volume hierarchy over triangles and closest-hit ray queries.

The tree is built once per mesh (median split on the longest centroid axis,
stable sort, so the layout is deterministic) and then only read. Ray queries
release the GIL, so independent tiles can be traced from several threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

LEAF_SIZE = 4


@numba.njit(cache=True, nogil=True)
def _build(tri_min, tri_max, centroids, leaf_size):
    n = centroids.shape[0]
    cap = 2 * n + 1
    bmin = np.empty((cap, 3))
    bmax = np.empty((cap, 3))
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    first = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    order = np.arange(n)

    stack = np.empty((cap, 3), dtype=np.int64)  # node, start, end
    stack[0, 0], stack[0, 1], stack[0, 2] = 0, 0, n
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node, start, end = stack[sp, 0], stack[sp, 1], stack[sp, 2]
        for k in range(3):
            lo = np.inf
            hi = -np.inf
            for i in range(start, end):
                p = order[i]
                lo = min(lo, tri_min[p, k])
                hi = max(hi, tri_max[p, k])
            bmin[node, k] = lo
            bmax[node, k] = hi
        if end - start <= leaf_size:
            first[node] = start
            count[node] = end - start
            continue
        axis = 0
        best = -1.0
        for k in range(3):
            lo = np.inf
            hi = -np.inf
            for i in range(start, end):
                c = centroids[order[i], k]
                lo = min(lo, c)
                hi = max(hi, c)
            if hi - lo > best:
                best = hi - lo
                axis = k
        seg = order[start:end].copy()
        keys = centroids[seg, axis]
        perm = np.argsort(keys, kind="mergesort")
        order[start:end] = seg[perm]
        mid = (start + end) // 2
        l_node = n_nodes
        r_node = n_nodes + 1
        n_nodes += 2
        left[node] = l_node
        right[node] = r_node
        stack[sp, 0], stack[sp, 1], stack[sp, 2] = l_node, start, mid
        sp += 1
        stack[sp, 0], stack[sp, 1], stack[sp, 2] = r_node, mid, end
        sp += 1
    return bmin[:n_nodes], bmax[:n_nodes], left[:n_nodes], right[:n_nodes], first[:n_nodes], count[:n_nodes], order


@numba.njit(cache=True, nogil=True)
def _slab(o, inv, lo, hi, t_max):
    t0 = 0.0
    t1 = t_max
    for k in range(3):
        a = (lo[k] - o[k]) * inv[k]
        b = (hi[k] - o[k]) * inv[k]
        if a > b:
            a, b = b, a
        if a > t0:
            t0 = a
        if b < t1:
            t1 = b
        if t0 > t1:
            return False
    return True


@numba.njit(cache=True, nogil=True)
def trace(origins, dirs, v0, e1, e2, bmin, bmax, left, right, first, count, order, t_out, tri_out, b1_out, b2_out):
    """Closest hit per ray (Moller-Trumbore, two-sided). Misses get tri = -1, t = 0."""
    eps = 1e-12
    edge_eps = 1e-9  # closes cracks along shared edges; ties go to the lower index
    stack = np.empty(128, dtype=np.int64)
    inv = np.empty(3)
    for r in range(origins.shape[0]):
        o = origins[r]
        d = dirs[r]
        for k in range(3):
            inv[k] = 1.0 / d[k] if d[k] != 0.0 else np.inf
        best_t = np.inf
        best_tri = -1
        best_b1 = 0.0
        best_b2 = 0.0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if not _slab(o, inv, bmin[node], bmax[node], best_t):
                continue
            if left[node] < 0:
                for i in range(first[node], first[node] + count[node]):
                    tri = order[i]
                    ax, ay, az = e1[tri, 0], e1[tri, 1], e1[tri, 2]
                    bx, by, bz = e2[tri, 0], e2[tri, 1], e2[tri, 2]
                    px = d[1] * bz - d[2] * by
                    py = d[2] * bx - d[0] * bz
                    pz = d[0] * by - d[1] * bx
                    det = ax * px + ay * py + az * pz
                    if abs(det) < eps:
                        continue
                    inv_det = 1.0 / det
                    sx = o[0] - v0[tri, 0]
                    sy = o[1] - v0[tri, 1]
                    sz = o[2] - v0[tri, 2]
                    u = (sx * px + sy * py + sz * pz) * inv_det
                    if u < -edge_eps or u > 1.0 + edge_eps:
                        continue
                    qx = sy * az - sz * ay
                    qy = sz * ax - sx * az
                    qz = sx * ay - sy * ax
                    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv_det
                    if v < -edge_eps or u + v > 1.0 + edge_eps:
                        continue
                    t = (bx * qx + by * qy + bz * qz) * inv_det
                    if t > 1e-9 and (t < best_t or (t == best_t and tri < best_tri)):
                        best_t = t
                        best_tri = tri
                        best_b1 = u
                        best_b2 = v
            else:
                stack[sp] = right[node]
                sp += 1
                stack[sp] = left[node]
                sp += 1
        if best_tri >= 0:
            t_out[r] = best_t
        else:
            t_out[r] = 0.0
        tri_out[r] = best_tri
        b1_out[r] = best_b1
        b2_out[r] = best_b2


@dataclass(frozen=True, eq=False)
class BVH:
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    bmin: np.ndarray
    bmax: np.ndarray
    left: np.ndarray
    right: np.ndarray
    first: np.ndarray
    count: np.ndarray
    order: np.ndarray

    @classmethod
    def build(cls, vertices: np.ndarray, triangles: np.ndarray, leaf_size: int = LEAF_SIZE) -> "BVH":
        p = vertices[triangles]
        tri_min = np.ascontiguousarray(p.min(axis=1))
        tri_max = np.ascontiguousarray(p.max(axis=1))
        centroids = np.ascontiguousarray(p.mean(axis=1))
        nodes = _build(tri_min, tri_max, centroids, leaf_size)
        return cls(
            np.ascontiguousarray(p[:, 0]),
            np.ascontiguousarray(p[:, 1] - p[:, 0]),
            np.ascontiguousarray(p[:, 2] - p[:, 0]),
            *nodes,
        )

    def intersect(self, origins: np.ndarray, dirs: np.ndarray):
        """Return (t, triangle, b1, b2) arrays for unit-direction rays."""
        n = len(origins)
        t = np.empty(n)
        tri = np.empty(n, dtype=np.int64)
        b1 = np.empty(n)
        b2 = np.empty(n)
        trace(
            np.ascontiguousarray(origins, dtype=np.float64),
            np.ascontiguousarray(dirs, dtype=np.float64),
            self.v0, self.e1, self.e2, self.bmin, self.bmax, self.left, self.right, self.first, self.count, self.order,
            t, tri, b1, b2,
        )
        return t, tri, b1, b2
