"""Independent reference computations used as test oracles.

These are deliberately naive: brute-force scans, scipy's graph routines and
scalar math-module formulas, sharing no code with the package.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra


def random_mask(rng: np.random.Generator, max_side: int = 12, fill: float | None = None) -> np.ndarray:
    dims = tuple(int(n) for n in rng.integers(1, max_side + 1, size=3))
    p = rng.uniform(0.3, 0.95) if fill is None else fill
    return rng.random(dims) < p


def brute_edt(mask: np.ndarray, spacing) -> np.ndarray:
    """Distance from each voxel center to the nearest background center.

    Background includes the one-voxel shell just outside the grid.
    """
    padded = np.pad(mask, 1, constant_values=False)
    bg = np.argwhere(~padded).astype(np.float64) - 1.0
    bg *= np.asarray(spacing)
    out = np.zeros(mask.shape)
    for idx in np.argwhere(mask):
        p = idx * np.asarray(spacing)
        out[tuple(idx)] = math.sqrt(((bg - p) ** 2).sum(axis=1).min())
    return out


def path_cost_oracle(dfb: np.ndarray, spacing, lam: float, start, end) -> float:
    """Minimum-cost path over 26-connected foreground voxels via scipy's Dijkstra."""
    dims = dfb.shape
    fg = dfb > 0
    dmax = dfb.max()
    ids = np.full(dims, -1)
    ids[fg] = np.arange(fg.sum())
    rows, cols, w = [], [], []
    spacing = np.asarray(spacing, dtype=float)
    for off in itertools.product((-1, 0, 1), repeat=3):
        if off == (0, 0, 0):
            continue
        step = float(np.linalg.norm(np.asarray(off) * spacing))
        for a in np.argwhere(fg):
            b = a + off
            if np.any(b < 0) or np.any(b >= dims) or not fg[tuple(b)]:
                continue
            m = min(dfb[tuple(a)], dfb[tuple(b)])
            rows.append(ids[tuple(a)])
            cols.append(ids[tuple(b)])
            w.append(step * (dmax / m) ** lam)
    g = sparse.csr_matrix((w, (rows, cols)), shape=(fg.sum(), fg.sum()))
    d = dijkstra(g, indices=ids[tuple(start)])
    return float(d[ids[tuple(end)]])


def ggx_aniso_reference(ht, hb, hn, at, ab) -> float:
    s = (ht / at) ** 2 + (hb / ab) ** 2 + hn**2
    return 1.0 / (math.pi * at * ab * s * s)


def smith_lambda_reference(wt, wb, wn, at, ab) -> float:
    return 0.5 * (math.sqrt(1.0 + ((at * wt) ** 2 + (ab * wb) ** 2) / (wn * wn)) - 1.0)


def lobe_reference(n, t, b, v, l, f0, at, ab):
    """Scalar evaluation of D G F / (4 N.V) for one RGB lobe."""
    dot = lambda x, y: sum(p * q for p, q in zip(x, y))  # noqa: E731
    hv = [x + y for x, y in zip(v, l)]
    hl = math.sqrt(dot(hv, hv))
    h = [x / hl for x in hv]
    nl, nv = dot(n, l), dot(n, v)
    if nl <= 0 or nv <= 0:
        return [0.0, 0.0, 0.0]
    d = ggx_aniso_reference(dot(h, t), dot(h, b), dot(h, n), at, ab)
    g = 1.0 / (1.0 + smith_lambda_reference(dot(v, t), dot(v, b), nv, at, ab) + smith_lambda_reference(dot(l, t), dot(l, b), nl, at, ab))
    vh = max(0.0, min(1.0, dot(v, h)))
    return [(f + (1 - f) * (1 - vh) ** 5) * d * g / (4 * nv) for f in f0]


def shade_reference(albedo, n, t, b, v, l, d2, metallic, smoothness, coat_mask, anisotropy, intensity, color):
    """Headlight shading formula evaluated channel by channel with the math module."""
    nl = max(0.0, sum(p * q for p, q in zip(n, l)))
    if nl <= 0:
        return [0.0, 0.0, 0.0]
    alpha = max((1 - smoothness) ** 2, 1e-3)
    at, ab = alpha * (1 + anisotropy), alpha / (1 + anisotropy)
    f0 = [0.04 + (a - 0.04) * metallic for a in albedo]
    spec = lobe_reference(n, t, b, v, l, f0, at, ab)
    coat = lobe_reference(n, t, b, v, l, [0.04] * 3, 0.1, 0.1)
    out = []
    for c in range(3):
        diffuse = (1 - metallic) * albedo[c] * nl / math.pi
        out.append(intensity * color[c] / d2 * (diffuse + spec[c] + coat_mask * coat[c]))
    return out


def ray_cylinder_depth(dirs: np.ndarray, origin_z: float, radius: float, length: float) -> np.ndarray:
    """Distance along unit rays from (0, 0, origin_z) to a capped cylinder's interior wall."""
    dz = dirs[..., 2]
    radial = np.hypot(dirs[..., 0], dirs[..., 1])
    with np.errstate(divide="ignore"):
        t_wall = np.where(radial > 0, radius / radial, np.inf)
        t_cap = np.where(dz > 0, (length - origin_z) / dz, np.where(dz < 0, -origin_z / dz, np.inf))
    return np.minimum(t_wall, t_cap)


def pinhole_dirs(forward, up, fov_deg: float, width: int, height: int) -> np.ndarray:
    """Unit ray directions through pixel centers for a symmetric pinhole camera."""
    f = np.asarray(forward, float) / np.linalg.norm(forward)
    r = np.cross(f, up)
    r /= np.linalg.norm(r)
    u = np.cross(r, f)
    th = math.tan(math.radians(fov_deg) / 2)
    out = np.empty((height, width, 3))
    for i in range(height):
        for j in range(width):
            x = (2 * (j + 0.5) / width - 1) * th * width / height
            y = (1 - 2 * (i + 0.5) / height) * th
            d = x * r + y * u + f
            out[i, j] = d / np.linalg.norm(d)
    return out
