"""Exact Euclidean distance-from-boundary field.

Three separable 1-D passes of the lower-envelope-of-parabolas transform
(Felzenszwalb & Huttenlocher) over a volume padded by one background layer,
with physical spacing per axis so distances come out in millimeters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import EmptyMask
from .volume_io import VoxelMask, save_volume_f32


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Distance (mm) from every voxel center to the nearest background voxel center.

    Background voxels hold 0. Everything outside the volume counts as background.
    """

    dfb: np.ndarray
    spacing: tuple[float, float, float]

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.dfb.shape)

    @property
    def max(self) -> float:
        return float(self.dfb.max())

    @property
    def foreground(self) -> np.ndarray:
        return self.dfb > 0.0

    def save(self, path):
        return save_volume_f32(self.dfb, self.spacing, path)


@numba.njit(cache=True, nogil=True)
def _envelope_1d(f, step, out, v, z):
    """Squared-distance transform of one sampled line ``f`` with sample pitch ``step``."""
    n = f.shape[0]
    k = -1
    for q in range(n):
        if not np.isfinite(f[q]):
            continue
        xq = q * step
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            xv = v[k] * step
            s = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv))
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    k = 0
    for q in range(n):
        xq = q * step
        while z[k + 1] < xq:
            k += 1
        d = xq - v[k] * step
        out[q] = d * d + f[v[k]]


@numba.njit(cache=True, nogil=True)
def _pass_last_axis(vol, step):
    lines = vol.shape[0]
    n = vol.shape[1]
    out = np.empty_like(vol)
    v = np.zeros(n, dtype=np.int64)
    z = np.zeros(n + 1, dtype=np.float64)
    for i in range(lines):
        _envelope_1d(vol[i], step, out[i], v, z)
    return out


def _transform_axis(sq: np.ndarray, axis: int, step: float) -> np.ndarray:
    moved = np.moveaxis(sq, axis, -1)
    shape = moved.shape
    flat = np.ascontiguousarray(moved).reshape(-1, shape[-1])
    return np.moveaxis(_pass_last_axis(flat, float(step)).reshape(shape), -1, axis)


def squared_edt(occupied: np.ndarray, spacing) -> np.ndarray:
    """Squared distance to the nearest ``False`` voxel center, padded by background."""
    padded = np.pad(np.asarray(occupied, dtype=bool), 1, constant_values=False)
    sq = np.where(padded, np.inf, 0.0)
    for axis in range(3):
        sq = _transform_axis(sq, axis, spacing[axis])
    return sq[1:-1, 1:-1, 1:-1]


def compute_edt(mask: VoxelMask) -> DistanceField:
    if not mask.data.any():
        raise EmptyMask("mask has no foreground voxels")
    dfb = np.sqrt(squared_edt(mask.data, mask.spacing))
    dfb[~mask.data] = 0.0
    return DistanceField(dfb, mask.spacing)
