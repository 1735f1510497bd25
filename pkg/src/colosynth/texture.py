"""Seeded procedural albedo textures that wrap exactly around the tube.

Texel column ``x`` sits at ``u = x / W`` and row ``y`` at ``v = (y + 0.5) / H``.
Every mode is built from a field that is periodic in u with period 1, so the
first column equals a virtual column at u = 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numba
import numpy as np

from . import hashing
from .errors import InvalidSpec
from .volume_io import write_png

MODES = ("mucosa", "noise", "checker", "stripes")

MUCOSA_COLOR_A = (0.78, 0.42, 0.38)
MUCOSA_COLOR_B = (0.93, 0.62, 0.58)
VESSEL_DARKEN = 0.55
VESSEL_STEPS = 200
VESSEL_STEP_TEXELS = 2.0
VESSEL_HEADING_SIGMA = 0.3
VESSEL_WIDTH_TEXELS = 2.0


@dataclass(frozen=True)
class TextureSpec:
    mode: str = "mucosa"
    resolution: tuple[int, int] = (512, 512)
    base_color_a: tuple[float, float, float] = MUCOSA_COLOR_A
    base_color_b: tuple[float, float, float] = MUCOSA_COLOR_B
    noise_octaves: int = 5
    noise_scale: float = 8.0
    vessel_density: float = 12.0
    seed: int = 0

    def validate(self) -> "TextureSpec":
        if self.mode not in MODES:
            raise InvalidSpec(f"texture mode must be one of {MODES}, got {self.mode!r}")
        if len(self.resolution) != 2:
            raise InvalidSpec("resolution must be (W, H)")
        for n in self.resolution:
            if int(n) != n or n < 64 or n > 4096 or int(n) & (int(n) - 1):
                raise InvalidSpec(f"texture size {n} must be a power of two in [64, 4096]")
        for c in (self.base_color_a, self.base_color_b):
            if len(c) != 3 or not all(0.0 <= x <= 1.0 for x in c):
                raise InvalidSpec(f"colors must be RGB triples in [0, 1], got {c}")
        if int(self.noise_octaves) != self.noise_octaves or not 1 <= self.noise_octaves <= 8:
            raise InvalidSpec("noise_octaves must be an integer in 1..8")
        if not self.noise_scale > 0:
            raise InvalidSpec("noise_scale must be > 0")
        if not self.vessel_density >= 0:
            raise InvalidSpec("vessel_density must be >= 0")
        if not 0 <= int(self.seed) <= hashing.MASK64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resolution"] = list(self.resolution)
        d["base_color_a"] = list(self.base_color_a)
        d["base_color_b"] = list(self.base_color_b)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TextureSpec":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        for k in ("resolution", "base_color_a", "base_color_b"):
            if k in known:
                known[k] = tuple(known[k])
        if "resolution" in known:
            known["resolution"] = tuple(int(n) for n in known["resolution"])
        for k in ("noise_octaves", "seed"):
            if k in known:
                known[k] = int(known[k])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown texture fields {sorted(unknown)}")
        return cls(**known).validate()


@dataclass(frozen=True, eq=False)
class TextureImage:
    pixels: np.ndarray  # (H, W, 3) linear RGB in [0, 1]

    @property
    def resolution(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return w, h

    def save_png(self, path) -> None:
        write_png(path, self.pixels)


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def value_fbm(seed: int, u: np.ndarray, v: np.ndarray, octaves: int, cells_u: int, cells_v: int, salt: str = "fbm") -> np.ndarray:
    """Fractional Brownian motion of lattice value noise, persistence 0.5, in [0, 1].

    The lattice wraps every ``cells_u * 2**octave`` cells in u, which makes the
    field exactly periodic in u with period 1.
    """
    key = hashing.tag(salt)
    total = np.zeros(np.broadcast(u, v).shape)
    amp, norm = 1.0, 0.0
    for octave in range(octaves):
        nu, nv = cells_u << octave, cells_v << octave
        fu, fv = u * nu, v * nv
        iu, iv = np.floor(fu), np.floor(fv)
        tu, tv = _fade(fu - iu), _fade(fv - iv)
        iu = iu.astype(np.int64)
        iv = iv.astype(np.int64)
        i0, i1 = np.mod(iu, nu), np.mod(iu + 1, nu)

        def lattice(i, j):
            return hashing.uniform(seed, key, octave, i, j)

        a = lattice(i0, iv) + tu * (lattice(i1, iv) - lattice(i0, iv))
        b = lattice(i0, iv + 1) + tu * (lattice(i1, iv + 1) - lattice(i0, iv + 1))
        total = total + amp * (a + tv * (b - a))
        norm += amp
        amp *= 0.5
    return total / norm


@numba.njit(cache=True, nogil=True)
def _stroke_coverage(segments, width, height, half_width):
    cov = np.zeros((height, width))
    reach = half_width + 1.0
    for s in range(segments.shape[0]):
        ax, ay, bx, by = segments[s, 0], segments[s, 1], segments[s, 2], segments[s, 3]
        x_lo = int(np.floor(min(ax, bx) - reach))
        x_hi = int(np.ceil(max(ax, bx) + reach))
        y_lo = max(0, int(np.floor(min(ay, by) - reach)))
        y_hi = min(height - 1, int(np.ceil(max(ay, by) + reach)))
        dx, dy = bx - ax, by - ay
        denom = dx * dx + dy * dy
        for y in range(y_lo, y_hi + 1):
            for xx in range(x_lo, x_hi + 1):
                px, py = float(xx), float(y)
                t = 0.0
                if denom > 0.0:
                    t = ((px - ax) * dx + (py - ay) * dy) / denom
                    t = min(1.0, max(0.0, t))
                ex = px - (ax + t * dx)
                ey = py - (ay + t * dy)
                d = np.sqrt(ex * ex + ey * ey)
                c = min(1.0, max(0.0, half_width + 0.5 - d))
                x = xx % width
                if c > cov[y, x]:
                    cov[y, x] = c
    return cov


def vessel_segments(spec: TextureSpec) -> np.ndarray:
    """Random-walk vessel polylines as (N, 4) texel-space segments (x0, y0, x1, y1).

    Walks start inside the texture; x coordinates are unwrapped and the
    rasterizer folds them back modulo W.
    """
    w, h = spec.resolution
    key = hashing.tag("vessels")
    count = hashing.poisson(spec.vessel_density, spec.seed, key, "count")
    segs = []
    steps = np.arange(VESSEL_STEPS)
    for k in range(count):
        x0 = float(hashing.uniform(spec.seed, key, k, 0)) * w
        y0 = float(hashing.uniform(spec.seed, key, k, 1)) * h - 0.5
        heading0 = float(hashing.uniform(spec.seed, key, k, 2)) * 2.0 * np.pi
        turns = VESSEL_HEADING_SIGMA * hashing.normal(spec.seed, key, k, 3, steps)
        heading = heading0 + np.cumsum(turns)
        xs = x0 + np.concatenate([[0.0], np.cumsum(VESSEL_STEP_TEXELS * np.cos(heading))])
        ys = y0 + np.concatenate([[0.0], np.cumsum(VESSEL_STEP_TEXELS * np.sin(heading))])
        segs.append(np.column_stack([xs[:-1], ys[:-1], xs[1:], ys[1:]]))
    if not segs:
        return np.zeros((0, 4))
    return np.concatenate(segs)


def _cells(scale: float) -> int:
    return max(1, int(round(scale)))


def generate_texture(spec: TextureSpec) -> TextureImage:
    spec.validate()
    w, h = spec.resolution
    u = (np.arange(w, dtype=np.float64) / w)[None, :]
    v = ((np.arange(h, dtype=np.float64) + 0.5) / h)[:, None]
    a = np.asarray(spec.base_color_a, dtype=np.float64)
    b = np.asarray(spec.base_color_b, dtype=np.float64)
    cells_u = _cells(spec.noise_scale)
    cells_v = _cells(spec.noise_scale * h / w)

    if spec.mode in ("mucosa", "noise"):
        t = value_fbm(spec.seed, u, v, spec.noise_octaves, cells_u, cells_v, salt=spec.mode)
        if spec.mode == "noise":
            t = np.clip((t - 0.5) * 2.5 + 0.5, 0.0, 1.0)
    elif spec.mode == "checker":
        n_u = 2 * max(1, int(round(spec.noise_scale / 2)))  # even, so the pattern wraps
        n_v = max(1, int(round(n_u * h / w)))
        t = ((np.floor(u * n_u).astype(np.int64) + np.floor(v * n_v).astype(np.int64)) % 2).astype(np.float64)
    else:  # stripes
        n_u = _cells(spec.noise_scale)
        n_v = int(hashing.hash64(spec.seed, hashing.tag("stripes")) % np.uint64(5))
        t = 0.5 + 0.5 * np.sin(2.0 * np.pi * (n_u * u + n_v * v))
    t = np.broadcast_to(t, (h, w))
    img = a + (b - a) * t[..., None]

    if spec.mode == "mucosa" and spec.vessel_density > 0:
        segs = vessel_segments(spec)
        if len(segs):
            cov = _stroke_coverage(segs, w, h, VESSEL_WIDTH_TEXELS / 2.0)
            img = img * (1.0 - cov[..., None] * (1.0 - VESSEL_DARKEN))
    return TextureImage(np.clip(img, 0.0, 1.0))


def sample_texture(tex: TextureImage, u, v) -> np.ndarray:
    """Bilinear lookup; u wraps with period 1, v clamps to [0, 1]."""
    pix = tex.pixels
    h, w = pix.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    fx = (u - np.floor(u)) * w
    fy = np.clip(np.clip(v, 0.0, 1.0) * h - 0.5, 0.0, h - 1.0)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = (fx - x0)[..., None]
    ty = (fy - y0)[..., None]
    x0 %= w
    x1 = (x0 + 1) % w
    y1 = np.minimum(y0 + 1, h - 1)
    top = pix[y0, x0] + tx * (pix[y0, x1] - pix[y0, x0])
    bottom = pix[y1, x0] + tx * (pix[y1, x1] - pix[y1, x0])
    return top + ty * (bottom - top)
