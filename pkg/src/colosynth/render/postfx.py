"""Lens and sensor post-processing: chromatic aberration, vignette, noise, clamp."""

from __future__ import annotations

import numpy as np

from .. import hashing
from .params import CameraIntrinsics, PostFxParams

NOISE_SIGMA_BASE = 0.002
CA_SCALE = 0.01


def radius_grid(height: int, width: int):
    """Pixel-center offsets from the principal point and radius normalized to 1 at corner pixels."""
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    dy, dx = y - cy, x - cx
    half_diag = np.hypot(cx, cy) or 1.0
    r = np.hypot(dx, dy) / half_diag
    return dy, dx, r, (cy, cx)


def bilinear(channel: np.ndarray, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sample a 2-D array at fractional pixel coordinates, clamping at the border."""
    h, w = channel.shape
    y = np.clip(y, 0.0, h - 1.0)
    x = np.clip(x, 0.0, w - 1.0)
    y0 = np.minimum(np.floor(y).astype(np.int64), h - 2) if h > 1 else np.zeros_like(y, dtype=np.int64)
    x0 = np.minimum(np.floor(x).astype(np.int64), w - 2) if w > 1 else np.zeros_like(x, dtype=np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ty, tx = y - y0, x - x0
    top = channel[y0, x0] + tx * (channel[y0, x1] - channel[y0, x0])
    bottom = channel[y1, x0] + tx * (channel[y1, x1] - channel[y1, x0])
    return top + ty * (bottom - top)


def chromatic_aberration(image: np.ndarray, strength: float) -> np.ndarray:
    """Radial per-channel magnification.

    Red is magnified by (1 + 0.01 ca r^2) and blue by (1 - 0.01 ca r^2), so a
    red edge moves outward and a blue edge inward. Green is untouched.
    """
    if strength == 0:
        return image.copy()
    h, w = image.shape[:2]
    dy, dx, r, (cy, cx) = radius_grid(h, w)
    out = image.copy()
    k = CA_SCALE * strength * r * r
    for c, scale in ((0, 1.0 + k), (2, 1.0 - k)):
        out[..., c] = bilinear(image[..., c], cy + dy / scale, cx + dx / scale)
    return out


def vignette(image: np.ndarray, lens_intensity: float) -> np.ndarray:
    h, w = image.shape[:2]
    r = radius_grid(h, w)[2]
    return image * (1.0 - lens_intensity * r * r)[..., None]


def sensor_noise(shape, iso: float, seed: int) -> np.ndarray:
    """Additive Gaussian noise keyed by (seed, pixel, channel)."""
    h, w, c = shape
    idx = np.arange(h * w * c, dtype=np.int64).reshape(h, w, c)
    sigma = NOISE_SIGMA_BASE * (iso / 100.0)
    return sigma * hashing.normal(seed, hashing.tag("sensor-noise"), idx)


def apply_postfx(image: np.ndarray, fx: PostFxParams, cam: CameraIntrinsics, seed: int, clamp: bool = True) -> np.ndarray:
    out = chromatic_aberration(np.asarray(image, dtype=np.float64), fx.chromatic_aberration)
    if fx.lens_intensity:
        out = vignette(out, fx.lens_intensity)
    if fx.noise_enabled:
        out = out + sensor_noise(out.shape, cam.iso, seed)
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out
