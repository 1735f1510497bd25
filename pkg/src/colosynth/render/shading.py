"""Headlight shading: Lambert diffuse, anisotropic GGX specular and a clear coat.

All functions are vectorized over leading axes; scalars work too.
"""

from __future__ import annotations

import numpy as np

from ..texture import TextureImage, sample_texture
from .params import LightParams, MaterialParams

COAT_ROUGHNESS = 0.1
COAT_F0 = 0.04
DIELECTRIC_F0 = 0.04
MIN_ALPHA = 1e-3


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _normalize(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def tangent_basis(normal: np.ndarray, tangent_hint: np.ndarray | None = None):
    """Orthonormal (t, b) perpendicular to ``normal``.

    The hint (typically dP/du) is projected onto the tangent plane. Where it is
    missing or parallel to the normal, the least-aligned world axis is used.
    """
    n = np.asarray(normal, dtype=np.float64)
    if tangent_hint is None:
        hint = np.zeros_like(n)
    else:
        hint = np.broadcast_to(np.asarray(tangent_hint, dtype=np.float64), n.shape)
    t = hint - _dot(hint, n)[..., None] * n
    tn = np.linalg.norm(t, axis=-1)
    bad = tn < 1e-9
    if np.any(bad):
        axis = np.argmin(np.abs(n), axis=-1)
        fallback = np.eye(3)[axis]
        fallback = fallback - _dot(fallback, n)[..., None] * n
        t = np.where(bad[..., None], fallback, t)
    t = _normalize(t)
    b = np.cross(n, t)
    return t, b


def ggx_anisotropic_d(h_t, h_b, h_n, alpha_t, alpha_b):
    """Anisotropic GGX normal distribution in tangent-space half-vector components."""
    s = (h_t / alpha_t) ** 2 + (h_b / alpha_b) ** 2 + h_n**2
    return 1.0 / (np.pi * alpha_t * alpha_b * s * s)


def smith_lambda(w_t, w_b, w_n, alpha_t, alpha_b):
    w_n = np.maximum(w_n, 1e-12)
    a2 = ((alpha_t * w_t) ** 2 + (alpha_b * w_b) ** 2) / (w_n * w_n)
    return 0.5 * (np.sqrt(1.0 + a2) - 1.0)


def specular_lobe(n, t, b, v, l, f0, alpha_t, alpha_b):
    """GGX lobe times cos(theta_l): D G F / (4 N.V), height-correlated Smith G, Schlick F."""
    h = _normalize(v + l)
    nl = _dot(n, l)
    nv = _dot(n, v)
    d = ggx_anisotropic_d(_dot(h, t), _dot(h, b), _dot(h, n), alpha_t, alpha_b)
    g = 1.0 / (
        1.0
        + smith_lambda(_dot(v, t), _dot(v, b), nv, alpha_t, alpha_b)
        + smith_lambda(_dot(l, t), _dot(l, b), nl, alpha_t, alpha_b)
    )
    vh = np.clip(_dot(v, h), 0.0, 1.0)
    f = f0 + (1.0 - f0) * ((1.0 - vh) ** 5)[..., None]
    lit = (nl > 0) & (nv > 0)
    scale = np.where(lit, d * g / (4.0 * np.maximum(nv, 1e-12)), 0.0)
    return f * scale[..., None]


def lobe_alphas(mat: MaterialParams) -> tuple[float, float]:
    alpha = max((1.0 - mat.smoothness) ** 2, MIN_ALPHA)
    return alpha * (1.0 + mat.anisotropy), alpha / (1.0 + mat.anisotropy)


def brdf_terms(albedo, n, t, b, v, l, mat: MaterialParams):
    """Return (diffuse, specular, coat), each already multiplied by max(0, N.L)."""
    albedo = np.asarray(albedo, dtype=np.float64)
    nl = np.maximum(_dot(n, l), 0.0)
    diffuse = (1.0 - mat.metallic) * albedo * (nl / np.pi)[..., None]
    f0 = DIELECTRIC_F0 + (albedo - DIELECTRIC_F0) * mat.metallic
    at, ab = lobe_alphas(mat)
    specular = specular_lobe(n, t, b, v, l, f0, at, ab)
    coat = mat.coat_mask * specular_lobe(n, t, b, v, l, np.full_like(albedo, COAT_F0), COAT_ROUGHNESS, COAT_ROUGHNESS)
    return diffuse, specular, coat


def shade(
    hit_point,
    shading_normal,
    view_dir,
    uv,
    texture: TextureImage,
    mat: MaterialParams,
    light: LightParams,
    camera_pos,
    tangent=None,
) -> np.ndarray:
    """Linear RGB radiance toward the camera from a headlight at ``camera_pos``.

    ``view_dir`` points from the surface toward the eye. ``tangent`` is the
    surface direction of increasing u, used to orient the anisotropic lobe.
    """
    p = np.asarray(hit_point, dtype=np.float64)
    n = np.asarray(shading_normal, dtype=np.float64)
    v = np.asarray(view_dir, dtype=np.float64)
    uv = np.asarray(uv, dtype=np.float64)
    to_light = np.asarray(camera_pos, dtype=np.float64) - p
    d2 = _dot(to_light, to_light)
    l = _normalize(to_light)
    albedo = sample_texture(texture, uv[..., 0], uv[..., 1])
    t, b = tangent_basis(n, tangent)
    diffuse, specular, coat = brdf_terms(albedo, n, t, b, v, l, mat)
    radiance = np.asarray(light.color) * light.intensity
    out = (diffuse + specular + coat) * (radiance / np.maximum(d2, 1e-12)[..., None])
    return np.where((_dot(n, l) > 0)[..., None], out, 0.0)
