"""Camera, material, post-processing and light parameter blocks."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import InvalidSpec


def _in_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidSpec(f"{name} must lie in [0, 1], got {value}")


class _Block:
    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidSpec(f"unknown {cls.__name__} fields {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw).validate()


@dataclass(frozen=True)
class CameraIntrinsics(_Block):
    fov_deg: float = 91.375
    focal_length_mm: float = 159.45  # metadata only
    resolution: tuple[int, int] = (256, 256)
    iso: float = 200.0
    aperture_fnumber: float = 16.0

    def validate(self):
        if not 1.0 < self.fov_deg < 179.0:
            raise InvalidSpec(f"fov_deg must lie in (1, 179), got {self.fov_deg}")
        if len(self.resolution) != 2 or min(self.resolution) < 1 or any(int(n) != n for n in self.resolution):
            raise InvalidSpec(f"resolution must be two positive integers, got {self.resolution}")
        for name in ("focal_length_mm", "iso", "aperture_fnumber"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(f"{name} must be > 0")
        return self

    @property
    def width(self) -> int:
        return int(self.resolution[0])

    @property
    def height(self) -> int:
        return int(self.resolution[1])


@dataclass(frozen=True)
class MaterialParams(_Block):
    metallic: float = 0.3
    smoothness: float = 0.7
    coat_mask: float = 0.435
    anisotropy: float = 1.0

    def validate(self):
        for f in fields(self):
            _in_unit(f.name, getattr(self, f.name))
        return self


@dataclass(frozen=True)
class PostFxParams(_Block):
    chromatic_aberration: float = 0.5
    lens_intensity: float = 0.1
    noise_enabled: bool = True

    def validate(self):
        _in_unit("chromatic_aberration", self.chromatic_aberration)
        _in_unit("lens_intensity", self.lens_intensity)
        return self


@dataclass(frozen=True)
class LightParams(_Block):
    intensity: float = 1000.0
    color: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def validate(self):
        if not self.intensity >= 0:
            raise InvalidSpec("light intensity must be >= 0")
        if len(self.color) != 3 or not all(np.isfinite(c) and c >= 0 for c in self.color):
            raise InvalidSpec(f"light color must be a non-negative RGB triple, got {self.color}")
        return self
