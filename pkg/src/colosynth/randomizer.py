"""Domain-randomized render configurations.

Each field of a :class:`RenderConfig` is drawn from its own :class:`ParamRange`
by hashing (master seed, traversal, frame, field name). Adding or removing a
field never changes the values drawn for the others.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import hashing
from .errors import InvalidSpec
from .render.params import CameraIntrinsics, LightParams, MaterialParams, PostFxParams
from .texture import TextureSpec

MODES = ("per_frame", "per_traversal")
KINDS = ("fixed", "uniform", "randint", "choice", "color")


@dataclass(frozen=True)
class RenderConfig:
    texture: TextureSpec = field(default_factory=TextureSpec)
    material: MaterialParams = field(default_factory=MaterialParams)
    postfx: PostFxParams = field(default_factory=PostFxParams)
    light: LightParams = field(default_factory=LightParams)
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)

    def validate(self) -> "RenderConfig":
        for f in fields(self):
            getattr(self, f.name).validate()
        return self

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name).to_dict() for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RenderConfig":
        blocks = {f.name: f.default_factory for f in fields(cls)}
        unknown = set(d) - set(blocks)
        if unknown:
            raise InvalidSpec(f"unknown config sections {sorted(unknown)}")
        return cls(**{k: blocks[k]().from_dict(v) for k, v in d.items()}).validate()


def default_config() -> RenderConfig:
    """Reference settings: the published material, lens and camera values with mucosa texture."""
    return RenderConfig().validate()


@dataclass(frozen=True)
class ParamRange:
    """Sampling rule for one scalar, color or categorical field.

    kinds: ``fixed`` (value), ``uniform`` (lo, hi), ``randint`` (lo, hi
    inclusive), ``choice`` (options, weights), ``color`` (per-channel lo, hi).
    """

    kind: str
    value: object = None
    lo: object = None
    hi: object = None
    options: tuple = ()
    weights: tuple = ()

    def validate(self, name: str = "") -> "ParamRange":
        where = f" for {name}" if name else ""
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown range kind {self.kind!r}{where}")
        if self.kind in ("uniform", "randint", "color"):
            lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
            if lo.shape != hi.shape or (self.kind == "color" and lo.shape != (3,)):
                raise InvalidSpec(f"lo/hi shape mismatch{where}")
            if np.any(lo > hi) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
                raise InvalidSpec(f"need finite lo <= hi{where}, got {self.lo} > {self.hi}")
        if self.kind == "choice":
            if not self.options:
                raise InvalidSpec(f"empty categorical list{where}")
            w = np.asarray(self.weights if self.weights else [1.0] * len(self.options), dtype=float)
            if len(w) != len(self.options) or np.any(w < 0) or not w.sum() > 0:
                raise InvalidSpec(f"weights must be non-negative with positive sum{where}")
        return self

    def sample(self, *keys):
        if self.kind == "fixed":
            return self.value
        if self.kind == "uniform":
            u = float(hashing.uniform(*keys))
            return float(self.lo + (self.hi - self.lo) * u)
        if self.kind == "randint":
            span = int(self.hi) - int(self.lo) + 1
            return int(self.lo) + int(hashing.hash64(*keys) % np.uint64(span))
        if self.kind == "color":
            lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
            u = hashing.uniform(*keys, np.arange(3))
            return tuple(float(x) for x in lo + (hi - lo) * u)
        w = np.asarray(self.weights if self.weights else [1.0] * len(self.options), dtype=float)
        cdf = np.cumsum(w) / w.sum()
        i = int(np.searchsorted(cdf, float(hashing.uniform(*keys)), side="right"))
        return self.options[min(i, len(self.options) - 1)]

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"fixed": _plain(self.value)}
        if self.kind == "choice":
            d = {"choice": list(self.options)}
            if self.weights:
                d["weights"] = list(self.weights)
            return d
        return {self.kind: [_plain(self.lo), _plain(self.hi)]}

    @classmethod
    def from_json(cls, d) -> "ParamRange":
        """Parse ``{"fixed": v}``, ``{"uniform": [lo, hi]}``, ``{"randint": [lo, hi]}``,
        ``{"color": [[r,g,b], [r,g,b]]}`` or ``{"choice": [...], "weights": [...]}``.
        A bare value is shorthand for fixed."""
        if not isinstance(d, dict):
            return cls("fixed", value=_tuple(d))
        if "choice" in d:
            return cls("choice", options=tuple(_tuple(o) for o in d["choice"]), weights=tuple(d.get("weights", ())))
        if len(d) != 1:
            raise InvalidSpec(f"cannot parse range {d}")
        kind, arg = next(iter(d.items()))
        if kind == "fixed":
            return cls("fixed", value=_tuple(arg))
        if kind in ("uniform", "randint", "color"):
            if not isinstance(arg, (list, tuple)) or len(arg) != 2:
                raise InvalidSpec(f"{kind} range needs [lo, hi], got {arg}")
            return cls(kind, lo=_tuple(arg[0]), hi=_tuple(arg[1]))
        raise InvalidSpec(f"unknown range kind {kind!r}")


def _tuple(x):
    return tuple(_tuple(v) for v in x) if isinstance(x, list) else x


def _plain(x):
    return [_plain(v) for v in x] if isinstance(x, tuple) else x


def fixed(value) -> ParamRange:
    return ParamRange("fixed", value=value)


def uniform(lo: float, hi: float) -> ParamRange:
    return ParamRange("uniform", lo=lo, hi=hi).validate()


def _config_fields() -> list[str]:
    cfg = default_config()
    return [f"{b.name}.{f.name}" for b in fields(cfg) for f in fields(getattr(cfg, b.name))]


def fixed_ranges(cfg: RenderConfig | None = None) -> dict[str, ParamRange]:
    cfg = cfg or default_config()
    out = {}
    for name in _config_fields():
        block, attr = name.split(".")
        out[name] = fixed(getattr(getattr(cfg, block), attr))
    return out


@dataclass(frozen=True)
class RandomizationSpec:
    ranges: dict  # "block.field" -> ParamRange
    mode: str = "per_frame"
    master_seed: int = 0

    def validate(self) -> "RandomizationSpec":
        if self.mode not in MODES:
            raise InvalidSpec(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= int(self.master_seed) <= hashing.MASK64:
            raise InvalidSpec("master_seed must be a 64-bit unsigned integer")
        expected = set(_config_fields())
        missing = expected - set(self.ranges)
        extra = set(self.ranges) - expected
        if missing:
            raise InvalidSpec(f"randomization spec leaves fields unsampled: {sorted(missing)}")
        if extra:
            raise InvalidSpec(f"randomization spec names unknown fields: {sorted(extra)}")
        for name, r in self.ranges.items():
            r.validate(name)
        return self

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "master_seed": int(self.master_seed),
            "ranges": {k: self.ranges[k].to_dict() for k in sorted(self.ranges)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomizationSpec":
        """Fields not listed under ``ranges`` stay fixed at their defaults."""
        unknown = set(d) - {"mode", "master_seed", "ranges"}
        if unknown:
            raise InvalidSpec(f"unknown randomization keys {sorted(unknown)}")
        ranges = fixed_ranges()
        for k, v in d.get("ranges", {}).items():
            ranges[k] = ParamRange.from_json(v)
        return cls(ranges, d.get("mode", "per_frame"), int(d.get("master_seed", 0))).validate()

    @classmethod
    def load(cls, path) -> "RandomizationSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def example_spec() -> RandomizationSpec:
    """The shipped example ranges (see data/randomization_example.json)."""
    text = resources.files("colosynth").joinpath("data/randomization_example.json").read_text()
    return RandomizationSpec.from_dict(json.loads(text))


def sample_config(spec: RandomizationSpec, traversal_id: int, frame_index: int = 0) -> RenderConfig:
    spec.validate()
    frame_key = int(frame_index) if spec.mode == "per_frame" else -1
    base = default_config()
    values: dict[str, dict] = {}
    for name in sorted(spec.ranges):
        block, attr = name.split(".")
        v = spec.ranges[name].sample(spec.master_seed, traversal_id, frame_key, name)
        values.setdefault(block, {})[attr] = v
    blocks = {}
    for b in fields(base):
        current = getattr(base, b.name)
        kw = values.get(b.name, {})
        for f in fields(current):
            if f.name in kw and isinstance(getattr(current, f.name), int) and not isinstance(getattr(current, f.name), bool):
                kw[f.name] = int(round(kw[f.name]))
        blocks[b.name] = replace(current, **kw)
    return RenderConfig(**blocks).validate()
