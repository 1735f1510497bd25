"""Reading and writing of masks, poses, centerlines, meshes and images.

File formats
------------
Native mask
    ``<name>.mhdr`` text header with ``dims = nx ny nz``, ``spacing = sx sy sz``
    and ``data = <name>.raw``; the payload is raw uint8, x fastest, then y,
    then z. An optional ``dtype = f32`` line marks a float32 little-endian
    payload (debug dumps of distance fields).
Pose log
    CSV ``frame,t_sec,px,py,pz,qw,qx,qy,qz`` with ``%.9g`` values.
Centerline / waypoints
    CSV ``index,arclen_mm,x,y,z``.
Mesh
    Wavefront OBJ with ``v``, ``vt``, ``vn`` and ``f v/vt/vn`` records.
Depth
    PFM, single channel, little-endian float32, millimeters.
"""

from __future__ import annotations

import csv
import gzip
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IoFailure, MalformedHeader, MissingFile, SizeMismatch
from .geometry import Pose

POSE_HEADER = ["frame", "t_sec", "px", "py", "pz", "qw", "qx", "qy", "qz"]
POLYLINE_HEADER = ["index", "arclen_mm", "x", "y", "z"]


@dataclass(eq=False)
class VoxelMask:
    """Binary occupancy grid.

    ``data`` is a boolean array indexed ``[x, y, z]``; its Fortran-order
    ravel is the x-fastest payload order used on disk.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        self.data = np.asarray(self.data) > 0
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise MalformedHeader(f"mask must be a non-empty 3-D array, got shape {self.data.shape}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in self.spacing):
            raise MalformedHeader(f"spacing must be three positive numbers, got {self.spacing}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.data))

    def world(self, index) -> np.ndarray:
        """World position (mm) of a voxel index or an array of indices."""
        return np.asarray(index, dtype=np.float64) * np.asarray(self.spacing)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelMask):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)


def _parse_header(path: Path) -> dict[str, str]:
    fields = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedHeader(f"{path}: cannot parse header line {raw!r}")
        key, value = line.split("=", 1)
        fields[key.strip().lower()] = value.strip()
    return fields


def _triple(fields: dict[str, str], key: str, cast, path: Path):
    if key not in fields:
        raise MalformedHeader(f"{path}: missing '{key}'")
    try:
        values = tuple(cast(v) for v in fields[key].split())
    except ValueError:
        raise MalformedHeader(f"{path}: bad '{key}' value {fields[key]!r}") from None
    if len(values) != 3 or not all(v > 0 for v in values):
        raise MalformedHeader(f"{path}: '{key}' must be three positive numbers")
    return values


def load_mask(path) -> VoxelMask:
    """Load a native ``.mhdr`` mask or a uint8 NRRD file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    if path.suffix.lower() in (".nrrd", ".nhdr"):
        return _load_nrrd(path)
    fields = _parse_header(path)
    dims = _triple(fields, "dims", int, path)
    spacing = _triple(fields, "spacing", float, path)
    payload_path = path.parent / fields.get("data", path.with_suffix(".raw").name)
    if not payload_path.is_file():
        raise MissingFile(str(payload_path))
    payload = np.fromfile(payload_path, dtype=np.uint8)
    return _mask_from_payload(payload, dims, spacing, path)


def _mask_from_payload(payload: np.ndarray, dims, spacing, path) -> VoxelMask:
    expected = dims[0] * dims[1] * dims[2]
    if payload.size != expected:
        raise SizeMismatch(f"{path}: payload has {payload.size} bytes, header implies {expected}")
    data = payload.reshape(dims, order="F") > 0
    return VoxelMask(data, spacing)


def save_mask(mask: VoxelMask, path) -> Path:
    """Write ``mask`` as ``<name>.mhdr`` + ``<name>.raw``; returns the header path."""
    path = Path(path)
    if path.suffix != ".mhdr":
        path = path.with_suffix(".mhdr")
    raw = path.with_suffix(".raw")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        mask.data.astype(np.uint8).ravel(order="F").tofile(raw)
        path.write_text(
            f"dims = {' '.join(str(n) for n in mask.dims)}\n"
            f"spacing = {' '.join(repr(s) for s in mask.spacing)}\n"
            f"data = {raw.name}\n"
        )
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def save_volume_f32(values: np.ndarray, spacing, path) -> Path:
    """Debug dump of a float volume in the ``.mhdr`` style with ``dtype = f32``."""
    path = Path(path).with_suffix(".mhdr")
    raw = path.with_suffix(".raw")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.asarray(values, dtype="<f4").ravel(order="F").tofile(raw)
        path.write_text(
            f"dims = {' '.join(str(n) for n in values.shape)}\n"
            f"spacing = {' '.join(repr(float(s)) for s in spacing)}\n"
            f"dtype = f32\n"
            f"data = {raw.name}\n"
        )
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def _load_nrrd(path: Path) -> VoxelMask:
    blob = path.read_bytes()
    sep = blob.find(b"\n\n")
    if not blob.startswith(b"NRRD") or sep < 0:
        if path.suffix.lower() != ".nhdr":
            raise MalformedHeader(f"{path}: not an attached NRRD file")
        sep = len(blob)
    header = blob[:sep].decode("ascii", errors="replace").splitlines()
    fields: dict[str, str] = {}
    for line in header[1:]:
        if line.startswith("#") or ":" not in line:
            continue
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.lstrip("=").strip()
    if fields.get("type", "").lower() not in ("uchar", "uint8", "unsigned char", "uint8_t"):
        raise MalformedHeader(f"{path}: only uint8 NRRD payloads are supported")
    if fields.get("dimension") != "3" or "sizes" not in fields:
        raise MalformedHeader(f"{path}: expected a 3-D NRRD")
    dims = _triple({"sizes": fields["sizes"]}, "sizes", int, path)
    if "spacings" in fields:
        spacing = _triple({"spacings": fields["spacings"]}, "spacings", float, path)
    elif "space directions" in fields:
        vectors = re.findall(r"\(([^)]*)\)", fields["space directions"])
        if len(vectors) != 3:
            raise MalformedHeader(f"{path}: bad space directions")
        spacing = tuple(float(np.linalg.norm([float(c) for c in v.split(",")])) for v in vectors)
        if not all(s > 0 for s in spacing):
            raise MalformedHeader(f"{path}: degenerate space directions")
    else:
        spacing = (1.0, 1.0, 1.0)
    if "data file" in fields or "datafile" in fields:
        data_name = fields.get("data file", fields.get("datafile"))
        body = (path.parent / data_name).read_bytes()
    else:
        body = blob[sep + 2 :]
    encoding = fields.get("encoding", "raw").lower()
    if encoding in ("gzip", "gz"):
        body = gzip.decompress(body)
    elif encoding != "raw":
        raise MalformedHeader(f"{path}: unsupported NRRD encoding {encoding!r}")
    return _mask_from_payload(np.frombuffer(body, dtype=np.uint8), dims, spacing, path)


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else str(v) for v in row) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _g(x: float) -> str:
    return "%.9g" % x


def save_pose_log(poses: Sequence[Pose], path, fps: float | None = None, times: Sequence[float] | None = None) -> None:
    """Write the pose CSV. Times come from ``times`` or ``frame / fps`` (0 if neither)."""
    if len(poses) == 0:
        raise IoFailure("refusing to write an empty pose log")
    rows = []
    for k, pose in enumerate(poses):
        if times is not None:
            t = times[k]
        else:
            t = k / fps if fps else 0.0
        rows.append([str(k), _g(t), *map(_g, pose.position), *map(_g, pose.orientation)])
    _write_rows(path, POSE_HEADER, rows)


def load_pose_log(path) -> tuple[list[Pose], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    poses, times = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != POSE_HEADER:
            raise MalformedHeader(f"{path}: unexpected pose log header {reader.fieldnames}")
        for row in reader:
            times.append(float(row["t_sec"]))
            poses.append(
                Pose(
                    (float(row["px"]), float(row["py"]), float(row["pz"])),
                    (float(row["qw"]), float(row["qx"]), float(row["qy"]), float(row["qz"])),
                )
            )
    return poses, np.asarray(times)


def save_polyline(points: np.ndarray, arclength: np.ndarray, path) -> None:
    rows = [[str(i), _g(s), *map(_g, p)] for i, (s, p) in enumerate(zip(arclength, points))]
    _write_rows(path, POLYLINE_HEADER, rows)


def load_polyline(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(points, arclength)`` from a centerline/waypoint CSV."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != POLYLINE_HEADER:
            raise MalformedHeader(f"{path}: unexpected polyline header {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    table = np.asarray(rows, dtype=np.float64).reshape(-1, 5)
    return table[:, 2:5].copy(), table[:, 1].copy()


def save_obj(mesh, path) -> None:
    """Write a mesh with one uv and one normal per vertex."""
    lines = []
    for p in mesh.vertices:
        lines.append("v %s %s %s" % tuple(map(_g, p)))
    uvs = mesh.uvs if mesh.uvs is not None else np.zeros((len(mesh.vertices), 2))
    for t in uvs:
        lines.append("vt %s %s" % tuple(map(_g, t)))
    for n in mesh.normals:
        lines.append("vn %s %s %s" % tuple(map(_g, n)))
    for tri in mesh.triangles + 1:
        lines.append("f " + " ".join(f"{i}/{i}/{i}" for i in tri))
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_obj(path):
    """Read an OBJ written by :func:`save_obj` back into arrays."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    v, vt, vn, f = [], [], [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            v.append([float(x) for x in parts[1:4]])
        elif parts[0] == "vt":
            vt.append([float(x) for x in parts[1:3]])
        elif parts[0] == "vn":
            vn.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            f.append([int(c.split("/")[0]) - 1 for c in parts[1:4]])
    return (
        np.asarray(v, dtype=np.float64).reshape(-1, 3),
        np.asarray(vn, dtype=np.float64).reshape(-1, 3),
        np.asarray(vt, dtype=np.float64).reshape(-1, 2),
        np.asarray(f, dtype=np.int64).reshape(-1, 3),
    )


def write_pfm(path, image: np.ndarray) -> None:
    """Single-channel little-endian PFM; rows stored bottom to top."""
    image = np.asarray(image, dtype="<f4")
    h, w = image.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
            fh.write(np.ascontiguousarray(image[::-1]).tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"Pf", b"PF"):
            raise MalformedHeader(f"{path}: not a PFM file")
        w, h = (int(x) for x in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        channels = 3 if kind == b"PF" else 1
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h * channels)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float32)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)


def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))


def write_png(path, rgb_linear: np.ndarray) -> None:
    """Encode a linear RGB float image as 8-bit sRGB PNG."""
    from PIL import Image

    encoded = np.round(linear_to_srgb(rgb_linear) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(encoded, mode="RGB").save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_png(path) -> np.ndarray:
    """Read an 8-bit PNG as a uint8 array of shape (H, W, 3)."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
