import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colosynth.errors import MalformedHeader, MissingFile, SizeMismatch
from colosynth.geometry import Pose, matrix_to_quat, quat_to_matrix
from colosynth.volume_io import (
    VoxelMask,
    linear_to_srgb,
    load_mask,
    load_obj,
    load_polyline,
    load_pose_log,
    read_pfm,
    read_png,
    save_mask,
    save_obj,
    save_polyline,
    save_pose_log,
    srgb_to_linear,
    write_pfm,
    write_png,
)


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    mask = VoxelMask(rng.random((5, 7, 3)) < 0.5, (0.7, 0.8, 1.25))
    path = save_mask(mask, tmp_path / "m.mhdr")
    assert load_mask(path) == mask


def test_payload_is_x_fastest(tmp_path):
    data = np.zeros((3, 2, 2), dtype=bool)
    data[1, 0, 0] = True  # second byte on disk
    path = save_mask(VoxelMask(data), tmp_path / "m.mhdr")
    raw = np.fromfile(path.with_suffix(".raw"), dtype=np.uint8)
    assert raw.tolist() == [0, 1] + [0] * 10


def test_size_mismatch(tmp_path):
    (tmp_path / "m.raw").write_bytes(bytes(7))
    (tmp_path / "m.mhdr").write_text("dims = 2 2 2\nspacing = 1 1 1\ndata = m.raw\n")
    with pytest.raises(SizeMismatch):
        load_mask(tmp_path / "m.mhdr")


@pytest.mark.parametrize(
    "header",
    ["dims = 2 2\nspacing = 1 1 1\n", "dims = 2 2 2\nspacing = 1 0 1\n", "dims = 2 2 2\n", "garbage\n"],
)
def test_malformed_header(tmp_path, header):
    (tmp_path / "m.raw").write_bytes(bytes(8))
    (tmp_path / "m.mhdr").write_text(header + "data = m.raw\n")
    with pytest.raises(MalformedHeader):
        load_mask(tmp_path / "m.mhdr")


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_mask(tmp_path / "nope.mhdr")


@pytest.mark.parametrize("encoding", ["raw", "gzip"])
def test_nrrd(tmp_path, encoding):
    data = np.zeros((4, 3, 2), dtype=np.uint8)
    data[1, 2, 1] = 1
    payload = data.ravel(order="F").tobytes()
    if encoding == "gzip":
        payload = gzip.compress(payload)
    header = (
        "NRRD0004\ntype: uint8\ndimension: 3\nsizes: 4 3 2\n"
        "space directions: (0.5,0,0) (0,0.5,0) (0,0,2)\n"
        f"encoding: {encoding}\n\n"
    )
    (tmp_path / "m.nrrd").write_bytes(header.encode() + payload)
    mask = load_mask(tmp_path / "m.nrrd")
    assert mask.spacing == (0.5, 0.5, 2.0)
    assert mask.foreground_count == 1 and mask.data[1, 2, 1]


def test_pose_log_round_trip(tmp_path):
    poses = [Pose((1.0, 2.0, 3.5), (1.0, 0.0, 0.0, 0.0)), Pose.look((0, 0, 1), (1, 1, 0), (0, 0, 1))]
    save_pose_log(poses, tmp_path / "p.csv", fps=30)
    back, times = load_pose_log(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "frame,t_sec,px,py,pz,qw,qx,qy,qz"
    assert np.allclose(times, [0, 1 / 30])
    for a, b in zip(poses, back):
        assert np.allclose(a.position, b.position, atol=1e-8)
        assert np.allclose(a.orientation, b.orientation, atol=1e-8)


def test_polyline_round_trip(tmp_path):
    pts = np.random.default_rng(0).normal(size=(6, 3))
    s = np.linspace(0, 5, 6)
    save_polyline(pts, s, tmp_path / "c.csv")
    p2, s2 = load_polyline(tmp_path / "c.csv")
    assert np.allclose(p2, pts, rtol=1e-8) and np.allclose(s2, s)


def test_obj_round_trip(tmp_path):
    from colosynth.phantoms import closed_cylinder_mesh

    mesh = closed_cylinder_mesh(segments=8, rings=2, cap_rings=1)
    save_obj(mesh, tmp_path / "m.obj")
    v, n, uv, f = load_obj(tmp_path / "m.obj")
    assert np.array_equal(f, mesh.triangles)
    assert np.allclose(v, mesh.vertices, atol=1e-7) and np.allclose(uv, mesh.uvs, atol=1e-8)


def test_pfm_round_trip(tmp_path):
    img = np.arange(12, dtype=np.float32).reshape(3, 4) * 1.5
    write_pfm(tmp_path / "d.pfm", img)
    assert np.array_equal(read_pfm(tmp_path / "d.pfm"), img)
    raw = (tmp_path / "d.pfm").read_bytes()
    assert raw.startswith(b"Pf\n4 3\n-1.0\n")
    # first stored row is the bottom image row
    assert np.frombuffer(raw[len(b"Pf\n4 3\n-1.0\n") :][:16], dtype="<f4").tolist() == img[-1].tolist()


def test_srgb_transfer_points():
    assert linear_to_srgb(np.array(0.0)) == 0.0
    assert np.isclose(linear_to_srgb(np.array(1.0)), 1.0)
    assert np.isclose(linear_to_srgb(np.array(0.0031308)), 12.92 * 0.0031308)
    assert np.isclose(linear_to_srgb(np.array(0.18)), 1.055 * 0.18 ** (1 / 2.4) - 0.055)
    x = np.linspace(0, 1, 101)
    assert np.allclose(srgb_to_linear(linear_to_srgb(x)), x, atol=1e-12)


def test_png_is_8bit_srgb(tmp_path):
    img = np.zeros((2, 2, 3))
    img[0, 0] = 1.0
    img[1, 1] = 0.18
    write_png(tmp_path / "x.png", img)
    px = read_png(tmp_path / "x.png")
    assert px.dtype == np.uint8
    assert px[0, 0].tolist() == [255, 255, 255]
    assert px[1, 1, 0] == round(255 * (1.055 * 0.18 ** (1 / 2.4) - 0.055))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda q: np.linalg.norm(q) > 1e-3))
def test_quaternion_matrix_round_trip(q):
    q = np.asarray(q) / np.linalg.norm(q)
    m = quat_to_matrix(q)
    assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)
    assert np.allclose(quat_to_matrix(matrix_to_quat(m)), m, atol=1e-9)
