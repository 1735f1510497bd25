import math

import numpy as np
import pytest

from colosynth.centerline import resample_waypoints
from colosynth.errors import InvalidConfig, TooFewWaypoints
from colosynth.geometry import quat_to_matrix
from colosynth.phantoms import helix_points, quarter_arc
from colosynth.trajectory import TraversalTiming, build_spline, frame_times, generate_poses


def _straight(length=100.0, n=11):
    return np.column_stack([np.zeros(n), np.zeros(n), np.linspace(0, length, n)])


def test_straight_path_pose_count_and_spacing():
    poses = generate_poses(build_spline(_straight()), TraversalTiming(10.0, 10.0))
    assert len(poses) == 101
    pos = np.array([p.position for p in poses])
    assert np.allclose(np.diff(pos[:, 2]), 1.0, atol=1e-9)
    assert np.allclose(pos[:, :2], 0.0, atol=1e-12)
    q = np.array([p.orientation for p in poses])
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)
    assert all(np.allclose(p.forward, [0, 0, 1], atol=1e-9) for p in poses)


def test_collinear_spline_stays_on_line():
    pts = np.array([[0, 0, 0], [1, 2, 3], [3, 6, 9], [4, 8, 12.0]])
    path = build_spline(pts)
    xyz = path.evaluate(np.linspace(0, path.length, 200))
    d = np.array([1, 2, 3.0]) / math.sqrt(14)
    off = xyz - np.outer(xyz @ d, d)
    assert np.abs(off).max() < 1e-9
    assert path.length == pytest.approx(4 * math.sqrt(14), rel=1e-6)


def test_knots_are_interpolated_exactly():
    rng = np.random.default_rng(3)
    pts = np.cumsum(rng.normal(size=(7, 3)) * 5, axis=0)
    path = build_spline(pts)
    knots = path.at_param(np.arange(len(pts), dtype=float))
    assert np.array_equal(knots, pts)
    assert np.array_equal(path.evaluate([0.0])[0], pts[0])
    assert np.array_equal(path.evaluate([path.length])[0], pts[-1])


def test_quarter_arc_length():
    wp = resample_waypoints(quarter_arc(radius=20.0), 3.0)
    path = build_spline(wp)
    assert path.length == pytest.approx(math.pi * 10.0, rel=1e-3)


def test_arclength_parameterization_uniform():
    wp = resample_waypoints(quarter_arc(radius=20.0), 3.0)
    path = build_spline(wp)
    s = np.linspace(0, path.length, 101)
    chords = np.linalg.norm(np.diff(path.evaluate(s), axis=0), axis=1)
    # chords of equal arclength steps agree to the 0.01 mm table tolerance
    assert np.abs(chords - s[1]).max() <= 0.01
    assert np.abs(chords - s[1]).mean() <= 1e-3


def test_helix_up_vector_has_no_flips():
    pts = helix_points(radius=10.0, pitch=20.0, turns=2.0, step=0.5)[::10]
    poses = generate_poses(build_spline(pts), TraversalTiming(10.0, 30.0))
    ups = np.array([p.up for p in poses])
    fw = np.array([p.forward for p in poses])
    assert np.sum(ups[1:] * ups[:-1], axis=1).min() > 0.99
    assert np.abs(np.sum(ups * fw, axis=1)).max() < 1e-9
    # orientation changes stay small between consecutive frames
    for a, b in zip(poses, poses[1:]):
        r = quat_to_matrix(a.orientation).T @ quat_to_matrix(b.orientation)
        angle = math.degrees(math.acos(np.clip((np.trace(r) - 1) / 2, -1, 1)))
        assert angle < 15.0


def test_endpoints_and_last_frame_snap():
    pts = _straight(length=10.05, n=4)
    path = build_spline(pts)
    poses = generate_poses(path, TraversalTiming(1.0, 1.0))
    assert len(poses) == 11
    assert np.array_equal(poses[0].position, pts[0])
    assert np.array_equal(poses[-1].position, pts[-1])


def test_lookahead_clamps_at_end():
    poses = generate_poses(build_spline(_straight(20.0, 3)), TraversalTiming(10.0, 10.0, lookahead_mm=10.0))
    assert np.allclose(poses[-1].forward, [0, 0, 1])


def test_too_few_waypoints():
    with pytest.raises(TooFewWaypoints) as e:
        build_spline(np.zeros((1, 3)))
    assert e.value.stage == "trajectory"
    with pytest.raises(TooFewWaypoints):
        build_spline(np.zeros((3, 3)))


def test_duplicate_waypoints_are_dropped():
    pts = np.array([[0, 0, 0], [0, 0, 0], [0, 0, 5.0], [0, 0, 10.0]])
    assert build_spline(pts).length == pytest.approx(10.0)


def test_invalid_timing():
    with pytest.raises(InvalidConfig):
        TraversalTiming(speed_mm_s=0).validate()
    with pytest.raises(InvalidConfig):
        TraversalTiming(fps=-1).validate()


def test_frame_times():
    assert np.allclose(frame_times(4, 10.0), [0.0, 0.1, 0.2, 0.3], rtol=0, atol=1e-15)
