import itertools

import numpy as np
import pytest
from oracles import path_cost_oracle

from colosynth.centerline import (
    Centerline,
    auto_endpoints,
    extract_centerline,
    geodesic_distances,
    resample_waypoints,
)
from colosynth.distance_field import compute_edt
from colosynth.errors import DegenerateCenterline, Disconnected, EmptyMask, EndpointInBackground
from colosynth.phantoms import bend_mask, bend_tips, cylinder_axis, cylinder_mask, quarter_arc, u_mask
from colosynth.volume_io import VoxelMask


@pytest.fixture(scope="module")
def cyl_df():
    return compute_edt(cylinder_mask())


@pytest.fixture(scope="module")
def bend_df():
    return compute_edt(bend_mask())


def _min_dfb(df, cl):
    return float(df.dfb[tuple(cl.voxels.T)].min())


def test_cylinder_path_on_axis(cyl_df):
    a, b = cylinder_axis()
    cl = extract_centerline(cyl_df, a, b, 2.0)
    lateral = np.hypot(cl.points[:, 0] - a[0], cl.points[:, 1] - a[1])
    assert lateral.max() <= 1.0
    assert tuple(cl.voxels[0]) == a and tuple(cl.voxels[-1]) == b


def test_path_invariants(bend_df):
    a, b = bend_tips()
    cl = extract_centerline(bend_df, a, b, 2.0)
    assert np.all(bend_df.dfb[tuple(cl.voxels.T)] > 0)
    steps = np.abs(np.diff(cl.voxels, axis=0))
    assert np.all(steps.max(axis=1) == 1)
    assert np.all(np.diff(cl.arclength) > 0)


@pytest.mark.parametrize("lam", [0.0, 1.0, 2.0])
def test_cost_matches_graph_oracle(lam):
    mask = bend_mask(radius=2, leg=8)
    df = compute_edt(mask)
    a, b = bend_tips(radius=2, leg=8)
    cl = extract_centerline(df, a, b, lam)
    assert cl.cost == pytest.approx(path_cost_oracle(df.dfb, df.spacing, lam, a, b), rel=1e-12)


def test_anisotropic_cost_matches_graph_oracle():
    rng = np.random.default_rng(5)
    m = rng.random((6, 5, 7)) < 0.75
    df = compute_edt(VoxelMask(m, (0.6, 1.0, 1.7)))
    fg = np.argwhere(m)
    dist0, _ = geodesic_distances(df, tuple(fg[0]), 0.0)
    reachable = [tuple(v) for v in fg if np.isfinite(dist0[np.ravel_multi_index(tuple(v), m.shape)])]
    a, b = reachable[0], reachable[-1]
    cl = extract_centerline(df, a, b, 1.5)
    assert cl.cost == pytest.approx(path_cost_oracle(df.dfb, df.spacing, 1.5, a, b), rel=1e-12)


def test_penalty_avoids_corner(bend_df):
    a, b = bend_tips()
    plain = extract_centerline(bend_df, a, b, 0.0)
    penalized = extract_centerline(bend_df, a, b, 2.0)
    assert _min_dfb(bend_df, penalized) > _min_dfb(bend_df, plain)


def test_penalty_monotone(bend_df):
    a, b = bend_tips()
    values = [_min_dfb(bend_df, extract_centerline(bend_df, a, b, lam)) for lam in (0, 1, 2, 4)]
    assert all(x <= y for x, y in zip(values, values[1:]))


@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_interior_clearance(bend_df, cyl_df, lam):
    # endpoints sit on the end caps where clearance is 1 voxel by construction, so
    # only points farther than one tube radius (in arclength) from both ends count
    for df, (a, b) in ((bend_df, bend_tips()), (cyl_df, cylinder_axis())):
        cl = extract_centerline(df, a, b, lam)
        vals = df.dfb[tuple(cl.voxels.T)]
        reach = vals.max()
        inner = (cl.arclength > reach) & (cl.arclength < cl.length - reach)
        assert inner.sum() > 10
        assert vals[inner].min() >= 0.5 * vals.max()


def test_reverse_has_same_cost(bend_df):
    a, b = bend_tips()
    fwd = extract_centerline(bend_df, a, b, 2.0)
    rev = extract_centerline(bend_df, b, a, 2.0)
    assert fwd.cost == pytest.approx(rev.cost, rel=1e-12)


def test_deterministic(bend_df):
    a, b = bend_tips()
    x = extract_centerline(bend_df, a, b, 2.0)
    y = extract_centerline(bend_df, a, b, 2.0)
    assert np.array_equal(x.voxels, y.voxels)


def test_single_point(cyl_df):
    a, _ = cylinder_axis()
    cl = extract_centerline(cyl_df, a, a, 2.0)
    assert len(cl) == 1 and cl.arclength.tolist() == [0.0]


def test_endpoint_errors(cyl_df):
    a, _ = cylinder_axis()
    with pytest.raises(EndpointInBackground):
        extract_centerline(cyl_df, (0, 0, 0), a)
    with pytest.raises(EndpointInBackground):
        extract_centerline(cyl_df, a, (0, 0, 0))
    m = np.zeros((5, 5, 5), dtype=bool)
    m[0, 0, 0] = m[4, 4, 4] = True
    with pytest.raises(Disconnected):
        extract_centerline(compute_edt(VoxelMask(m)), (0, 0, 0), (4, 4, 4))


def test_auto_endpoints_at_opposite_ends(cyl_df):
    start, end = auto_endpoints(cyl_df)
    zs = sorted([start[2], end[2]])
    a, b = cylinder_axis()
    assert abs(zs[0] - a[2]) <= 2 and abs(zs[1] - b[2]) <= 2


@pytest.mark.xfail(strict=True, reason="the pure double sweep lands on cap rims, not cap centers (see decisions ledger)")
def test_auto_endpoints_near_cap_centers(cyl_df):
    start, end = auto_endpoints(cyl_df)
    caps = np.asarray(cylinder_axis())
    for p in (start, end):
        assert np.min(np.linalg.norm(caps - np.asarray(p), axis=1)) <= 2


def test_auto_endpoints_single_voxel():
    m = np.zeros((3, 3, 3), dtype=bool)
    m[1, 2, 0] = True
    assert auto_endpoints(compute_edt(VoxelMask(m))) == ((1, 2, 0), (1, 2, 0))


def test_auto_endpoints_empty():
    from colosynth.distance_field import DistanceField

    with pytest.raises(EmptyMask):
        auto_endpoints(DistanceField(np.zeros((2, 2, 2)), (1.0, 1.0, 1.0)))


def test_u_tube_endpoints_are_eccentric():
    mask = u_mask()
    df = compute_edt(mask)
    start, end = auto_endpoints(df)
    fg = [tuple(v) for v in np.argwhere(mask.data)]
    flat = lambda v: np.ravel_multi_index(v, mask.dims)  # noqa: E731
    # brute-force all-pairs geodesic distances give the diameter
    ecc = {v: np.nanmax(np.where(np.isfinite(d := geodesic_distances(df, v, 0.0)[0]), d, np.nan)) for v in fg}
    diameter = max(ecc.values())
    d_start = geodesic_distances(df, start, 0.0)[0]
    assert d_start[flat(end)] == pytest.approx(diameter, rel=1e-12)
    # tips of the U, not the bend: both at the open end of the arms
    assert start[2] == end[2] or abs(start[0] - end[0]) > 2 or abs(start[1] - end[1]) > 2


def test_resample_straight():
    cl = Centerline.from_points(np.column_stack([np.zeros(11), np.zeros(11), np.arange(11.0)]))
    wp = resample_waypoints(cl, 2.0)
    assert wp.waypoints[:, 2].tolist() == [0, 2, 4, 6, 8, 10] and wp.spacing_mm == 2.0
    wp = resample_waypoints(cl, 7.0)
    assert wp.waypoints[:, 2].tolist() == [0, 10] and wp.spacing_mm == 10.0


def test_resample_quarter_arc_equidistant():
    arc = quarter_arc()
    wp = resample_waypoints(arc, 3.0)
    chords = np.linalg.norm(np.diff(wp.waypoints, axis=0), axis=1)
    assert chords.max() / chords.min() - 1 < 0.01
    assert np.array_equal(wp.waypoints[0], arc.points[0]) and np.array_equal(wp.waypoints[-1], arc.points[-1])


def test_resample_degenerate():
    with pytest.raises(DegenerateCenterline):
        resample_waypoints(Centerline.from_points(np.zeros((1, 3))), 1.0)


def test_all_pairs_geodesic_symmetric():
    df = compute_edt(u_mask())
    fg = [tuple(v) for v in np.argwhere(df.foreground)][:12]
    for a, b in itertools.combinations(fg, 2):
        da = geodesic_distances(df, a, 0.0)[0][np.ravel_multi_index(b, df.dims)]
        db = geodesic_distances(df, b, 0.0)[0][np.ravel_multi_index(a, df.dims)]
        assert da == pytest.approx(db, rel=1e-12)
