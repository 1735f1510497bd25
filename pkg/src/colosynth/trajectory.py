"""Smooth timed camera paths through the waypoints.

A centripetal Catmull-Rom spline interpolates the waypoints and is
re-parameterized by arclength, so constant speed means constant mm per frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .centerline import WaypointPath
from .errors import InvalidConfig, TooFewWaypoints
from .geometry import Pose, rotation_between
from .mesh import least_aligned_axis

ARCLENGTH_TOL_MM = 0.01
CATMULL_ROM_ALPHA = 0.5


@dataclass(frozen=True)
class TraversalTiming:
    speed_mm_s: float = 10.0
    fps: float = 30.0
    lookahead_mm: float = 10.0

    def validate(self) -> "TraversalTiming":
        for name in ("speed_mm_s", "fps", "lookahead_mm"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidConfig(f"{name} must be > 0, got {v}")
        return self

    @property
    def step_mm(self) -> float:
        return self.speed_mm_s / self.fps


def _knot_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(b - a)) ** CATMULL_ROM_ALPHA


def _segment_eval(p: np.ndarray, t: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Barry-Goldman pyramid for one segment; ``u`` in [0, 1] maps to [t1, t2]."""
    p0, p1, p2, p3 = p
    t0, t1, t2, t3 = t
    s = (t1 + u * (t2 - t1))[:, None]

    def lerp(pa, pb, ta, tb):
        if tb == ta:
            return np.broadcast_to(pa, (len(s), 3))
        return ((tb - s) * pa + (s - ta) * pb) / (tb - ta)

    a1 = lerp(p0, p1, t0, t1)
    a2 = lerp(p1, p2, t1, t2)
    a3 = lerp(p2, p3, t2, t3)
    b1 = lerp(a1, a2, t0, t2)
    b2 = lerp(a2, a3, t1, t3)
    out = lerp(b1, b2, t1, t2)
    # exact knots
    out = np.where((u == 0.0)[:, None], p1, out)
    return np.where((u == 1.0)[:, None], p2, out)


@dataclass(frozen=True, eq=False)
class ContinuousPath:
    """Arclength-parameterized spline through ``control``.

    ``table_param`` holds global spline parameters (segment index + local u)
    and ``table_s`` the matching cumulative arclength in mm.
    """

    control: np.ndarray
    table_param: np.ndarray
    table_s: np.ndarray

    @property
    def length(self) -> float:
        return float(self.table_s[-1])

    @property
    def n_segments(self) -> int:
        return len(self.control) - 1

    def knot_arclengths(self) -> np.ndarray:
        idx = np.searchsorted(self.table_param, np.arange(self.n_segments + 1, dtype=np.float64))
        return self.table_s[idx]

    def at_param(self, param) -> np.ndarray:
        param = np.atleast_1d(np.asarray(param, dtype=np.float64))
        seg = np.clip(np.floor(param).astype(np.int64), 0, self.n_segments - 1)
        u = np.clip(param - seg, 0.0, 1.0)
        out = np.empty((len(param), 3))
        for k in np.unique(seg):
            sel = seg == k
            p, t = self._segment(k)
            out[sel] = _segment_eval(p, t, u[sel])
        return out

    def evaluate(self, s) -> np.ndarray:
        """Positions at arclengths ``s`` (clamped to [0, L])."""
        s = np.clip(np.atleast_1d(np.asarray(s, dtype=np.float64)), 0.0, self.length)
        return self.at_param(self.param_at(s))

    def param_at(self, s: np.ndarray) -> np.ndarray:
        i = np.clip(np.searchsorted(self.table_s, s, side="right") - 1, 0, len(self.table_s) - 2)
        s0, s1 = self.table_s[i], self.table_s[i + 1]
        p0, p1 = self.table_param[i], self.table_param[i + 1]
        f = np.where(s1 > s0, (s - s0) / np.where(s1 > s0, s1 - s0, 1.0), 0.0)
        return np.where(s == s0, p0, np.where(s == s1, p1, p0 + f * (p1 - p0)))

    def _segment(self, k: int):
        c = self.control
        p1, p2 = c[k], c[k + 1]
        p0 = c[k - 1] if k > 0 else 2.0 * c[0] - c[1]
        p3 = c[k + 2] if k + 2 < len(c) else 2.0 * c[-1] - c[-2]
        t1 = _knot_gap(p0, p1)
        t2 = t1 + _knot_gap(p1, p2)
        t3 = t2 + _knot_gap(p2, p3)
        return np.array([p0, p1, p2, p3]), (0.0, t1, t2, t3)


def _adaptive_params(path: ContinuousPath, k: int, tol: float) -> list[float]:
    """Local parameters on segment ``k`` where chords match the curve within ``tol``."""
    p, t = path._segment(k)

    def pt(u):
        return _segment_eval(p, t, np.array([u]))[0]

    out = [0.0]
    stack = [(0.0, 1.0, pt(0.0), pt(1.0), 0)]
    while stack:
        a, b, pa, pb, depth = stack.pop()
        m = 0.5 * (a + b)
        pm = pt(m)
        chord = np.linalg.norm(pb - pa)
        split = np.linalg.norm(pm - pa) + np.linalg.norm(pb - pm)
        if (split - chord <= tol and depth >= 2) or depth >= 30:
            out.append(b)
        else:
            # right half first so the left half pops next and params stay sorted
            stack.append((m, b, pm, pb, depth + 1))
            stack.append((a, m, pa, pm, depth + 1))
    return out


def build_spline(wp: WaypointPath | np.ndarray, tol_mm: float = ARCLENGTH_TOL_MM) -> ContinuousPath:
    pts = np.asarray(wp.waypoints if isinstance(wp, WaypointPath) else wp, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
        raise TooFewWaypoints(f"need at least 2 waypoints, got {len(pts)}", stage="trajectory")
    keep = np.concatenate([[True], np.linalg.norm(np.diff(pts, axis=0), axis=1) > 0])
    pts = pts[keep]
    if len(pts) < 2:
        raise TooFewWaypoints("waypoints coincide", stage="trajectory")

    base = ContinuousPath(pts, np.zeros(1), np.zeros(1))
    params = [0.0]
    for k in range(len(pts) - 1):
        params.extend(k + u for u in _adaptive_params(base, k, tol_mm)[1:])
    params = np.asarray(params)
    params[-1] = float(len(pts) - 1)
    xyz = base.at_param(params)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(xyz, axis=0), axis=1))])
    return ContinuousPath(pts, params, s)


def generate_poses(path: ContinuousPath, timing: TraversalTiming | None = None) -> list[Pose]:
    """Constant-speed poses looking ``lookahead_mm`` ahead, with a transported up vector.

    Frame k sits at arclength k * speed / fps; the final frame is snapped to the
    path end so the traversal finishes exactly at the last waypoint.
    """
    timing = (timing or TraversalTiming()).validate()
    L = path.length
    step = timing.step_mm
    count = int(np.floor(L / step + 1e-9)) + 1
    s = np.minimum(np.arange(count) * step, L)
    if count > 1:
        s[-1] = L
    pos = path.evaluate(s)
    ahead = path.evaluate(np.minimum(s + timing.lookahead_mm, L))

    poses = []
    forward_prev = None
    up = None
    for k in range(count):
        f = ahead[k] - pos[k]
        n = np.linalg.norm(f)
        if n < 1e-9:
            # at the end of the path the target collapses onto the camera
            f = forward_prev if forward_prev is not None else path.evaluate([min(L, 1e-3)])[0] - pos[0]
            n = np.linalg.norm(f)
        f = f / n
        if up is None:
            up = least_aligned_axis(f)
        else:
            up = rotation_between(forward_prev, f) @ up
        up = up - np.dot(up, f) * f
        up /= np.linalg.norm(up)
        poses.append(Pose.look(pos[k], f, up))
        forward_prev = f
    return poses


def frame_times(count: int, fps: float) -> np.ndarray:
    return np.arange(count) / fps
