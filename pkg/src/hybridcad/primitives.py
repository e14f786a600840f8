"""
Analytic boundary primitives and planar primitive faces.

Circles and ellipses live in the plane orthogonal to ``normal``.  The in-plane
reference direction (angle 0) is the projection of the global axis least
aligned with ``normal``; ties go to the lowest axis index (x before y before z).
The second axis is ``normal x reference``, so angles increase counter-clockwise
seen from the tip of the normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import DomainError, StructuralError, UnsupportedFaceError
from .nurbs import KnotVector, NurbsCurve, curve_point, curve_points

__all__ = [
    "LineSegment",
    "CircleArc",
    "EllipseArc",
    "BezierCurve",
    "BsplineCurve",
    "PrimitiveFace",
    "plane_frame",
    "primitive_point",
    "primitive_to_nurbs",
    "nurbs_parameter",
    "discretize_curve",
    "triangulate_planar_face",
]

LOOP_CLOSURE_TOL = 1e-6
PLANARITY_TOL = 1e-6

# B-spline curve primitives are plain NURBS curves with optional weights.
BsplineCurve = NurbsCurve


def _point(p, name):
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} must be a finite 3D point", name)
    arr.setflags(write=False)
    return arr


def _unit_normal(n):
    n = _point(n, "normal")
    # explicit left-to-right sum so canonical output does not depend on BLAS
    norm = math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
    if norm == 0.0:
        raise StructuralError("normal must be non-zero", "normal")
    if abs(norm - 1.0) > 1e-12:
        n = n / norm
        n.setflags(write=False)
    return n


def plane_frame(normal) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic in-plane axes ``(x_dir, y_dir)`` for a unit normal."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    x = axis - np.dot(axis, n) * n
    x /= np.linalg.norm(x)
    return x, np.cross(n, x)


def _check_angles(first, last):
    first, last = float(first), float(last)
    if not (math.isfinite(first) and math.isfinite(last)):
        raise StructuralError("first/last must be finite", "first")
    if not first < last:
        raise StructuralError("first must be < last", "last")
    if last > first + 2 * math.pi + 1e-9:
        raise StructuralError("arc spans more than a full turn", "last")
    return first, last


@dataclass(frozen=True, eq=False)
class LineSegment:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", _point(self.start, "start"))
        object.__setattr__(self, "end", _point(self.end, "end"))
        if np.array_equal(self.start, self.end):
            raise StructuralError("line start and end coincide", "end")

    first = 0.0
    last = 1.0

    def point(self, t: float) -> np.ndarray:
        _in_range(t, 0.0, 1.0)
        return self.start + t * (self.end - self.start)

    def points(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return self.start + ts[:, None] * (self.end - self.start)

    def to_nurbs(self) -> NurbsCurve:
        return NurbsCurve([self.start, self.end], None, 1, KnotVector([0.0, 1.0], [2, 2]))

    def __eq__(self, other):
        return (isinstance(other, LineSegment) and np.array_equal(self.start, other.start)
                and np.array_equal(self.end, other.end))


class _Conic:
    """Shared evaluation for circle and ellipse arcs (affine images of the unit circle)."""

    @cached_property
    def frame(self):
        return plane_frame(self.normal)

    def _radii(self):
        raise NotImplementedError

    def points(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        a, b = self._radii()
        x, y = self.frame
        return (self.center + (a * np.cos(ts))[:, None] * x + (b * np.sin(ts))[:, None] * y)

    def point(self, t: float) -> np.ndarray:
        _in_range(t, self.first, self.last)
        return self.points([t])[0]

    @property
    def _segments(self):
        span = self.last - self.first
        n = max(1, math.ceil(span / (math.pi / 2) - 1e-9))
        return n, span / n

    def to_nurbs(self) -> NurbsCurve:
        """Piecewise rational quadratic, one segment per at most 90 degrees."""
        n, dt = self._segments
        half = dt / 2
        a, b = self._radii()
        x, y = self.frame
        w_mid = math.cos(half)
        poles, weights = [], []
        for i in range(n):
            t0 = self.first + i * dt
            if i == 0:
                poles.append(self.points([t0])[0])
                weights.append(1.0)
            mid = t0 + half
            # tangent intersection: affine image of the circle construction
            poles.append(self.center + (a * math.cos(mid) / w_mid) * x
                         + (b * math.sin(mid) / w_mid) * y)
            weights.append(w_mid)
            poles.append(self.points([self.first + (i + 1) * dt])[0])
            weights.append(1.0)
        knots = [self.first + i * dt for i in range(n)] + [self.last]
        mults = [3] + [2] * (n - 1) + [3]
        return NurbsCurve(poles, weights, 2, KnotVector(knots, mults))

    def nurbs_parameter(self, t: float) -> float:
        """Parameter of ``to_nurbs()`` hitting the same point as angle ``t``."""
        _in_range(t, self.first, self.last)
        n, dt = self._segments
        i = min(int((t - self.first) // dt), n - 1)
        half = dt / 2
        alpha = t - (self.first + i * dt + half)
        s = 0.5 * (math.tan(alpha / 2) / math.tan(half / 2) + 1.0)
        return min(self.last, self.first + (i + s) * dt)


@dataclass(frozen=True, eq=False)
class CircleArc(_Conic):
    center: np.ndarray
    normal: np.ndarray
    radius: float
    first: float = 0.0
    last: float = 2 * math.pi

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center, "center"))
        object.__setattr__(self, "normal", _unit_normal(self.normal))
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise StructuralError("radius must be > 0", "radius")
        object.__setattr__(self, "radius", r)
        first, last = _check_angles(self.first, self.last)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "last", last)

    def _radii(self):
        return self.radius, self.radius

    def __eq__(self, other):
        return (isinstance(other, CircleArc) and np.array_equal(self.center, other.center)
                and np.array_equal(self.normal, other.normal) and self.radius == other.radius
                and self.first == other.first and self.last == other.last)


@dataclass(frozen=True, eq=False)
class EllipseArc(_Conic):
    center: np.ndarray
    normal: np.ndarray
    major_radius: float
    minor_radius: float
    first: float = 0.0
    last: float = 2 * math.pi

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center, "center"))
        object.__setattr__(self, "normal", _unit_normal(self.normal))
        a, b = float(self.major_radius), float(self.minor_radius)
        if not (math.isfinite(b) and b > 0):
            raise StructuralError("minor_radius must be > 0", "minor_radius")
        if not (math.isfinite(a) and a >= b):
            raise StructuralError("major_radius must be >= minor_radius", "major_radius")
        object.__setattr__(self, "major_radius", a)
        object.__setattr__(self, "minor_radius", b)
        first, last = _check_angles(self.first, self.last)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "last", last)

    def _radii(self):
        return self.major_radius, self.minor_radius

    def __eq__(self, other):
        return (isinstance(other, EllipseArc) and np.array_equal(self.center, other.center)
                and np.array_equal(self.normal, other.normal)
                and self.major_radius == other.major_radius
                and self.minor_radius == other.minor_radius
                and self.first == other.first and self.last == other.last)


@dataclass(frozen=True, eq=False)
class BezierCurve:
    """Polynomial Bezier curve on ``[0, 1]``, trimmed to ``[first, last]``."""

    poles: np.ndarray
    degree: int
    first: float = 0.0
    last: float = 1.0

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=float)
        if poles.ndim != 2 or poles.shape[1] != 3 or not np.all(np.isfinite(poles)):
            raise StructuralError("poles must be a list of finite 3D points", "poles")
        deg = self.degree
        if isinstance(deg, bool) or int(deg) != deg or deg < 1:
            raise StructuralError("degree must be a positive integer", "degree")
        if poles.shape[0] != int(deg) + 1:
            raise StructuralError(
                f"Bezier of degree {deg} needs {int(deg) + 1} poles, got {poles.shape[0]}", "poles")
        first, last = float(self.first), float(self.last)
        if not (0.0 <= first < last <= 1.0):
            raise StructuralError("Bezier range must satisfy 0 <= first < last <= 1", "first")
        poles.setflags(write=False)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "degree", int(deg))
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "last", last)

    @cached_property
    def nurbs(self) -> NurbsCurve:
        p = self.degree
        return NurbsCurve(self.poles, None, p, KnotVector([0.0, 1.0], [p + 1, p + 1]),
                          False, self.first, self.last)

    def point(self, t: float) -> np.ndarray:
        _in_range(t, self.first, self.last)
        # de Casteljau, kept separate from the NURBS path
        pts = self.poles.copy()
        for r in range(1, self.degree + 1):
            pts = (1 - t) * pts[:-1] + t * pts[1:]
        return pts[0]

    def points(self, ts) -> np.ndarray:
        return curve_points(self.nurbs, ts)

    def to_nurbs(self) -> NurbsCurve:
        return self.nurbs

    def __eq__(self, other):
        return (isinstance(other, BezierCurve) and self.degree == other.degree
                and np.array_equal(self.poles, other.poles)
                and self.first == other.first and self.last == other.last)


Primitive = Union[LineSegment, CircleArc, EllipseArc, BezierCurve, NurbsCurve]


def _in_range(t, lo, hi):
    if not (lo <= t <= hi):
        raise DomainError(f"parameter {t!r} outside [{lo}, {hi}]")


def primitive_point(primitive: Primitive, t: float) -> np.ndarray:
    """Point on a primitive at its own parameter ``t`` (angle for conics, [0, 1] for lines)."""
    if isinstance(primitive, NurbsCurve):
        return curve_point(primitive, t)
    return primitive.point(t)


def primitive_to_nurbs(primitive: Primitive) -> NurbsCurve:
    """Exact rational B-spline form of a primitive."""
    if isinstance(primitive, NurbsCurve):
        return primitive
    return primitive.to_nurbs()


def nurbs_parameter(primitive: Primitive, t: float) -> float:
    """Map a primitive parameter to the parameter of ``primitive_to_nurbs(primitive)``."""
    if isinstance(primitive, (CircleArc, EllipseArc)):
        return primitive.nurbs_parameter(t)
    return float(t)


def _endpoints(c: Primitive):
    if isinstance(c, LineSegment):
        return c.start, c.end
    if isinstance(c, NurbsCurve):
        pts = curve_points(c, [c.first, c.last])
    else:
        pts = c.points([c.first, c.last])
    return pts[0], pts[1]


@dataclass(frozen=True, eq=False)
class PrimitiveFace:
    """Planar region bounded by one or more closed loops of primitive curves."""

    loops: tuple

    def __post_init__(self):
        loops = tuple(tuple(loop) for loop in self.loops)
        if not loops or any(len(loop) == 0 for loop in loops):
            raise StructuralError("face needs at least one non-empty loop", "loops")
        for li, loop in enumerate(loops):
            ends = [_endpoints(c) for c in loop]
            for k in range(len(loop)):
                end = ends[k][1]
                start = ends[(k + 1) % len(loop)][0]
                if np.linalg.norm(end - start) > LOOP_CLOSURE_TOL:
                    raise StructuralError(
                        f"loop {li} is open between curve {k} and curve {(k + 1) % len(loop)}",
                        f"loops[{li}]")
        object.__setattr__(self, "loops", loops)

    def __eq__(self, other):
        if not isinstance(other, PrimitiveFace) or len(self.loops) != len(other.loops):
            return False
        return all(len(a) == len(b) and all(x == y for x, y in zip(a, b))
                   for a, b in zip(self.loops, other.loops))


# ----------------------------------------------------------------------------
# discretization
# ----------------------------------------------------------------------------

def _segments_for_radius(span: float, radius: float, tol: float) -> int:
    if tol >= radius:
        return max(1, math.ceil(span / (2 * math.pi / 3)))
    step = 2.0 * math.acos(1.0 - tol / radius)
    return max(1, math.ceil(span / step))


def _chord_error(pts: np.ndarray, mids: np.ndarray) -> float:
    a, b = pts[:-1], pts[1:]
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    t = np.divide(np.einsum("ij,ij->i", mids - a, ab), L2, out=np.zeros(len(L2)), where=L2 > 0)
    proj = a + np.clip(t, 0, 1)[:, None] * ab
    return float(np.max(np.linalg.norm(mids - proj, axis=1)))


def discretize_curve(curve: Primitive, tol: float) -> np.ndarray:
    """Polyline from start to end (inclusive) with chord error at most ``tol``."""
    if isinstance(curve, LineSegment):
        return np.array([curve.start, curve.end])
    if isinstance(curve, (CircleArc, EllipseArc)):
        a, b = curve._radii()
        n = _segments_for_radius(curve.last - curve.first, b * b / a, tol)
        return curve.points(np.linspace(curve.first, curve.last, n + 1))
    nurbs = primitive_to_nurbs(curve)
    lo, hi = nurbs.first, nurbs.last
    n = 8 * max(1, nurbs.knot_vector.knots.size - 1)
    while True:
        ts = np.linspace(lo, hi, n + 1)
        pts = curve_points(nurbs, ts)
        mids = curve_points(nurbs, 0.5 * (ts[:-1] + ts[1:]))
        if _chord_error(pts, mids) <= tol or n >= 1 << 14:
            return pts
        n *= 2


# ----------------------------------------------------------------------------
# planar triangulation (ear clipping with hole bridging)
# ----------------------------------------------------------------------------

def _signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper intersection (shared endpoints and touching do not count)."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0) and d1 != 0 and d2 != 0
            and (d3 > 0) != (d4 > 0) and d3 != 0 and d4 != 0)


def _bridge(poly: list[int], hole: list[int], xy: np.ndarray, obstacles: list[list[int]]):
    """Splice ``hole`` into ``poly`` through a mutually visible vertex pair."""
    hi = max(range(len(hole)), key=lambda k: (xy[hole[k], 0], -k))
    m = xy[hole[hi]]
    order = sorted(range(len(poly)), key=lambda k: (np.sum((xy[poly[k]] - m) ** 2), k))
    edges = []
    for ring in [poly] + obstacles:
        edges += [(ring[k], ring[(k + 1) % len(ring)]) for k in range(len(ring))]
    chosen = None
    for k in order:
        v = xy[poly[k]]
        if np.array_equal(v, m):
            chosen = k
            break
        if any(_segments_cross(m, v, xy[a], xy[b]) for a, b in edges):
            continue
        # bridge must leave the vertex into the polygon interior
        prev, nxt = xy[poly[k - 1]], xy[poly[(k + 1) % len(poly)]]
        convex = _cross(prev, v, nxt) >= 0
        s1, s2 = _cross(prev, v, m), _cross(v, nxt, m)
        inside = (s1 >= 0 and s2 >= 0) if convex else (s1 >= 0 or s2 >= 0)
        if inside:
            chosen = k
            break
    if chosen is None:
        raise UnsupportedFaceError("could not bridge hole into outer loop")
    ring = hole[hi:] + hole[:hi + 1]
    return poly[:chosen + 1] + ring + poly[chosen:]


def _point_in_triangle(p, a, b, c) -> bool:
    return _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0


def _ear_clip(poly: list[int], xy: np.ndarray) -> list[tuple[int, int, int]]:
    poly = list(poly)
    tris = []
    scale = float(np.ptp(xy[poly], axis=0).max()) or 1.0
    eps = 1e-14 * scale * scale
    while len(poly) > 3:
        n = len(poly)
        clipped = False
        for i in range(n):
            a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
            pa, pb, pc = xy[a], xy[b], xy[c]
            if _cross(pa, pb, pc) <= eps:
                continue
            blocked = False
            for v in poly:
                pv = xy[v]
                if (np.array_equal(pv, pa) or np.array_equal(pv, pb)
                        or np.array_equal(pv, pc)):
                    continue
                if _point_in_triangle(pv, pa, pb, pc):
                    blocked = True
                    break
            if not blocked:
                tris.append((a, b, c))
                del poly[i]
                clipped = True
                break
        if not clipped:
            # only degenerate (collinear / duplicated) vertices left to remove
            i = min(range(n), key=lambda k: abs(_cross(xy[poly[k - 1]], xy[poly[k]],
                                                       xy[poly[(k + 1) % n]])))
            if abs(_cross(xy[poly[i - 1]], xy[poly[i]], xy[poly[(i + 1) % n]])) > eps:
                raise UnsupportedFaceError("ear clipping failed; boundary self-intersects")
            del poly[i]
    if len(poly) == 3 and _cross(xy[poly[0]], xy[poly[1]], xy[poly[2]]) > eps:
        tris.append(tuple(poly))
    return tris


def triangulate_planar_face(face: PrimitiveFace, chord_tolerance: float = 1e-3):
    """Mesh a planar primitive face; holes are supported.

    Triangles are wound counter-clockwise around the face normal, which is the
    right-hand normal of the outer (largest) loop's traversal direction.
    """
    from .mesh import TriMesh

    rings, pts = [], []
    offset = 0
    for loop in face.loops:
        ring = []
        for curve in loop:
            poly = discretize_curve(curve, chord_tolerance)
            ring.append(poly[:-1])
        ring = np.vstack(ring)
        pts.append(ring)
        rings.append(list(range(offset, offset + len(ring))))
        offset += len(ring)
    P = np.vstack(pts)
    centroid = P.mean(axis=0)
    _, _, vt = np.linalg.svd(P - centroid)
    normal = vt[2]
    if np.max(np.abs((P - centroid) @ normal)) > PLANARITY_TOL:
        raise UnsupportedFaceError("primitive face boundary is not planar")
    e1, e2 = vt[0], vt[1]
    xy = np.column_stack([(P - centroid) @ e1, (P - centroid) @ e2])
    areas = [_signed_area(xy[r]) for r in rings]
    outer = int(np.argmax(np.abs(areas)))
    if areas[outer] < 0:
        e2 = -e2
        xy[:, 1] *= -1
        areas = [-a for a in areas]
    if abs(areas[outer]) == 0:
        raise UnsupportedFaceError("face has zero area")

    poly = rings[outer]
    holes = [r if areas[i] < 0 else r[::-1] for i, r in enumerate(rings) if i != outer]
    holes.sort(key=lambda r: -float(np.max(xy[r, 0])))
    for k, hole in enumerate(holes):
        poly = _bridge(poly, hole, xy, holes[k + 1:])
    tris = _ear_clip(poly, xy)
    return TriMesh(P, np.array(tris, dtype=np.int64).reshape(-1, 3))
