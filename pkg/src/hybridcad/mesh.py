"""
Triangle meshes and point clouds: tessellation, welding, normalization,
area-weighted sampling and file export (OBJ, binary STL, XYZ, binary PLY).
"""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial import cKDTree

from .errors import (DegenerateInputError, EvaluationError, HybridCadError, StructuralError,
                     TessellationError)
from .nurbs import NurbsSurface, surface_grid

if TYPE_CHECKING:
    from .cad_json import SolidDocument

log = logging.getLogger(__name__)

__all__ = [
    "TriMesh",
    "PointCloud",
    "tessellate_surface",
    "surface_resolution",
    "tessellate_surface_adaptive",
    "tessellate_document",
    "weld",
    "normalize_to_box",
    "sample_points",
    "export_mesh",
    "export_points",
]

DEGENERATE_AREA = 1e-12
WELD_TOL = 1e-7
START_INTERVALS = 16
MAX_INTERVALS = 1024
MAX_LINEAR_FACTOR = 64


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise StructuralError("triangle index out of range", "triangles")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def flipped(self) -> "TriMesh":
        return TriMesh(self.vertices, self.triangles[:, ::-1])

    def transformed(self, scale: float, translation) -> "TriMesh":
        return TriMesh(self.vertices * scale + np.asarray(translation, dtype=float),
                       self.triangles)

    @staticmethod
    def concatenate(meshes) -> "TriMesh":
        verts, tris, offset = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            tris.append(m.triangles + offset)
            offset += len(m.vertices)
        if not verts:
            return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        return TriMesh(np.vstack(verts), np.vstack(tris))


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise DegenerateInputError("point cloud has non-finite coordinates")
        object.__setattr__(self, "points", p)

    @property
    def count(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)


# ----------------------------------------------------------------------------
# surface tessellation
# ----------------------------------------------------------------------------

def _grid_mesh(P: np.ndarray, area_tol: float) -> TriMesh:
    nu, nv = P.shape[:2]
    if not np.all(np.isfinite(P)):
        raise TessellationError("surface evaluated to non-finite coordinates")
    idx = np.arange(nu * nv).reshape(nu, nv)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    mesh = TriMesh(P.reshape(-1, 3), tris)
    keep = mesh.triangle_areas() >= area_tol
    return TriMesh(mesh.vertices, mesh.triangles[keep])


def _evaluate(surface: NurbsSurface, us, vs) -> np.ndarray:
    try:
        return surface_grid(surface, us, vs)
    except EvaluationError as exc:
        raise TessellationError(f"surface evaluation failed: {exc}") from exc


def _checked_domain(surface: NurbsSurface):
    (u0, u1), (v0, v1) = surface.u_domain, surface.v_domain
    if not (u1 > u0 and v1 > v0):
        raise TessellationError("surface has a zero-width parameter domain")
    return u0, u1, v0, v1


def tessellate_surface(surface: NurbsSurface, nu: int, nv: int,
                       area_tol: float = DEGENERATE_AREA) -> TriMesh:
    """Uniform ``nu x nv`` parameter grid split into triangles.

    Triangles with area below ``area_tol`` (collapsed pole rows, seams of
    degenerate patches) are dropped.
    """
    if nu < 2 or nv < 2:
        raise ValueError("nu and nv must be >= 2")
    u0, u1, v0, v1 = _checked_domain(surface)
    P = _evaluate(surface, np.linspace(u0, u1, nu), np.linspace(v0, v1, nv))
    mesh = _grid_mesh(P, area_tol)
    if mesh.n_triangles == 0:
        raise TessellationError("surface tessellated to an empty mesh")
    return mesh


def _params(surface: NurbsSurface, direction: str, intervals: int, factor: int) -> np.ndarray:
    s = surface.clamped
    if direction == "u":
        degree, kv, (lo, hi) = s.u_degree, s.u_knots, s.u_domain
    else:
        degree, kv, (lo, hi) = s.v_degree, s.v_knots, s.v_domain
    if degree == 1:
        # ruled direction: exact at the knots, optionally subdivided
        k = kv.knots[(kv.knots >= lo) & (kv.knots <= hi)]
        steps = np.linspace(0.0, 1.0, factor + 1)[:-1]
        out = (k[:-1, None] + np.diff(k)[:, None] * steps).ravel()
        return np.append(out, hi)
    return np.linspace(lo, hi, intervals + 1)


def _refined(ts: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(ts) - 1)
    out[0::2] = ts
    out[1::2] = 0.5 * (ts[:-1] + ts[1:])
    return out


def _seg_dist(p, a, b) -> np.ndarray:
    ab = b - a
    L2 = np.einsum("...k,...k->...", ab, ab)
    t = np.divide(np.einsum("...k,...k->...", p - a, ab), L2,
                  out=np.zeros(L2.shape), where=L2 > 0)
    t = np.minimum(np.maximum(t, 0.0), 1.0)[..., None]
    r = p - (a + t * ab)
    return np.sqrt(np.einsum("...k,...k->...", r, r))


def _cross(x, y):
    # np.cross is slow on many tiny arrays
    return np.stack([x[..., 1] * y[..., 2] - x[..., 2] * y[..., 1],
                     x[..., 2] * y[..., 0] - x[..., 0] * y[..., 2],
                     x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]], axis=-1)


def _facet_dist(p, a, b, c) -> np.ndarray:
    """Distance from ``p`` to the plane of triangle abc (to segment ac if degenerate)."""
    n = _cross(b - a, c - a)
    L = np.sqrt(np.einsum("...k,...k->...", n, n))
    h = np.abs(np.einsum("...k,...k->...", p - a, n)) / np.where(L > 0, L, 1.0)
    flat = L <= 1e-300
    if flat.any():
        h = np.where(flat, _seg_dist(p, a, c), h)
    return h


def _deviations(surface, us, vs, high):
    G = _evaluate(surface, _refined(us), _refined(vs))
    if not np.all(np.isfinite(G)):
        raise TessellationError("surface evaluated to non-finite coordinates")
    corners = G[0::2, 0::2]
    # degree-1 directions are straight, so their edge midpoints lie on the chord
    du = _seg_dist(G[1::2, 0::2], corners[:-1], corners[1:]).max() if high["u"] else 0.0
    dv = _seg_dist(G[0::2, 1::2], corners[:, :-1], corners[:, 1:]).max() if high["v"] else 0.0
    # cell centres against the two facets sharing the cell diagonal
    a, b = corners[:-1, :-1], corners[1:, :-1]
    c, d = corners[1:, 1:], corners[:-1, 1:]
    centre = G[1::2, 1::2]
    dd = np.minimum(_facet_dist(centre, a, b, c), _facet_dist(centre, a, c, d)).max()
    return du, dv, dd, corners


def _flat_quad(s: NurbsSurface, chord_tolerance: float) -> bool:
    """True for a unit-weight bilinear patch whose centre lies on the facet abc."""
    if s.u_degree != 1 or s.v_degree != 1 or s.poles.shape[:2] != (2, 2):
        return False
    if not np.all(s.weights == 1.0):
        return False
    a, d, b, c = s.poles.reshape(4, 3).tolist()
    e1 = [b[k] - a[k] for k in range(3)]
    e2 = [c[k] - a[k] for k in range(3)]
    n = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
         e1[0] * e2[1] - e1[1] * e2[0]]
    L = math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
    h = sum((0.25 * (a[k] + b[k] + c[k] + d[k]) - a[k]) * n[k] for k in range(3))
    return L > 0 and abs(h) <= chord_tolerance * L


def _resolve(surface: NurbsSurface, chord_tolerance: float):
    """Resolution search; also returns the last sample grid and its parameters."""
    _checked_domain(surface)
    s = surface.clamped
    if _flat_quad(s, chord_tolerance):
        # the first refinement pass would accept it, and its samples are the poles
        return (START_INTERVALS, 1), s.poles.copy()
    high = {"u": s.u_degree > 1, "v": s.v_degree > 1}
    intervals, factor = START_INTERVALS, 1
    while True:
        us = _params(s, "u", intervals, factor)
        vs = _params(s, "v", intervals, factor)
        du, dv, dd, grid = _deviations(s, us, vs, high)
        need_high = (high["u"] and du > chord_tolerance) or (high["v"] and dv > chord_tolerance)
        if need_high and intervals < MAX_INTERVALS:
            intervals *= 2
            continue
        if dd > chord_tolerance:
            if not all(high.values()) and factor < MAX_LINEAR_FACTOR:
                factor *= 2
                continue
            if any(high.values()) and intervals < MAX_INTERVALS:
                intervals *= 2
                continue
        if max(du, dv, dd) > chord_tolerance:
            log.warning("chord tolerance %.3g not reached (deviation %.3g)",
                        chord_tolerance, max(du, dv, dd))
        return (intervals, factor), grid


def surface_resolution(surface: NurbsSurface, chord_tolerance: float) -> tuple[int, int]:
    """Smallest (intervals, linear_factor) meeting ``chord_tolerance``.

    Directions of degree >= 2 are sampled uniformly with ``intervals`` spans,
    starting at 16 and doubling.  Degree-1 directions are sampled at their
    knots, each span subdivided ``linear_factor`` times; they are refined only
    when a cell centre lies off the two facets of its cell (twist).
    """
    return _resolve(surface, chord_tolerance)[0]


def tessellate_surface_adaptive(surface: NurbsSurface, chord_tolerance: float = 1e-3,
                                resolution: tuple[int, int] | None = None,
                                area_tol: float = DEGENERATE_AREA) -> TriMesh:
    if resolution is None:
        resolution = surface_resolution(surface, chord_tolerance)
    intervals, factor = resolution
    s = surface.clamped
    _checked_domain(s)
    P = _evaluate(s, _params(s, "u", intervals, factor), _params(s, "v", intervals, factor))
    mesh = _grid_mesh(P, area_tol)
    if mesh.n_triangles == 0:
        raise TessellationError("surface tessellated to an empty mesh")
    return mesh


# ----------------------------------------------------------------------------
# documents
# ----------------------------------------------------------------------------

def document_scale(doc: "SolidDocument") -> float:
    """Half the longest side of the control geometry's bounding box (1.0 when normalized)."""
    from .cad_json import anchor_points

    pts = anchor_points(doc)
    if len(pts) == 0:
        return 1.0
    ext = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    return ext / 2.0 if ext > 0 else 1.0


def weld(mesh: TriMesh, tol: float = WELD_TOL) -> TriMesh:
    """Merge vertices closer than ``tol``; drop triangles that collapse and unused vertices."""
    n = mesh.n_vertices
    if n == 0:
        return mesh
    parent = np.arange(n)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    pairs = cKDTree(mesh.vertices).query_pairs(tol, output_type="ndarray")
    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    rep = np.array([find(i) for i in range(n)])
    tris = rep[mesh.triangles]
    ok = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    tris = tris[ok]
    used = np.unique(tris)
    remap = np.full(n, -1)
    remap[used] = np.arange(len(used))
    return TriMesh(mesh.vertices[used], remap[tris])


def tessellate_document(doc: "SolidDocument", chord_tolerance: float = 1e-3,
                        weld_tolerance: float = WELD_TOL) -> TriMesh:
    """Mesh every face and weld shared borders.

    Tolerances are in normalized units (geometry fitted to a 2x2x2 box) and are
    scaled by ``document_scale``.  All curved NURBS directions in a document use
    the same interval count (the largest any face needs), so faces that share a
    boundary curve sample it at identical parameters and weld cleanly.
    """
    from .primitives import PrimitiveFace, triangulate_planar_face

    scale = document_scale(doc)
    tol = chord_tolerance * scale
    area_tol = DEGENERATE_AREA * scale * scale
    reasons: dict[int, str] = {}
    resolutions, samples = {}, {}
    for i, face in enumerate(doc.faces):
        if isinstance(face.payload, NurbsSurface):
            try:
                resolutions[i], samples[i] = _resolve(face.payload, tol)
            except HybridCadError as exc:
                reasons[i] = str(exc)
    if resolutions:
        common = (max(r[0] for r in resolutions.values()),
                  max(r[1] for r in resolutions.values()))
    meshes = []
    for i, face in enumerate(doc.faces):
        if i in reasons:
            continue
        try:
            if isinstance(face.payload, PrimitiveFace):
                m = triangulate_planar_face(face.payload, tol)
            else:
                s = face.payload.clamped
                grid = samples[i]
                linear = s.u_degree == 1 and s.v_degree == 1
                if resolutions[i] != common and not (linear and resolutions[i][1] == common[1]):
                    grid = _evaluate(s, _params(s, "u", *common), _params(s, "v", *common))
                m = _grid_mesh(grid, area_tol)
            if m.n_triangles == 0 or not np.all(np.isfinite(m.vertices)):
                raise TessellationError("empty or non-finite mesh")
            meshes.append(m)
        except HybridCadError as exc:
            reasons[i] = str(exc)
    if reasons:
        failed = sorted(reasons)
        raise TessellationError("; ".join(f"face {i}: {reasons[i]}" for i in failed),
                                failed, reasons)
    return weld(TriMesh.concatenate(meshes), weld_tolerance * scale)


# ----------------------------------------------------------------------------
# normalization and sampling
# ----------------------------------------------------------------------------

def normalize_to_box(mesh: TriMesh, size: float = 2.0):
    """Uniformly scale and center so the longest bounding-box side equals ``size``.

    Returns ``(mesh, scale, translation)`` with ``new = old * scale + translation``.
    """
    if mesh.n_vertices == 0:
        raise DegenerateInputError("empty mesh")
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    longest = float(np.max(hi - lo))
    if not longest > 0:
        raise DegenerateInputError("mesh has zero extent")
    scale = size / longest
    translation = -0.5 * (lo + hi) * scale
    if scale == 1.0 and not np.any(translation):
        return mesh, 1.0, np.zeros(3)
    return mesh.transformed(scale, translation), scale, translation


def sample_points(mesh: TriMesh, n: int = 8192, seed: int = 0) -> PointCloud:
    """Area-uniform random surface samples mapped into the unit cube.

    Triangles are picked with probability proportional to area and points are
    uniform inside each triangle.  The cloud is then scaled so the mesh's
    longest bounding-box side is 1 and centered at (0.5, 0.5, 0.5).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mesh.n_triangles == 0:
        raise DegenerateInputError("mesh has no triangles")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if not total > 0:
        raise DegenerateInputError("mesh has zero total area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a, b, c = (mesh.vertices[mesh.triangles[tri, k]] for k in range(3))
    pts = ((1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c)
    used = mesh.vertices[np.unique(mesh.triangles)]
    lo, hi = used.min(axis=0), used.max(axis=0)
    longest = float(np.max(hi - lo))
    pts = (pts - 0.5 * (lo + hi)) / longest + 0.5
    return PointCloud(pts)


# ----------------------------------------------------------------------------
# export
# ----------------------------------------------------------------------------

def _obj(mesh: TriMesh) -> bytes:
    buf = io.StringIO()
    for x, y, z in mesh.vertices:
        buf.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
    for a, b, c in mesh.triangles + 1:
        buf.write(f"f {a} {b} {c}\n")
    return buf.getvalue().encode("ascii")


def _stl(mesh: TriMesh) -> bytes:
    v = mesh.vertices[mesh.triangles]
    normals = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)
    record = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    data = np.zeros(len(v), dtype=record)
    data["normal"] = normals
    data["v"] = v
    header = b"hybridcad binary STL".ljust(80, b" ")
    return header + struct.pack("<I", len(v)) + data.tobytes()


def export_mesh(mesh: TriMesh, fmt: str = "obj") -> bytes:
    """Serialize a mesh as ASCII OBJ (1-based indices) or little-endian binary STL."""
    if mesh.n_triangles == 0:
        raise DegenerateInputError("cannot export an empty mesh")
    fmt = fmt.lower()
    if fmt == "obj":
        return _obj(mesh)
    if fmt == "stl":
        return _stl(mesh)
    raise ValueError(f"unknown mesh format {fmt!r}")


def export_points(cloud: PointCloud, fmt: str = "xyz") -> bytes:
    """ASCII XYZ (one ``x y z`` line per point) or binary little-endian PLY."""
    fmt = fmt.lower()
    if fmt == "xyz":
        return "".join(f"{x:.9g} {y:.9g} {z:.9g}\n" for x, y, z in cloud.points).encode("ascii")
    if fmt == "ply":
        header = ("ply\nformat binary_little_endian 1.0\n"
                  f"element vertex {cloud.count}\n"
                  "property float x\nproperty float y\nproperty float z\nend_header\n")
        return header.encode("ascii") + cloud.points.astype("<f4").tobytes()
    raise ValueError(f"unknown point format {fmt!r}")
