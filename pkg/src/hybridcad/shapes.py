"""Builders for closed and open solids used as fixtures, demos and synthetic corpora.

Document builders return :class:`SolidDocument` made only of NURBS faces, so
shared borders are sampled identically and weld into closed meshes.  Mesh
builders return :class:`TriMesh` complexes with known topology.
"""

from __future__ import annotations

import math

import numpy as np

from .cad_json import FaceRecord, SolidDocument
from .mesh import TriMesh
from .nurbs import KnotVector, NurbsSurface
from .primitives import CircleArc

__all__ = [
    "bilinear_patch",
    "box_document",
    "cube_document",
    "cylinder_document",
    "washer_document",
    "sphere_document",
    "torus_document",
    "open_patch_document",
    "grid_torus_mesh",
    "genus2_mesh",
    "subdivide",
    "voxel_document",
    "slab_with_holes",
    "frame_document",
    "synthetic_corpus",
]

_LINE = KnotVector([0.0, 1.0], [2, 2])


def _nurbs(surface: NurbsSurface) -> FaceRecord:
    return FaceRecord("nurbs", surface)


def bilinear_patch(p00, p10, p01, p11) -> NurbsSurface:
    poles = np.array([[p00, p01], [p10, p11]], dtype=float)
    return NurbsSurface(poles, None, _LINE, _LINE, 1, 1)


def box_document(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0), name: str | None = "box") -> SolidDocument:
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    c = {(i, j, k): (x1 if i else x0, y1 if j else y0, z1 if k else z0)
         for i in (0, 1) for j in (0, 1) for k in (0, 1)}
    quads = [
        (c[0, 0, 0], c[0, 1, 0], c[1, 0, 0], c[1, 1, 0]),
        (c[0, 0, 1], c[1, 0, 1], c[0, 1, 1], c[1, 1, 1]),
        (c[0, 0, 0], c[1, 0, 0], c[0, 0, 1], c[1, 0, 1]),
        (c[0, 1, 0], c[0, 1, 1], c[1, 1, 0], c[1, 1, 1]),
        (c[0, 0, 0], c[0, 0, 1], c[0, 1, 0], c[0, 1, 1]),
        (c[1, 0, 0], c[1, 1, 0], c[1, 0, 1], c[1, 1, 1]),
    ]
    return SolidDocument([_nurbs(bilinear_patch(*q)) for q in quads], name)


def cube_document(size: float = 1.0) -> SolidDocument:
    return box_document((0.0, 0.0, 0.0), (size, size, size), "cube")


def _circle(radius: float, z: float = 0.0, center=(0.0, 0.0)):
    """Poles, weights and knots of a full circle in the plane ``z``."""
    c = CircleArc([center[0], center[1], z], [0.0, 0.0, 1.0], radius).to_nurbs()
    return c.poles, c.weights, c.knot_vector


def _ruled(rows_a, rows_b, weights, u_kv) -> NurbsSurface:
    poles = np.stack([rows_a, rows_b], axis=1)
    w = np.column_stack([weights, weights])
    return NurbsSurface(poles, w, u_kv, _LINE, 2, 1)


def cylinder_document(radius: float = 1.0, height: float = 2.0,
                      name: str | None = "cylinder") -> SolidDocument:
    """Closed cylinder on the z axis; caps are NURBS disks collapsed at the center.

    All faces are parameterized so that du x dv points out of the solid.
    """
    bottom, w, kv = _circle(radius, 0.0)
    top, _, _ = _circle(radius, height)
    side = _ruled(bottom, top, w, kv)
    cap0 = _ruled(np.zeros_like(bottom), bottom, w, kv)
    cap1 = _ruled(top, np.tile([0.0, 0.0, height], (len(top), 1)), w, kv)
    return SolidDocument([_nurbs(side), _nurbs(cap0), _nurbs(cap1)], name)


def washer_document(inner: float = 0.5, outer: float = 1.0, height: float = 0.25,
                    name: str | None = "washer") -> SolidDocument:
    """Annulus extruded along z: one through hole."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    ib, w, kv = _circle(inner, 0.0)
    it, _, _ = _circle(inner, height)
    ob, _, _ = _circle(outer, 0.0)
    ot, _, _ = _circle(outer, height)
    faces = [_ruled(ob, ot, w, kv), _ruled(it, ib, w, kv),
             _ruled(ib, ob, w, kv), _ruled(ot, it, w, kv)]
    return SolidDocument([_nurbs(f) for f in faces], name)


def sphere_document(radius: float = 1.0, name: str | None = "sphere") -> SolidDocument:
    """Sphere as a full circle swept by a semicircle; pole rows collapse at the poles."""
    circ = CircleArc([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0).to_nurbs()
    # semicircle from the south to the north pole in the (r, z) half plane
    semi = CircleArc([0.0, 0.0, 0.0], [0.0, -1.0, 0.0], radius,
                     -math.pi / 2, math.pi / 2).to_nurbs()
    r = np.hypot(semi.poles[:, 0], semi.poles[:, 1])
    z = semi.poles[:, 2]
    poles = np.empty((len(circ.poles), len(semi.poles), 3))
    poles[..., 0] = circ.poles[:, None, 0] * r[None, :]
    poles[..., 1] = circ.poles[:, None, 1] * r[None, :]
    poles[..., 2] = z[None, :]
    weights = np.outer(circ.weights, semi.weights)
    surf = NurbsSurface(poles, weights, circ.knot_vector, semi.knot_vector, 2, 2)
    return SolidDocument([_nurbs(surf)], name)


def torus_document(major: float = 1.0, minor: float = 0.25, periodic: bool = True,
                   name: str | None = "torus") -> SolidDocument:
    """Torus as the product of two circles; optionally stored periodic in both directions."""
    if not 0 < minor < major:
        raise ValueError("need 0 < minor < major")
    circ = CircleArc([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0).to_nurbs()
    cx, cy, w = circ.poles[:, 0], circ.poles[:, 1], circ.weights
    rad = major + minor * cx
    poles = np.empty((len(cx), len(cx), 3))
    poles[..., 0] = cx[:, None] * rad[None, :]
    poles[..., 1] = cy[:, None] * rad[None, :]
    poles[..., 2] = (minor * cy)[None, :]
    weights = np.outer(w, w)
    kv = circ.knot_vector
    if periodic:
        # drop the duplicated closing pole; interior knots keep multiplicity 2
        kv = KnotVector(kv.knots, [2] * len(kv.knots))
        poles, weights = poles[:-1, :-1], weights[:-1, :-1]
    surf = NurbsSurface(poles, weights, kv, kv, 2, 2, periodic, periodic)
    return SolidDocument([_nurbs(surf)], name)


def open_patch_document(name: str | None = "patch") -> SolidDocument:
    """A single curved, open patch (not a solid)."""
    poles = np.array([[[0, 0, 0], [0, 1, 0.2], [0, 2, 0]],
                      [[1, 0, 0.3], [1, 1, 0.6], [1, 2, 0.3]],
                      [[2, 0, 0], [2, 1, 0.2], [2, 2, 0]]], dtype=float)
    kv = KnotVector([0.0, 1.0], [3, 3])
    return SolidDocument([_nurbs(NurbsSurface(poles, None, kv, kv, 2, 2))], name)


# ----------------------------------------------------------------------------
# mesh complexes
# ----------------------------------------------------------------------------

def grid_torus_mesh(n: int = 20, m: int = 20, major: float = 1.0, minor: float = 0.3) -> TriMesh:
    """``n x m`` quads on a torus, each split into two triangles (V=nm, E=3nm, F=2nm)."""
    u = 2 * math.pi * np.arange(n) / n
    v = 2 * math.pi * np.arange(m) / m
    U, W = np.meshgrid(u, v, indexing="ij")
    verts = np.stack([(major + minor * np.cos(W)) * np.cos(U),
                      (major + minor * np.cos(W)) * np.sin(U),
                      minor * np.sin(W)], axis=-1).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    a = (i * m + j).ravel()
    b = (((i + 1) % n) * m + j).ravel()
    c = (((i + 1) % n) * m + (j + 1) % m).ravel()
    d = (i * m + (j + 1) % m).ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(verts, tris)


def genus2_mesh(n: int = 20, m: int = 20) -> TriMesh:
    """Two grid tori joined through a tube where one quad was removed from each.

    Removing a quad deletes 2 faces and 1 edge per torus; gluing the two square
    boundaries identifies 4 vertices and 4 edges, so chi = 0 + 0 - 2 = -2.
    """
    t = grid_torus_mesh(n, m)
    nt = len(t.triangles) // 2
    # quad (0, 0) is triangles 0 and nt; its boundary is a-b-c-d
    keep = np.ones(len(t.triangles), dtype=bool)
    keep[[0, nt]] = False
    a, b, c, d = 0, m, m + 1, 1
    first = t.triangles[keep]
    offset = len(t.vertices)
    second = t.triangles[keep] + offset
    # mirror the second torus across the plane x = -1.5 so the surfaces face away
    verts2 = t.vertices.copy()
    verts2[:, 0] = -3.0 - verts2[:, 0]
    second = second[:, ::-1]
    # identify the removed square of the second copy with the first (reversed orientation)
    glue = {a + offset: a, b + offset: b, c + offset: c, d + offset: d}
    second = np.vectorize(lambda k: glue.get(int(k), int(k)))(second)
    tris = np.concatenate([first, second])
    verts = np.concatenate([t.vertices, verts2])
    used = np.unique(tris)
    remap = np.full(len(verts), -1)
    remap[used] = np.arange(len(used))
    return TriMesh(verts[used], remap[tris])


def subdivide(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four through its edge midpoints."""
    tris = mesh.triangles
    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    n0, f = len(mesh.vertices), len(tris)
    m01, m12, m20 = (n0 + inv[:f], n0 + inv[f:2 * f], n0 + inv[2 * f:])
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    new = np.concatenate([np.column_stack([a, m01, m20]), np.column_stack([m01, b, m12]),
                          np.column_stack([m20, m12, c]), np.column_stack([m01, m12, m20])])
    return TriMesh(np.concatenate([mesh.vertices, mids]), new)


def voxel_document(occupancy, cell: float = 1.0, name: str | None = "voxels") -> SolidDocument:
    """One bilinear patch per exposed face of the filled cells of a 3D boolean grid.

    The grid must describe a 2-manifold boundary (no cells touching only along
    an edge or at a corner); a slab with isolated holes has genus = hole count.
    """
    occ = np.pad(np.asarray(occupancy, dtype=bool), 1)
    faces = []
    for axis in range(3):
        # cyclic pair so that e1 x e2 points along +axis
        a1, a2 = (axis + 1) % 3, (axis + 2) % 3
        diff = occ[tuple(slice(1, None) if k == axis else slice(None) for k in range(3))].astype(int) \
            - occ[tuple(slice(None, -1) if k == axis else slice(None) for k in range(3))]
        for idx in zip(*np.nonzero(diff)):
            base = np.array(idx, dtype=float) - 1.0
            base[axis] += 1.0
            e1 = np.zeros(3)
            e2 = np.zeros(3)
            e1[a1] = e2[a2] = 1.0
            if diff[idx] > 0:
                # filled cell on the + side: the outward normal is -axis
                e1, e2 = e2, e1
            p = [(base + s * e1 + t * e2) * cell for s in (0, 1) for t in (0, 1)]
            faces.append(_nurbs(bilinear_patch(p[0], p[2], p[1], p[3])))
    return SolidDocument(faces, name)


def slab_with_holes(nx: int, ny: int, holes, thickness: int = 1, cell: float = 1.0,
                    name: str | None = "slab") -> SolidDocument:
    """``nx x ny x thickness`` slab with the listed (i, j) columns removed."""
    occ = np.ones((nx, ny, thickness), dtype=bool)
    for i, j in holes:
        occ[i, j, :] = False
    return voxel_document(occ, cell, name)


def frame_document(outer=(2.0, 2.0), inner=(0.5, 0.5, 1.5, 1.5), height: float = 0.5,
                   name: str | None = "frame") -> SolidDocument:
    """Rectangular ring prism: outer rectangle [0, ox] x [0, oy] minus ``inner`` (x0, y0, x1, y1)."""
    ox, oy = outer
    x0, y0, x1, y1 = inner
    if not (0 < x0 < x1 < ox and 0 < y0 < y1 < oy and height > 0):
        raise ValueError("inner rectangle must lie strictly inside the outer one")
    out = [(0.0, 0.0), (ox, 0.0), (ox, oy), (0.0, oy)]
    inn = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]

    def p(xy, z):
        return (xy[0], xy[1], z)

    faces = []
    for k in range(4):
        a, b = out[k], out[(k + 1) % 4]
        c, d = inn[k], inn[(k + 1) % 4]
        faces.append(bilinear_patch(p(a, 0), p(b, 0), p(a, height), p(b, height)))
        faces.append(bilinear_patch(p(d, 0), p(c, 0), p(d, height), p(c, height)))
        faces.append(bilinear_patch(p(a, 0), p(c, 0), p(b, 0), p(d, 0)))
        faces.append(bilinear_patch(p(a, height), p(b, height), p(c, height), p(d, height)))
    return SolidDocument([_nurbs(f) for f in faces], name)


def synthetic_corpus(n: int, seed: int = 0) -> dict[str, SolidDocument]:
    """``n`` seeded random parts: boxes, one-hole frames and three-hole slabs.

    Mixes shapes so that token count, hole count, area/volume ratio and
    bounding-box diagonal all vary across the corpus.
    """
    rng = np.random.default_rng(seed)
    docs = {}
    for i in range(n):
        pid = f"part-{i:05d}"
        kind = rng.random()
        if kind < 0.75:
            dims = rng.uniform(0.05, 3.0, size=3)
            docs[pid] = box_document((0.0, 0.0, 0.0), tuple(dims), pid)
        elif kind < 0.98:
            ox, oy = rng.uniform(1.0, 3.0, size=2)
            mx, my = rng.uniform(0.1, 0.4, size=2)
            docs[pid] = frame_document((ox, oy), (mx * ox, my * oy, (1 - mx) * ox, (1 - my) * oy),
                                       float(rng.uniform(0.05, 1.0)), pid)
        else:
            docs[pid] = slab_with_holes(7, 3, [(1, 1), (3, 1), (5, 1)], 1,
                                        float(rng.uniform(0.2, 1.0)), pid)
    return docs
