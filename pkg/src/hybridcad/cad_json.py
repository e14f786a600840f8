"""
Hybrid CAD JSON documents: parsing, validation and canonical serialization.

Schema (all keys lower case)::

    {"name": "part-001",
     "faces": [
       {"type": "nurbs", "u_degree": 3, "v_degree": 1,
        "u_periodic": false, "v_periodic": false,
        "u_knots": [...], "u_mults": [...], "v_knots": [...], "v_mults": [...],
        "poles": [[[x, y, z], ...], ...],
        "weights": [[1.000000, 8], [0.707107, 4]]},
       {"type": "primitive",
        "loops": [[{"type": "line", "start": [...], "end": [...]},
                   {"type": "circle", "center": [...], "normal": [...],
                    "radius": 0.5, "first": 0.0, "last": 3.14159...}]]}
     ]}

A face may also be a single closed curve written directly, e.g.
``{"type": "circle", ...}``; it is read as a primitive face with one loop.

``weights`` accepts (value, frequency) runs in row-major pole order, a full
2D grid, or a flat list; it may be omitted (all 1.0).  A list of pairs whose
second entries are JSON integers summing to the pole count is read as runs.

Canonical output rounds NURBS surface pole coordinates and all weights to six
decimals (round-half-to-even on the binary value), writes weights as runs,
and emits keys in a fixed order with one face per line.  Other reals are
written in shortest round-trip form.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Union

import numpy as np

from .errors import DocumentError, HybridCadError, StructuralError, TessellationError
from .nurbs import KnotVector, NurbsCurve, NurbsSurface
from .primitives import (BezierCurve, CircleArc, EllipseArc, LineSegment, PrimitiveFace,
                         discretize_curve)

log = logging.getLogger(__name__)

__all__ = [
    "FaceRecord",
    "SolidDocument",
    "Violation",
    "parse_document",
    "serialize_document",
    "validate_document",
    "check_document",
    "compress_weights",
    "expand_weights",
    "anchor_points",
    "roundtrip",
    "CURVE_KINDS",
]

CURVE_KINDS = ("line", "circle", "ellipse", "bezier", "bspline")
FACE_KINDS = ("nurbs", "primitive")
DECIMALS = 6

_KEYS = {
    "nurbs": ("type", "u_degree", "v_degree", "u_periodic", "v_periodic", "u_knots", "u_mults",
              "v_knots", "v_mults", "poles", "weights"),
    "primitive": ("type", "loops"),
    "line": ("type", "start", "end"),
    "circle": ("type", "center", "normal", "radius", "first", "last"),
    "ellipse": ("type", "center", "normal", "major_radius", "minor_radius", "first", "last"),
    "bezier": ("type", "degree", "poles", "first", "last"),
    "bspline": ("type", "degree", "is_periodic", "knots", "mults", "poles", "weights",
                "first", "last"),
}
_OPTIONAL = {"weights", "first", "last", "u_periodic", "v_periodic", "is_periodic"}


@dataclass(frozen=True, eq=False)
class FaceRecord:
    """One face: a NURBS surface or a planar face bounded by primitive curves."""

    kind: str
    payload: Union[NurbsSurface, PrimitiveFace]

    def __post_init__(self):
        expected = NurbsSurface if self.kind == "nurbs" else PrimitiveFace
        if self.kind not in FACE_KINDS or not isinstance(self.payload, expected):
            raise StructuralError(f"invalid face kind {self.kind!r} for payload", "type")

    def __eq__(self, other):
        return (isinstance(other, FaceRecord) and self.kind == other.kind
                and self.payload == other.payload)


@dataclass(frozen=True, eq=False)
class SolidDocument:
    faces: tuple
    name: str | None = None

    def __post_init__(self):
        faces = tuple(self.faces)
        if not faces:
            raise StructuralError("document must contain at least one face", "faces")
        object.__setattr__(self, "faces", faces)

    def __eq__(self, other):
        return (isinstance(other, SolidDocument) and self.name == other.name
                and len(self.faces) == len(other.faces)
                and all(a == b for a, b in zip(self.faces, other.faces)))


@dataclass(frozen=True)
class Violation:
    face: int | None
    field: str
    message: str

    def __str__(self):
        where = "document" if self.face is None else f"face {self.face}"
        if self.field:
            where += f" {self.field}"
        return f"{where}: {self.message}"

    def to_dict(self):
        return {"face": self.face, "field": self.field, "message": self.message}


# ----------------------------------------------------------------------------
# weights
# ----------------------------------------------------------------------------

def compress_weights(weights: Iterable[float], decimals: int = DECIMALS) -> list[tuple[float, int]]:
    """Run-length ``(value, frequency)`` pairs of the rounded weights, in order."""
    runs: list[list] = []
    for w in np.asarray(list(weights), dtype=float).ravel():
        w = _round(float(w), decimals)
        if runs and runs[-1][0] == w:
            runs[-1][1] += 1
        else:
            runs.append([w, 1])
    return [(v, f) for v, f in runs]


def expand_weights(runs: Iterable) -> np.ndarray:
    out = []
    for value, freq in runs:
        out.extend([float(value)] * int(freq))
    return np.array(out, dtype=float)


def _round(x: float, decimals: int = DECIMALS) -> float:
    return float(_fixed(x, decimals))


def _fixed(x: float, decimals: int = DECIMALS) -> str:
    s = f"{x:.{decimals}f}"
    if s.startswith("-") and float(s) == 0.0:
        s = s[1:]
    return s


# ----------------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------------

class _Ctx:
    def __init__(self, face: int | None, prefix: str = ""):
        self.face = face
        self.prefix = prefix

    def path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def fail(self, key: str, message: str):
        raise DocumentError(message, self.face, self.path(key))


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _get(obj: dict, key: str, ctx: _Ctx, default=None, required=True):
    if key not in obj:
        if required:
            ctx.fail(key, "missing required field")
        return default
    return obj[key]


def _real(obj, key, ctx, required=True, default=None):
    x = _get(obj, key, ctx, default, required)
    if x is default and not required:
        return default
    if not _is_num(x) or not math.isfinite(x):
        ctx.fail(key, f"expected a finite number, got {x!r}")
    return float(x)


def _int(obj, key, ctx):
    x = _get(obj, key, ctx)
    if isinstance(x, bool) or not (isinstance(x, int) or (isinstance(x, float) and x.is_integer())):
        ctx.fail(key, f"expected an integer, got {x!r}")
    return int(x)


def _bool(obj, key, ctx):
    x = _get(obj, key, ctx, False, required=False)
    if not isinstance(x, bool):
        ctx.fail(key, f"expected a boolean, got {x!r}")
    return x


def _reals(obj, key, ctx):
    x = _get(obj, key, ctx)
    if not isinstance(x, list) or not all(_is_num(v) and math.isfinite(v) for v in x):
        ctx.fail(key, "expected a list of finite numbers")
    return [float(v) for v in x]


def _ints(obj, key, ctx):
    x = _get(obj, key, ctx)
    if not isinstance(x, list) or not all(
            not isinstance(v, bool) and isinstance(v, (int, float)) and float(v).is_integer()
            for v in x):
        ctx.fail(key, "expected a list of integers")
    return [int(v) for v in x]


def _point3(x, key, ctx):
    if (not isinstance(x, list) or len(x) != 3
            or not all(_is_num(v) and math.isfinite(v) for v in x)):
        ctx.fail(key, f"expected an [x, y, z] point, got {x!r}")
    return [float(v) for v in x]


def _points(obj, key, ctx):
    x = _get(obj, key, ctx)
    if not isinstance(x, list) or not x:
        ctx.fail(key, "expected a non-empty list of points")
    return [_point3(p, f"{key}[{i}]", ctx) for i, p in enumerate(x)]


def _pole_grid(obj, key, ctx):
    x = _get(obj, key, ctx)
    if not isinstance(x, list) or not x or not all(isinstance(r, list) and r for r in x):
        ctx.fail(key, "expected a non-empty 2D array of points")
    if len({len(r) for r in x}) != 1:
        ctx.fail(key, "pole rows have different lengths")
    return [[_point3(p, f"{key}[{i}][{j}]", ctx) for j, p in enumerate(r)]
            for i, r in enumerate(x)]


def _weights(obj, ctx, count: int, shape=None):
    raw = _get(obj, "weights", ctx, None, required=False)
    if raw is None:
        return None
    if not isinstance(raw, list):
        ctx.fail("weights", "expected a list")
    is_runs = bool(raw) and all(
        isinstance(r, list) and len(r) == 2 and _is_num(r[0])
        and isinstance(r[1], int) and not isinstance(r[1], bool) and r[1] >= 1 for r in raw)
    if is_runs and sum(r[1] for r in raw) == count:
        w = expand_weights(raw)
    elif shape is not None and len(raw) == shape[0] and all(
            isinstance(r, list) and len(r) == shape[1] and all(_is_num(v) for v in r)
            for r in raw):
        w = np.array(raw, dtype=float).ravel()
    elif all(_is_num(v) for v in raw):
        w = np.array(raw, dtype=float)
    elif is_runs:
        w = expand_weights(raw)
    else:
        ctx.fail("weights", "weights must be (value, frequency) runs, a grid or a flat list")
    if w.size != count:
        ctx.fail("weights", "weight/pole count mismatch")
    return w


def _wrap(ctx: _Ctx, build):
    try:
        return build()
    except StructuralError as exc:
        ctx.fail(exc.field, str(exc))


def _knots(obj, kkey, mkey, ctx):
    knots = _reals(obj, kkey, ctx)
    mults = _ints(obj, mkey, ctx)
    try:
        return KnotVector(knots, mults)
    except StructuralError as exc:
        ctx.fail(kkey if exc.field == "knots" else mkey, str(exc))


def _warn_unknown(obj: dict, kind: str, ctx: _Ctx):
    extra = sorted(set(obj) - set(_KEYS[kind]))
    if extra:
        log.warning("face %s: ignoring unknown keys %s", ctx.face, ", ".join(extra))


def _nurbs_face(obj: dict, ctx: _Ctx) -> NurbsSurface:
    _warn_unknown(obj, "nurbs", ctx)
    u_degree = _int(obj, "u_degree", ctx)
    v_degree = _int(obj, "v_degree", ctx)
    u_kv = _knots(obj, "u_knots", "u_mults", ctx)
    v_kv = _knots(obj, "v_knots", "v_mults", ctx)
    poles = _pole_grid(obj, "poles", ctx)
    shape = (len(poles), len(poles[0]))
    weights = _weights(obj, ctx, shape[0] * shape[1], shape)
    u_periodic = _bool(obj, "u_periodic", ctx)
    v_periodic = _bool(obj, "v_periodic", ctx)
    return _wrap(ctx, lambda: NurbsSurface(poles, weights, u_kv, v_kv, u_degree, v_degree,
                                           u_periodic, v_periodic))


def _curve(obj, ctx: _Ctx):
    if not isinstance(obj, dict):
        ctx.fail("", "curve must be a JSON object")
    kind = obj.get("type")
    if kind not in CURVE_KINDS:
        ctx.fail("type", f"unknown curve type {kind!r}")
    _warn_unknown(obj, kind, ctx)
    if kind == "line":
        start = _point3(_get(obj, "start", ctx), "start", ctx)
        end = _point3(_get(obj, "end", ctx), "end", ctx)
        return _wrap(ctx, lambda: LineSegment(start, end))
    if kind in ("circle", "ellipse"):
        center = _point3(_get(obj, "center", ctx), "center", ctx)
        normal = _point3(_get(obj, "normal", ctx), "normal", ctx)
        first = _real(obj, "first", ctx, required=False, default=0.0)
        last = _real(obj, "last", ctx, required=False, default=2 * math.pi)
        if kind == "circle":
            radius = _real(obj, "radius", ctx)
            return _wrap(ctx, lambda: CircleArc(center, normal, radius, first, last))
        a = _real(obj, "major_radius", ctx)
        b = _real(obj, "minor_radius", ctx)
        return _wrap(ctx, lambda: EllipseArc(center, normal, a, b, first, last))
    if kind == "bezier":
        degree = _int(obj, "degree", ctx)
        poles = _points(obj, "poles", ctx)
        first = _real(obj, "first", ctx, required=False, default=0.0)
        last = _real(obj, "last", ctx, required=False, default=1.0)
        return _wrap(ctx, lambda: BezierCurve(poles, degree, first, last))
    degree = _int(obj, "degree", ctx)
    kv = _knots(obj, "knots", "mults", ctx)
    poles = _points(obj, "poles", ctx)
    weights = _weights(obj, ctx, len(poles))
    periodic = _bool(obj, "is_periodic", ctx)
    first = _real(obj, "first", ctx, required=False, default=None)
    last = _real(obj, "last", ctx, required=False, default=None)
    return _wrap(ctx, lambda: NurbsCurve(poles, weights, degree, kv, periodic, first, last))


def _primitive_face(obj: dict, ctx: _Ctx) -> PrimitiveFace:
    if obj.get("type") in CURVE_KINDS:
        curve = _curve(obj, ctx)
        return _wrap(ctx, lambda: PrimitiveFace(((curve,),)))
    _warn_unknown(obj, "primitive", ctx)
    loops = _get(obj, "loops", ctx)
    if not isinstance(loops, list) or not loops or not all(
            isinstance(lp, list) and lp for lp in loops):
        ctx.fail("loops", "expected a non-empty list of non-empty curve lists")
    parsed = [[_curve(c, _Ctx(ctx.face, f"loops[{i}][{j}]")) for j, c in enumerate(lp)]
              for i, lp in enumerate(loops)]
    return _wrap(ctx, lambda: PrimitiveFace(parsed))


def _face(obj, index: int) -> FaceRecord:
    ctx = _Ctx(index)
    if not isinstance(obj, dict):
        ctx.fail("", "face must be a JSON object")
    kind = obj.get("type")
    if kind == "nurbs":
        return FaceRecord("nurbs", _nurbs_face(obj, ctx))
    if kind == "primitive" or kind in CURVE_KINDS:
        return FaceRecord("primitive", _primitive_face(obj, ctx))
    ctx.fail("type", f"unknown face type {kind!r}")


def _load(text) -> Any:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentError(f"input is not UTF-8: {exc}") from exc

    def reject_constant(c):
        raise DocumentError(f"non-finite number {c} is not allowed")

    try:
        return json.loads(text, parse_constant=reject_constant)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"JSON syntax error: {exc}") from exc


def _document(obj) -> SolidDocument:
    if not isinstance(obj, dict):
        raise DocumentError("document must be a JSON object")
    extra = sorted(set(obj) - {"name", "faces"})
    if extra:
        log.warning("ignoring unknown document keys %s", ", ".join(extra))
    name = obj.get("name")
    if name is not None and not isinstance(name, str):
        raise DocumentError("name must be a string", None, "name")
    faces = obj.get("faces")
    if not isinstance(faces, list):
        raise DocumentError("missing or invalid 'faces' list", None, "faces")
    if not faces:
        raise DocumentError("document must contain at least one face", None, "faces")
    return SolidDocument(tuple(_face(f, i) for i, f in enumerate(faces)), name)


def parse_document(text) -> SolidDocument:
    """Parse and validate a CAD JSON document (``str`` or UTF-8 ``bytes``).

    Raises :class:`DocumentError` carrying the face index and field path of
    the first problem found.
    """
    return _document(_load(text))


# ----------------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------------

class _Fixed(float):
    """Float emitted with exactly six decimals."""


def _runs(weights) -> list:
    return [[_Fixed(v), f] for v, f in compress_weights(weights)]


def _curve_tree(c) -> dict:
    if isinstance(c, LineSegment):
        return {"type": "line", "start": c.start.tolist(), "end": c.end.tolist()}
    if isinstance(c, CircleArc):
        return {"type": "circle", "center": c.center.tolist(), "normal": c.normal.tolist(),
                "radius": c.radius, "first": c.first, "last": c.last}
    if isinstance(c, EllipseArc):
        return {"type": "ellipse", "center": c.center.tolist(), "normal": c.normal.tolist(),
                "major_radius": c.major_radius, "minor_radius": c.minor_radius,
                "first": c.first, "last": c.last}
    if isinstance(c, BezierCurve):
        return {"type": "bezier", "degree": c.degree, "poles": c.poles.tolist(),
                "first": c.first, "last": c.last}
    if isinstance(c, NurbsCurve):
        return {"type": "bspline", "degree": c.degree, "is_periodic": c.is_periodic,
                "knots": c.knot_vector.knots.tolist(), "mults": c.knot_vector.mults.tolist(),
                "poles": c.poles.tolist(), "weights": _runs(c.weights),
                "first": c.first, "last": c.last}
    raise TypeError(f"unsupported curve {type(c).__name__}")


def _face_tree(face: FaceRecord) -> dict:
    p = face.payload
    if isinstance(p, NurbsSurface):
        return {"type": "nurbs", "u_degree": p.u_degree, "v_degree": p.v_degree,
                "u_periodic": p.u_periodic, "v_periodic": p.v_periodic,
                "u_knots": p.u_knots.knots.tolist(), "u_mults": p.u_knots.mults.tolist(),
                "v_knots": p.v_knots.knots.tolist(), "v_mults": p.v_knots.mults.tolist(),
                "poles": [[[_Fixed(x) for x in pt] for pt in row] for row in p.poles.tolist()],
                "weights": _runs(p.weights)}
    return {"type": "primitive",
            "loops": [[_curve_tree(c) for c in loop] for loop in p.loops]}


def _dump(x) -> str:
    if isinstance(x, _Fixed):
        return _fixed(float(x))
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("cannot serialize non-finite number")
        return repr(x)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_dump(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ",".join(_dump(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def serialize_document(doc: SolidDocument) -> bytes:
    """Canonical UTF-8 bytes of a document (see module docstring for the rules)."""
    head = "{" + (f'"name":{json.dumps(doc.name, ensure_ascii=False)},' if doc.name is not None
                  else "") + '"faces":[\n'
    body = ",\n".join(_dump(_face_tree(f)) for f in doc.faces)
    return (head + body + "\n]}\n").encode("utf-8")


# ----------------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------------

def check_document(doc_or_text, chord_tolerance: float = 1e-3):
    """``(document, mesh, violations)``; document and mesh are ``None`` where unavailable."""
    from .mesh import tessellate_document

    if isinstance(doc_or_text, SolidDocument):
        doc = doc_or_text
    else:
        try:
            doc = parse_document(doc_or_text)
        except DocumentError as exc:
            return None, None, [Violation(exc.face, exc.path, exc.message)]
        except (HybridCadError, ValueError, TypeError) as exc:
            return None, None, [Violation(None, "", f"unreadable document: {exc}")]
    try:
        mesh = tessellate_document(doc, chord_tolerance)
    except TessellationError as exc:
        return doc, None, [Violation(i, "", f"tessellation failure: {exc.reasons.get(i, exc)}")
                           for i in (exc.faces or [None])]
    except HybridCadError as exc:
        return doc, None, [Violation(None, "", f"tessellation failure: {exc}")]
    return doc, mesh, []


def validate_document(doc_or_text, chord_tolerance: float = 1e-3) -> list[Violation]:
    """All problems preventing a document from becoming valid geometry; empty means valid.

    Checks JSON syntax, schema and structural invariants, then meshes every
    face and reports any that do not produce finite, non-empty geometry.
    Never raises for bad input.
    """
    return check_document(doc_or_text, chord_tolerance)[2]


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def anchor_points(doc: SolidDocument) -> np.ndarray:
    """Points whose bounding box encloses the document geometry."""
    pts = []
    for face in doc.faces:
        p = face.payload
        if isinstance(p, NurbsSurface):
            pts.append(p.poles.reshape(-1, 3))
            continue
        for loop in p.loops:
            for c in loop:
                if isinstance(c, LineSegment):
                    pts.append(np.array([c.start, c.end]))
                elif isinstance(c, (CircleArc, EllipseArc)):
                    r = c.radius if isinstance(c, CircleArc) else c.major_radius
                    pts.append(c.center + np.array([[r, r, r], [-r, -r, -r]]))
                elif isinstance(c, BezierCurve):
                    pts.append(c.poles)
                else:
                    pts.append(c.poles)
    return np.vstack(pts) if pts else np.zeros((0, 3))


def _tree_diff(a, b, path: str, out: list):
    if isinstance(a, dict) and isinstance(b, dict):
        for k in list(a) + [k for k in b if k not in a]:
            sub = f"{path}.{k}" if path else k
            if k not in b:
                out.append(f"{sub}: removed")
            elif k not in a:
                out.append(f"{sub}: added {json.dumps(b[k])[:80]}")
            else:
                _tree_diff(a[k], b[k], sub, out)
        return
    if isinstance(a, list) and isinstance(b, list):
        if len(a) == len(b):
            for i, (x, y) in enumerate(zip(a, b)):
                _tree_diff(x, y, f"{path}[{i}]", out)
            return
        out.append(f"{path}: {json.dumps(a)[:60]} -> {json.dumps(b)[:60]}")
        return
    if type(a) is not type(b) and not (_is_num(a) and _is_num(b)):
        out.append(f"{path}: {json.dumps(a)[:60]} -> {json.dumps(b)[:60]}")
    elif a != b:
        out.append(f"{path}: {json.dumps(a)} -> {json.dumps(b)}")


def roundtrip(text) -> tuple[bytes, list[str]]:
    """Canonical bytes of ``text`` and the field paths changed by canonicalization.

    Weight arrays rewritten as runs are reported once, as
    ``faces[i].weights: compressed``.
    """
    raw = _load(text)
    doc = _document(raw)
    canonical = serialize_document(doc)
    new = json.loads(canonical)
    changes: list[str] = []
    raw_faces = raw.get("faces", [])
    for i, (fa, fb) in enumerate(zip(raw_faces, new["faces"])):
        fa = dict(fa)
        if fa.get("type") in CURVE_KINDS:
            fa = {"type": "primitive", "loops": [[fa]]}
            changes.append(f"faces[{i}]: single-curve face wrapped as primitive loop")
        diffs: list[str] = []
        _tree_diff(fa, fb, f"faces[{i}]", diffs)
        for d in diffs:
            if ".weights" in d:
                key = d.split(".weights")[0] + ".weights: canonicalized"
                if key not in changes:
                    changes.append(key)
            else:
                changes.append(d)
    if raw.get("name") != new.get("name"):
        changes.append("name: changed")
    return canonical, changes
