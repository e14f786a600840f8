"""
Rational B-spline curves and surfaces.

Basis functions follow the Cox-de Boor recursion, evaluated with the local
triangular scheme over the span containing the parameter (only ``p + 1``
values are non-zero), then scattered into a full-length vector.  Rational
points are evaluated in homogeneous coordinates ``(w*x, w*y, w*z, w)``.

Periodic curves and surfaces are never evaluated directly: ``unperiodize``
unrolls the knot vector, wraps the poles and clamps both ends by knot
insertion, and every evaluation goes through that clamped form.

Periodic convention: with distinct knots ``k_0 .. k_m`` and multiplicities
``m_0 .. m_m`` (``m_0 == m_m``), the pole count is ``sum(mults) - m_0``.  Pole 0
owns the first basis function active at the start of the period, exactly as
for a clamped curve, so a start knot of multiplicity ``p`` interpolates pole 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, EvaluationError, StructuralError

__all__ = [
    "KnotVector",
    "NurbsCurve",
    "NurbsSurface",
    "basis_functions",
    "basis_matrix",
    "curve_point",
    "curve_points",
    "curve_derivative",
    "surface_point",
    "surface_grid",
    "unperiodize",
]


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Knot vector in distinct form: strictly increasing ``knots`` with ``mults``."""

    knots: np.ndarray
    mults: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        raw_mults = np.asarray(self.mults).ravel()
        if knots.size == 0:
            raise StructuralError("knot vector is empty", "knots")
        if raw_mults.size != knots.size:
            raise StructuralError(
                f"{knots.size} knots but {raw_mults.size} multiplicities", "mults")
        if not np.all(np.isfinite(knots)):
            raise StructuralError("knots must be finite", "knots")
        if np.any(np.diff(knots) <= 0):
            raise StructuralError("knots must be strictly increasing", "knots")
        if raw_mults.dtype.kind not in "iu" and not np.all(raw_mults == np.round(raw_mults)):
            raise StructuralError("multiplicities must be integers", "mults")
        mults = raw_mults.astype(np.int64)
        if np.any(mults < 1):
            raise StructuralError("multiplicities must be >= 1", "mults")
        object.__setattr__(self, "knots", _frozen(knots))
        object.__setattr__(self, "mults", _frozen(mults, np.int64))

    @classmethod
    def from_expanded(cls, flat: Sequence[float]) -> "KnotVector":
        flat = np.asarray(flat, dtype=float)
        if np.any(np.diff(flat) < 0):
            raise StructuralError("expanded knot vector must be non-decreasing", "knots")
        knots, mults = np.unique(flat, return_counts=True)
        return cls(knots, mults)

    @cached_property
    def expanded(self) -> np.ndarray:
        return _frozen(np.repeat(self.knots, self.mults))

    def __len__(self):
        return int(self.mults.sum())

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return (np.array_equal(self.knots, other.knots)
                and np.array_equal(self.mults, other.mults))

    def __repr__(self):
        return f"KnotVector(knots={self.knots.tolist()}, mults={self.mults.tolist()})"


def _pole_count(kv: KnotVector, degree: int, periodic: bool) -> int:
    if periodic:
        return len(kv) - int(kv.mults[0])
    return len(kv) - degree - 1


def _check_periodic(kv: KnotVector, where: str):
    if kv.knots.size < 2:
        raise StructuralError("periodic knot vector needs at least two distinct knots", where)
    if kv.mults[0] != kv.mults[-1]:
        raise StructuralError(
            "periodic knot vector must have equal first and last multiplicity", where)


def _check_degree(degree, where: str) -> int:
    if isinstance(degree, bool) or int(degree) != degree or degree < 1:
        raise StructuralError(f"degree must be a positive integer, got {degree!r}", where)
    return int(degree)


def _check_weights(weights: np.ndarray, where: str):
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise StructuralError("weights must be finite and > 0", where)


def _domain(flat: np.ndarray, degree: int, npoles: int) -> tuple[float, float]:
    return float(flat[degree]), float(flat[npoles])


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    """Rational B-spline curve.

    ``first`` and ``last`` default to the full valid domain ``[u_p, u_{n+1}]``
    (``[k_0, k_m]`` for periodic curves).
    """

    poles: np.ndarray
    weights: np.ndarray | None
    degree: int
    knot_vector: KnotVector
    is_periodic: bool = False
    first: float | None = None
    last: float | None = None

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=float)
        if poles.ndim != 2 or poles.shape[1] != 3 or poles.shape[0] < 1:
            raise StructuralError("poles must be a non-empty list of 3D points", "poles")
        if not np.all(np.isfinite(poles)):
            raise StructuralError("poles must be finite", "poles")
        degree = _check_degree(self.degree, "degree")
        kv = self.knot_vector
        if not isinstance(kv, KnotVector):
            raise StructuralError("knot_vector must be a KnotVector", "knots")
        periodic = bool(self.is_periodic)
        if periodic:
            _check_periodic(kv, "mults")
        expected = _pole_count(kv, degree, periodic)
        if poles.shape[0] != expected:
            raise StructuralError(
                f"pole count {poles.shape[0]} does not match knots/degree (expected {expected})",
                "poles")
        if self.weights is None:
            weights = np.ones(poles.shape[0])
        else:
            weights = np.asarray(self.weights, dtype=float).ravel()
            if weights.size != poles.shape[0]:
                raise StructuralError("weight/pole count mismatch", "weights")
        _check_weights(weights, "weights")

        if periodic:
            lo, hi = float(kv.knots[0]), float(kv.knots[-1])
        else:
            lo, hi = _domain(kv.expanded, degree, poles.shape[0])
        first = lo if self.first is None else float(self.first)
        last = hi if self.last is None else float(self.last)
        if not (lo <= first <= last <= hi):
            raise StructuralError(
                f"[first, last] = [{first}, {last}] outside valid domain [{lo}, {hi}]", "first")
        object.__setattr__(self, "poles", _frozen(poles))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "is_periodic", periodic)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "last", last)

    @property
    def domain(self) -> tuple[float, float]:
        return self.first, self.last

    @cached_property
    def clamped(self) -> "NurbsCurve":
        return unperiodize(self) if self.is_periodic else self

    @cached_property
    def _homogeneous(self) -> np.ndarray:
        return np.hstack([self.poles * self.weights[:, None], self.weights[:, None]])

    def __eq__(self, other):
        if not isinstance(other, NurbsCurve):
            return NotImplemented
        return (self.degree == other.degree and self.is_periodic == other.is_periodic
                and self.first == other.first and self.last == other.last
                and self.knot_vector == other.knot_vector
                and np.array_equal(self.poles, other.poles)
                and np.array_equal(self.weights, other.weights))


@dataclass(frozen=True, eq=False)
class NurbsSurface:
    """Tensor-product rational B-spline surface over an ``(n+1) x (m+1)`` pole grid."""

    poles: np.ndarray
    weights: np.ndarray | None
    u_knots: KnotVector
    v_knots: KnotVector
    u_degree: int
    v_degree: int
    u_periodic: bool = False
    v_periodic: bool = False

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=float)
        if poles.ndim != 3 or poles.shape[2] != 3 or poles.shape[0] < 1 or poles.shape[1] < 1:
            raise StructuralError("poles must be a 2D grid of 3D points", "poles")
        if not np.all(np.isfinite(poles)):
            raise StructuralError("poles must be finite", "poles")
        u_degree = _check_degree(self.u_degree, "u_degree")
        v_degree = _check_degree(self.v_degree, "v_degree")
        for d, kv, periodic, deg, n in (
                ("u", self.u_knots, self.u_periodic, u_degree, poles.shape[0]),
                ("v", self.v_knots, self.v_periodic, v_degree, poles.shape[1])):
            if not isinstance(kv, KnotVector):
                raise StructuralError(f"{d}_knots must be a KnotVector", f"{d}_knots")
            if periodic:
                _check_periodic(kv, f"{d}_mults")
            expected = _pole_count(kv, deg, bool(periodic))
            if n != expected:
                raise StructuralError(
                    f"{n} poles in {d} do not match {d}_knots/{d}_mults/{d}_degree "
                    f"(expected {expected})", "poles")
        if self.weights is None:
            weights = np.ones(poles.shape[:2])
        else:
            weights = np.asarray(self.weights, dtype=float)
            if weights.size != poles.shape[0] * poles.shape[1]:
                raise StructuralError("weight/pole count mismatch", "weights")
            weights = weights.reshape(poles.shape[:2])
        _check_weights(weights, "weights")
        object.__setattr__(self, "poles", _frozen(poles))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "u_degree", u_degree)
        object.__setattr__(self, "v_degree", v_degree)
        object.__setattr__(self, "u_periodic", bool(self.u_periodic))
        object.__setattr__(self, "v_periodic", bool(self.v_periodic))

    @property
    def shape(self) -> tuple[int, int]:
        return self.poles.shape[0], self.poles.shape[1]

    @property
    def is_periodic(self) -> bool:
        return self.u_periodic or self.v_periodic

    @cached_property
    def clamped(self) -> "NurbsSurface":
        return unperiodize(self) if self.is_periodic else self

    @property
    def u_domain(self) -> tuple[float, float]:
        s = self.clamped
        return _domain(s.u_knots.expanded, s.u_degree, s.shape[0])

    @property
    def v_domain(self) -> tuple[float, float]:
        s = self.clamped
        return _domain(s.v_knots.expanded, s.v_degree, s.shape[1])

    @cached_property
    def _homogeneous(self) -> np.ndarray:
        w = self.weights[..., None]
        return np.concatenate([self.poles * w, w], axis=2)

    def __eq__(self, other):
        if not isinstance(other, NurbsSurface):
            return NotImplemented
        return (self.u_degree == other.u_degree and self.v_degree == other.v_degree
                and self.u_periodic == other.u_periodic and self.v_periodic == other.v_periodic
                and self.u_knots == other.u_knots and self.v_knots == other.v_knots
                and np.array_equal(self.poles, other.poles)
                and np.array_equal(self.weights, other.weights))


# ----------------------------------------------------------------------------
# basis functions
# ----------------------------------------------------------------------------

def _find_spans(flat: np.ndarray, degree: int, npoles: int, us: np.ndarray) -> np.ndarray:
    lo, hi = flat[degree], flat[npoles]
    if np.any(us < lo) or np.any(us > hi) or not np.all(np.isfinite(us)):
        bad = us[(us < lo) | (us > hi) | ~np.isfinite(us)][0]
        raise DomainError(f"parameter {bad!r} outside domain [{lo}, {hi}]")
    spans = np.searchsorted(flat, us, side="right") - 1
    # closed right end: use the last non-empty span at or below n
    last = np.searchsorted(flat, hi, side="left") - 1
    return np.where(spans > npoles - 1, last, spans)


def _local_basis(flat: np.ndarray, degree: int, spans: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Non-zero basis values N[span-p .. span] for each parameter, shape (len(us), p+1)."""
    m = us.shape[0]
    N = np.zeros((m, degree + 1))
    N[:, 0] = 1.0
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = us - flat[spans + 1 - j]
        right[:, j] = flat[spans + j] - us
        saved = np.zeros(m)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            # 0/0 := 0 for empty spans
            temp = np.divide(N[:, r], denom, out=np.zeros(m), where=denom != 0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return N


def _valid_spans(flat, degree, npoles, spans):
    # a zero-width domain leaves no usable span; those rows evaluate to all-zero
    return (spans >= degree) & (spans < npoles) & (flat[np.clip(spans, 0, flat.size - 2) + 1]
                                                   > flat[np.clip(spans, 0, flat.size - 2)])


def basis_matrix(knot_vector: KnotVector, degree: int, us, npoles: int | None = None) -> np.ndarray:
    """Full basis matrix, shape ``(len(us), n+1)``; row ``k`` holds ``N_{i,p}(us[k])``."""
    flat = knot_vector.expanded
    if npoles is None:
        npoles = flat.size - degree - 1
    if npoles < 1:
        raise StructuralError("knot vector too short for degree", "knots")
    us = np.atleast_1d(np.asarray(us, dtype=float))
    spans = _find_spans(flat, degree, npoles, us)
    ok = _valid_spans(flat, degree, npoles, spans)
    out = np.zeros((us.size, npoles))
    if np.any(ok):
        local = _local_basis(flat, degree, spans[ok], us[ok])
        cols = spans[ok, None] - degree + np.arange(degree + 1)
        out[np.nonzero(ok)[0][:, None], cols] = local
    return out


def basis_functions(knot_vector: KnotVector, degree: int, u: float) -> np.ndarray:
    """All basis values ``N_{i,p}(u)`` for a single parameter."""
    return basis_matrix(knot_vector, degree, [u])[0]


def _basis_derivative_matrix(flat: np.ndarray, degree: int, npoles: int, us: np.ndarray):
    spans = _find_spans(flat, degree, npoles, us)
    ok = _valid_spans(flat, degree, npoles, spans)
    if not np.all(ok):
        raise EvaluationError("zero-width parameter domain")
    p = degree
    lower = _local_basis(flat, p - 1, spans, us)  # N[span-p+1 .. span, p-1]
    m = us.size
    d = np.zeros((m, p + 1))
    for k in range(p + 1):
        i = spans - p + k
        if k >= 1:
            den = flat[i + p] - flat[i]
            d[:, k] += np.divide(lower[:, k - 1], den, out=np.zeros(m), where=den != 0)
        if k <= p - 1:
            den = flat[i + p + 1] - flat[i + 1]
            d[:, k] -= np.divide(lower[:, k], den, out=np.zeros(m), where=den != 0)
    d *= p
    value = _local_basis(flat, p, spans, us)
    out_v = np.zeros((m, npoles))
    out_d = np.zeros((m, npoles))
    cols = spans[:, None] - p + np.arange(p + 1)
    rows = np.arange(m)[:, None]
    out_v[rows, cols] = value
    out_d[rows, cols] = d
    return out_v, out_d


# ----------------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------------

def _project(hw: np.ndarray) -> np.ndarray:
    w = hw[..., 3]
    if not np.all(np.isfinite(hw)) or np.any(w <= 0):
        raise EvaluationError("rational denominator is zero or non-finite")
    return hw[..., :3] / w[..., None]


def _check_range(us: np.ndarray, lo: float, hi: float):
    if not np.all(np.isfinite(us)) or np.any(us < lo) or np.any(us > hi):
        raise DomainError(f"parameter outside [{lo}, {hi}]")


def curve_points(curve: NurbsCurve, us) -> np.ndarray:
    """Evaluate the curve at many parameters, shape ``(len(us), 3)``."""
    us = np.atleast_1d(np.asarray(us, dtype=float))
    _check_range(us, curve.first, curve.last)
    c = curve.clamped
    N = basis_matrix(c.knot_vector, c.degree, us, c.poles.shape[0])
    return _project(N @ c._homogeneous)


def curve_point(curve: NurbsCurve, u: float) -> np.ndarray:
    return curve_points(curve, [u])[0]


def curve_derivative(curve: NurbsCurve, u: float, order: int = 1) -> np.ndarray:
    """First derivative ``dC/du`` of the rational curve."""
    if order != 1:
        raise NotImplementedError("only first derivatives are supported")
    us = np.array([u], dtype=float)
    _check_range(us, curve.first, curve.last)
    c = curve.clamped
    N, dN = _basis_derivative_matrix(c.knot_vector.expanded, c.degree, c.poles.shape[0], us)
    A = N @ c._homogeneous
    dA = dN @ c._homogeneous
    w = A[0, 3]
    if not np.isfinite(w) or w <= 0:
        raise EvaluationError("rational denominator is zero or non-finite")
    point = A[0, :3] / w
    return (dA[0, :3] - dA[0, 3] * point) / w


def surface_grid(surface: NurbsSurface, us, vs) -> np.ndarray:
    """Evaluate on the tensor grid ``us x vs``, shape ``(len(us), len(vs), 3)``."""
    s = surface.clamped
    us = np.atleast_1d(np.asarray(us, dtype=float))
    vs = np.atleast_1d(np.asarray(vs, dtype=float))
    Nu = basis_matrix(s.u_knots, s.u_degree, us, s.shape[0])
    Nv = basis_matrix(s.v_knots, s.v_degree, vs, s.shape[1])
    hw = np.einsum("ai,ijk,bj->abk", Nu, s._homogeneous, Nv)
    return _project(hw)


def surface_point(surface: NurbsSurface, u: float, v: float) -> np.ndarray:
    return surface_grid(surface, [u], [v])[0, 0]


# ----------------------------------------------------------------------------
# periodic -> clamped
# ----------------------------------------------------------------------------

def _unroll(kv: KnotVector, degree: int, Pw: np.ndarray):
    """Unclamped knots/poles equivalent to a periodic definition (poles along axis 0)."""
    period = kv.knots[-1] - kv.knots[0]
    t = np.repeat(kv.knots[:-1], kv.mults[:-1])
    L = t.size
    if Pw.shape[0] != L:
        raise StructuralError(f"periodic pole count {Pw.shape[0]} != {L}", "poles")
    idx = np.arange(-degree, L + degree + 1)
    tau = t[idx % L] + np.floor_divide(idx, L) * period
    Q = Pw[(np.arange(L + degree) - int(kv.mults[0]) + 1) % L]
    return tau, Q


def _insert_knot(U: np.ndarray, P: np.ndarray, p: int, u: float):
    """Single Boehm knot insertion on homogeneous poles along axis 0."""
    k = int(np.searchsorted(U, u, side="right") - 1)
    s = int(np.count_nonzero(U == u))
    n1 = P.shape[0]
    Q = np.empty((n1 + 1,) + P.shape[1:])
    Q[:k - p + 1] = P[:k - p + 1]
    Q[k - s + 1:] = P[k - s:]
    for i in range(k - p + 1, k - s + 1):
        alpha = (u - U[i]) / (U[i + p] - U[i])
        Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1]
    return np.insert(U, k + 1, u), Q


def _clamp(U: np.ndarray, P: np.ndarray, p: int, a: float, b: float):
    """Restrict an unclamped spline to [a, b] as a clamped spline."""
    while np.count_nonzero(U == a) < p:
        U, P = _insert_knot(U, P, p, a)
    k = int(np.nonzero(U == a)[0][-1])
    U = np.concatenate([[a], U[k - p + 1:]])
    P = P[k - p:]
    while np.count_nonzero(U == b) < p:
        U, P = _insert_knot(U, P, p, b)
    k = int(np.nonzero(U == b)[0][0])
    U = np.concatenate([U[:k], np.full(p + 1, b)])
    P = P[:k]
    return U, P


def _clamp_periodic(kv: KnotVector, degree: int, Pw: np.ndarray):
    try:
        tau, Q = _unroll(kv, degree, Pw)
        U, P = _clamp(tau, Q, degree, float(kv.knots[0]), float(kv.knots[-1]))
    except IndexError as exc:  # pragma: no cover - guarded by the pole-count checks
        raise StructuralError(f"malformed periodic knot structure: {exc}", "knots") from exc
    return KnotVector.from_expanded(U), P


def unperiodize(geom):
    """Equivalent clamped, non-periodic form of a curve or surface.

    Non-periodic input is returned unchanged.
    """
    if isinstance(geom, NurbsCurve):
        if not geom.is_periodic:
            return geom
        kv, Pw = _clamp_periodic(geom.knot_vector, geom.degree, geom._homogeneous)
        w = Pw[:, 3]
        return NurbsCurve(Pw[:, :3] / w[:, None], w, geom.degree, kv, False,
                          geom.first, geom.last)
    if isinstance(geom, NurbsSurface):
        if not geom.is_periodic:
            return geom
        Pw = geom._homogeneous
        u_kv, v_kv = geom.u_knots, geom.v_knots
        if geom.u_periodic:
            u_kv, Pw = _clamp_periodic(u_kv, geom.u_degree, Pw)
        if geom.v_periodic:
            v_kv, Pt = _clamp_periodic(v_kv, geom.v_degree, np.swapaxes(Pw, 0, 1))
            Pw = np.swapaxes(Pt, 0, 1)
        w = Pw[..., 3]
        return NurbsSurface(Pw[..., :3] / w[..., None], w, u_kv, v_kv,
                            geom.u_degree, geom.v_degree, False, False)
    raise TypeError(f"cannot unperiodize {type(geom).__name__}")
