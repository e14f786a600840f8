import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from strategies import curves, domain_samples, knot_vectors, random_clamped, random_curve
from hybridcad.errors import DomainError, StructuralError
from hybridcad.nurbs import (KnotVector, NurbsCurve, NurbsSurface, basis_functions, basis_matrix,
                             curve_derivative, curve_point, curve_points, surface_grid,
                             surface_point, unperiodize)
from hybridcad.primitives import CircleArc

R2 = math.sqrt(2) / 2
QUARTER = NurbsCurve([[1, 0, 0], [1, 1, 0], [0, 1, 0]], [1, R2, 1], 2, KnotVector([0, 1], [3, 3]))
LINE = NurbsCurve([[0, 0, 0], [2, 0, 0]], [1, 1], 1, KnotVector([0, 1], [2, 2]))


# --- knot vectors -------------------------------------------------------------

def test_knot_vector_expanded_and_back():
    kv = KnotVector([0, 0.5, 1], [3, 1, 3])
    assert kv.expanded.tolist() == [0, 0, 0, 0.5, 1, 1, 1]
    assert len(kv) == 7
    assert KnotVector.from_expanded(kv.expanded) == kv


@pytest.mark.parametrize("knots,mults", [([0, 1, 0.5], [1, 1, 1]), ([0, 0, 1], [1, 1, 1]),
                                         ([0, 1], [0, 2]), ([0, 1], [1]), ([0, float("nan")], [1, 1])])
def test_knot_vector_rejects_bad_input(knots, mults):
    with pytest.raises(StructuralError):
        KnotVector(knots, mults)


# --- basis --------------------------------------------------------------------

def test_degree_zero_indicator():
    assert basis_functions(KnotVector([0, 1], [1, 1]), 0, 0.5).tolist() == [1.0]


def test_quadratic_bernstein_midpoint():
    kv = KnotVector([0, 1], [3, 3])
    assert basis_functions(kv, 2, 0.5).tolist() == [0.25, 0.5, 0.25]
    U = oracles.expand([0, 1], [3, 3])
    assert oracles.basis_row(U, 2, 0.5) == [0.25, 0.5, 0.25]


def test_basis_outside_domain_raises():
    kv = KnotVector([0, 1], [3, 3])
    for u in (-1e-9, 1 + 1e-9, float("nan")):
        with pytest.raises(DomainError):
            basis_functions(kv, 2, u)


def test_repeated_interior_knot_uses_zero_over_zero_convention():
    kv = KnotVector([0, 0.5, 1], [3, 2, 3])
    for u in (0.0, 0.25, 0.5, 0.75, 1.0):
        got = basis_functions(kv, 2, u)
        assert np.all(np.isfinite(got))
        assert math.isclose(got.sum(), 1.0, abs_tol=1e-15)


def test_basis_matches_recursive_oracle_seeded():
    rng = np.random.default_rng(11)
    for _ in range(40):
        kv, p, n = random_clamped(rng)
        U = list(kv.expanded)
        us = domain_samples(kv, p, n, rng, 20)
        fast = basis_matrix(kv, p, us)
        slow = np.array([oracles.basis_row(U, p, u) for u in us])
        np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-13)


@given(knot_vectors(), st.integers(0, 2 ** 32 - 1))
def test_partition_of_unity_and_support(kvp, seed):
    kv, p, n = kvp
    U = kv.expanded
    us = domain_samples(kv, p, n, np.random.default_rng(seed), 30)
    N = basis_matrix(kv, p, us)
    assert np.all(N >= 0)
    np.testing.assert_allclose(N.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    for row, u in zip(N, us):
        for i in range(n):
            if u < U[i] or u > U[i + p + 1]:
                assert row[i] == 0.0


# --- curves -------------------------------------------------------------------

def test_line_midpoint_and_derivative():
    assert curve_point(LINE, 0.5).tolist() == [1.0, 0.0, 0.0]
    for u in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(curve_derivative(LINE, u), [2, 0, 0], atol=1e-15)


def test_quarter_circle():
    mid = curve_point(QUARTER, 0.5)
    np.testing.assert_allclose(mid, [R2, R2, 0], atol=1e-15)
    assert abs(np.linalg.norm(mid) - 1) < 1e-15
    assert curve_point(QUARTER, 0.0).tolist() == [1.0, 0.0, 0.0]
    tangent = curve_derivative(QUARTER, 0.5)
    assert abs(np.dot(tangent, mid)) < 1e-9


def test_curve_range_enforced():
    trimmed = NurbsCurve(QUARTER.poles, QUARTER.weights, 2, QUARTER.knot_vector, False, 0.2, 0.8)
    with pytest.raises(DomainError):
        curve_point(trimmed, 0.1)
    with pytest.raises(StructuralError):
        NurbsCurve(QUARTER.poles, QUARTER.weights, 2, QUARTER.knot_vector, False, -0.1, 0.8)


@pytest.mark.parametrize("kwargs,field", [
    ({"weights": [1, 0, 1]}, "weights"),
    ({"weights": [1, 1]}, "weights"),
    ({"degree": 0}, "degree"),
    ({"degree": 3}, "poles"),
])
def test_curve_invariants(kwargs, field):
    args = {"poles": QUARTER.poles, "weights": [1, R2, 1], "degree": 2,
            "knot_vector": QUARTER.knot_vector}
    args.update(kwargs)
    with pytest.raises(StructuralError) as info:
        NurbsCurve(**args)
    assert info.value.field == field


def test_rational_points_match_oracle_seeded():
    rng = np.random.default_rng(5)
    for _ in range(30):
        c = random_curve(rng)
        U = list(c.knot_vector.expanded)
        us = domain_samples(c.knot_vector, c.degree, len(c.poles), rng, 10)
        got = curve_points(c, us)
        want = [oracles.rational_point(U, c.degree, c.poles.tolist(), c.weights.tolist(), u)
                for u in us]
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


@given(curves(), st.floats(0.1, 10.0))
def test_weight_scaling_invariance(curve, lam):
    scaled = NurbsCurve(curve.poles, curve.weights * lam, curve.degree, curve.knot_vector)
    us = np.linspace(curve.first, curve.last, 25)
    np.testing.assert_allclose(curve_points(scaled, us), curve_points(curve, us),
                               rtol=0, atol=1e-12 * (1 + np.abs(curve.poles).max()))


@given(curves())
def test_clamped_endpoints(curve):
    np.testing.assert_allclose(curve_point(curve, curve.first), curve.poles[0], rtol=0, atol=1e-12)
    np.testing.assert_allclose(curve_point(curve, curve.last), curve.poles[-1], rtol=0, atol=1e-12)


@given(curves(), st.floats(0.02, 0.98))
def test_derivative_matches_finite_difference(curve, frac):
    lo, hi = curve.first, curve.last
    u = lo + frac * (hi - lo)
    # keep the stencil inside one polynomial piece
    h = 1e-6
    if np.min(np.abs(curve.knot_vector.knots - u)) < 2 * h:
        u += 4 * h
    d = curve_derivative(curve, u)
    fd = oracles.central_difference(lambda t: curve_point(curve, t), u, h)
    assert np.linalg.norm(d - fd) <= 1e-5 * max(1.0, np.linalg.norm(d))


def test_derivative_order_two_not_supported():
    with pytest.raises(NotImplementedError):
        curve_derivative(LINE, 0.5, order=2)


# --- surfaces -----------------------------------------------------------------

def unit_patch():
    return NurbsSurface([[[0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]]], None,
                        KnotVector([0, 1], [2, 2]), KnotVector([0, 1], [2, 2]), 1, 1)


def test_bilinear_patch_corner_and_centre():
    s = unit_patch()
    assert surface_point(s, 0, 0).tolist() == [0, 0, 0]
    assert surface_point(s, 1, 1).tolist() == [1, 1, 0]
    np.testing.assert_allclose(surface_point(s, 0.5, 0.5), [0.5, 0.5, 0], atol=1e-15)


def test_surface_domain_and_shape_checks():
    with pytest.raises(DomainError):
        surface_point(unit_patch(), 1.5, 0)
    with pytest.raises(StructuralError):
        NurbsSurface(np.zeros((2, 2, 3)), np.ones((2, 3)), KnotVector([0, 1], [2, 2]),
                     KnotVector([0, 1], [2, 2]), 1, 1)
    with pytest.raises(StructuralError):
        NurbsSurface(np.zeros((3, 2, 3)), None, KnotVector([0, 1], [2, 2]),
                     KnotVector([0, 1], [2, 2]), 1, 1)


def cylinder_surface(radius=1.0, height=2.0, periodic=False):
    circle = CircleArc([0, 0, 0], [0, 0, 1], radius).to_nurbs()
    poles = np.stack([circle.poles, circle.poles + [0, 0, height]], axis=1)
    weights = np.stack([circle.weights, circle.weights], axis=1)
    u_kv = circle.knot_vector
    if periodic:
        poles, weights = poles[:-1], weights[:-1]
        u_kv = KnotVector(u_kv.knots, [2] * len(u_kv.knots))
    return NurbsSurface(poles, weights, u_kv, KnotVector([0, 1], [2, 2]), 2, 1, periodic, False)


def test_cylinder_points_on_radius():
    s = cylinder_surface(1.5)
    lo, hi = s.u_domain
    P = surface_grid(s, np.linspace(lo, hi, 50), np.linspace(0, 1, 10))
    r = np.hypot(P[..., 0], P[..., 1])
    assert np.max(np.abs(r - 1.5)) < 1e-9


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10.0))
def test_surface_weight_scaling(seed, lam):
    rng = np.random.default_rng(seed)
    ukv, p, n = random_clamped(rng, 3, 8)
    vkv, q, m = random_clamped(rng, 3, 8)
    P = rng.uniform(-1, 1, (n, m, 3))
    W = rng.uniform(0.3, 2, (n, m))
    a = NurbsSurface(P, W, ukv, vkv, p, q)
    b = NurbsSurface(P, W * lam, ukv, vkv, p, q)
    us = np.linspace(*a.u_domain, 7)
    vs = np.linspace(*a.v_domain, 7)
    np.testing.assert_allclose(surface_grid(a, us, vs), surface_grid(b, us, vs), atol=1e-12)


# --- periodic -----------------------------------------------------------------

def test_unperiodize_identity_for_clamped():
    assert unperiodize(QUARTER) is QUARTER


def test_periodic_circle_matches_clamped_circle():
    clamped = CircleArc([0.5, -1, 2], [0, 0, 1], 2.0).to_nurbs()
    periodic = NurbsCurve(clamped.poles[:-1], clamped.weights[:-1], 2,
                          KnotVector(clamped.knot_vector.knots, [2] * 5), True)
    us = np.linspace(0, 2 * math.pi, 100)
    np.testing.assert_allclose(curve_points(periodic, us), curve_points(clamped, us),
                               rtol=0, atol=1e-10)
    assert not unperiodize(periodic).is_periodic


def test_periodic_cubic_uniform_matches_closed_form():
    # uniform periodic cubic: each span is the standard B-spline segment of 4 poles
    rng = np.random.default_rng(3)
    P = rng.uniform(-1, 1, (6, 3))
    curve = NurbsCurve(P, None, 3, KnotVector(np.arange(7.0), [1] * 7), True)
    for u in rng.uniform(0, 6, 50):
        k = int(min(math.floor(u), 5))
        t = u - k
        b = [(1 - t) ** 3 / 6, (3 * t ** 3 - 6 * t ** 2 + 4) / 6,
             (-3 * t ** 3 + 3 * t ** 2 + 3 * t + 1) / 6, t ** 3 / 6]
        idx = [(k + j) % 6 for j in range(4)]
        want = sum(bj * P[i] for bj, i in zip(b, idx))
        got = curve_point(curve, u)
        assert np.linalg.norm(got - want) < 1e-10, (u, got, want)


def test_periodic_cylinder_surface_matches_clamped():
    a = cylinder_surface(periodic=True)
    b = cylinder_surface(periodic=False)
    us = np.linspace(0, 2 * math.pi, 20)
    vs = np.linspace(0, 1, 20)
    np.testing.assert_allclose(surface_grid(a, us, vs), surface_grid(b, us, vs), atol=1e-10)


def test_periodic_bad_structure():
    with pytest.raises(StructuralError):
        NurbsCurve(np.zeros((7, 3)), None, 2, KnotVector([0, 1, 2, 3, 4], [2] * 5), True)
    with pytest.raises(StructuralError):
        NurbsCurve(np.zeros((8, 3)), None, 2, KnotVector([0, 1, 2, 3, 4], [3, 2, 2, 2, 2]), True)
