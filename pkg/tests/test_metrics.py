import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from hybridcad.cad_json import serialize_document
from hybridcad.errors import DegenerateInputError, DocumentError
from hybridcad.mesh import sample_points, tessellate_document
from hybridcad.metrics import (MetricReport, chamfer_distance, evaluate_pairs, hausdorff_distance,
                               invalidity_ratio, jsd, mmd, nearest_sq_distances,
                               occupancy_histogram)
from hybridcad.shapes import box_document, cube_document
from strategies import clouds

ORIGIN = [[0.0, 0.0, 0.0]]


# --- hand cases ---------------------------------------------------------------

def test_single_pair_chamfer_and_hausdorff():
    assert chamfer_distance(ORIGIN, [[1, 0, 0]]) == 2.0
    assert hausdorff_distance(ORIGIN, [[1, 0, 0]]) == 1.0


def test_chamfer_asymmetric_sizes():
    # A -> B: both points at sq distance 0 and 1 -> mean 0.5; B -> A: 0
    a = [[0, 0, 0], [1, 0, 0]]
    assert chamfer_distance(a, ORIGIN) == 0.5
    assert hausdorff_distance(a, ORIGIN) == 1.0


def test_empty_and_malformed_clouds():
    with pytest.raises(DegenerateInputError):
        chamfer_distance(np.zeros((0, 3)), ORIGIN)
    with pytest.raises(ValueError):
        chamfer_distance([[0, 0]], ORIGIN)
    with pytest.raises(ValueError):
        nearest_sq_distances(ORIGIN, ORIGIN, "octree")


# --- axioms -------------------------------------------------------------------

@given(clouds(), clouds())
def test_chamfer_matches_oracle_and_is_symmetric(a, b):
    cd = chamfer_distance(a, b)
    assert cd >= 0
    assert math.isclose(cd, chamfer_distance(b, a), rel_tol=1e-12, abs_tol=1e-15)
    assert math.isclose(cd, oracles.chamfer(a.tolist(), b.tolist()), rel_tol=1e-9, abs_tol=1e-15)


@given(clouds(), clouds())
def test_hausdorff_matches_oracle(a, b):
    hd = hausdorff_distance(a, b)
    assert math.isclose(hd, oracles.hausdorff(a.tolist(), b.tolist()), rel_tol=1e-9, abs_tol=1e-15)
    assert hd == hausdorff_distance(b, a)


@given(clouds())
def test_identity(a):
    assert chamfer_distance(a, a) == 0.0 and hausdorff_distance(a, a) == 0.0


@given(clouds(), clouds(), clouds())
def test_hausdorff_triangle_inequality(a, b, c):
    assert hausdorff_distance(a, c) <= hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12


@given(clouds(max_size=20), st.tuples(*[st.floats(-5, 5)] * 3))
def test_translation_invariance(a, shift):
    b = a[::-1] * 0.5
    d0 = chamfer_distance(a, b)
    d1 = chamfer_distance(a + shift, b + shift)
    assert abs(d0 - d1) <= 1e-9 * (1 + d0)


@pytest.mark.parametrize("n", [1, 17, 600, 2048])
def test_kdtree_agrees_with_brute_force(n):
    rng = np.random.default_rng(n)
    a, b = rng.random((n, 3)), rng.random((n + 5, 3))
    kd = nearest_sq_distances(a, b, "kdtree")
    brute = nearest_sq_distances(a, b, "brute")
    assert np.max(np.abs(kd - brute)) <= 1e-12
    assert abs(chamfer_distance(a, b, "kdtree") - chamfer_distance(a, b, "brute")) <= 1e-12


# --- JSD ----------------------------------------------------------------------

def test_jsd_identical_is_zero_and_disjoint_is_ln2():
    rng = np.random.default_rng(0)
    a = rng.random((500, 3)) * 0.5
    assert jsd([a], [a]) == 0.0
    assert math.isclose(jsd([a], [a + 0.5]), math.log(2), rel_tol=1e-12)


def test_jsd_two_cell_toy():
    # P = (1, 0), Q = (1/2, 1/2) over two cells of a 2-grid
    p = [[[0.1, 0.1, 0.1]]]
    q = [[[0.1, 0.1, 0.1], [0.9, 0.1, 0.1]]]
    want = oracles.jsd(p, q, 2)
    assert math.isclose(want, 0.5 * math.log(4 / 3) + 0.25 * math.log(2 / 3) + 0.25 * math.log(2),
                        rel_tol=1e-12)
    assert math.isclose(jsd(p, q, 2), want, rel_tol=1e-12)


@given(st.lists(clouds(max_size=10), min_size=1, max_size=3),
       st.lists(clouds(max_size=10), min_size=1, max_size=3), st.sampled_from([2, 4, 8]))
def test_jsd_matches_oracle_and_bounds(ref, gen, grid):
    got = jsd(ref, gen, grid)
    assert -1e-15 <= got <= math.log(2) + 1e-12
    want = oracles.jsd([c.tolist() for c in ref], [c.tolist() for c in gen], grid)
    assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12)


def test_histogram_clamps_and_normalizes():
    h = occupancy_histogram([[[-1, -1, -1], [2, 2, 2], [0.5, 0.5, 0.5]]], 2)
    # 0.5 * 2 = 1.0 falls into the upper cell along each axis
    assert (h[0], h[-1]) == (1 / 3, 2 / 3)
    assert math.isclose(h.sum(), 1.0)
    with pytest.raises(ValueError):
        occupancy_histogram([ORIGIN], 1)


# --- MMD ----------------------------------------------------------------------

def test_mmd_matches_oracle():
    rng = np.random.default_rng(4)
    ref = [rng.random((12, 3)) for _ in range(5)]
    gen = [rng.random((9, 3)) for _ in range(4)]
    want = oracles.mmd([r.tolist() for r in ref], [g.tolist() for g in gen])
    assert math.isclose(mmd(ref, gen), want, rel_tol=1e-12)
    assert math.isclose(mmd(ref, gen, "brute"), want, rel_tol=1e-12)


@given(st.lists(clouds(max_size=8), min_size=1, max_size=3),
       st.lists(clouds(max_size=8), min_size=1, max_size=4), clouds(max_size=8))
def test_mmd_never_grows_when_generated_set_grows(ref, gen, extra):
    assert mmd(ref, gen + [extra]) <= mmd(ref, gen) + 1e-15
    assert mmd(ref, list(ref)) == 0.0


def test_mmd_empty_sets():
    with pytest.raises(DegenerateInputError):
        mmd([], [ORIGIN])


# --- IR -----------------------------------------------------------------------

@pytest.mark.parametrize("reports,want", [
    ([[], [], []], 0.0),
    ([[], ["bad"], [], []], 0.25),
    ([["x"], ["y", "z"]], 1.0),
])
def test_invalidity_ratio(reports, want):
    assert invalidity_ratio(reports) == want


def test_invalidity_ratio_needs_reports():
    with pytest.raises(ValueError):
        invalidity_ratio([])


# --- end to end ---------------------------------------------------------------

def cube_text(size=1.0):
    return serialize_document(cube_document(size))


def test_identical_pairs_give_zeros():
    docs = [cube_text(1.0), cube_text(2.0)]
    rep = evaluate_pairs([(d, d) for d in docs], n_points=512)
    assert (rep.cd, rep.hd, rep.jsd, rep.mmd, rep.ir) == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert rep.sample_count == 512


def test_malformed_generated_counts_towards_ir():
    good = cube_text()
    pairs = [(good, good)] * 3 + [(b'{"faces": [', good)]
    rep = evaluate_pairs(pairs, n_points=256)
    assert rep.ir == 0.25 and rep.cd == 0.0


def test_all_invalid_generated_gives_none_metrics():
    rep = evaluate_pairs([(b"{}", cube_text())], n_points=64)
    assert rep.ir == 1.0 and rep.cd is None and rep.to_dict()["jsd"] is None


def test_invalid_reference_raises():
    with pytest.raises(DocumentError):
        evaluate_pairs([(cube_text(), b"not json")], n_points=64)


def test_box_pair_cd_matches_sampled_oracle():
    # sampling maps into the unit cube, so a translated copy would score 0; use a flattened box
    ref = box_document((0, 0, 0), (1, 1, 1))
    gen = box_document((0, 0, 0), (1, 1, 0.5))
    rep = evaluate_pairs([(gen, ref)], n_points=300, seed=3)
    a = sample_points(tessellate_document(gen), 300, 3).points
    b = sample_points(tessellate_document(ref), 300, 3).points
    assert math.isclose(rep.cd, oracles.chamfer(a.tolist(), b.tolist()), rel_tol=1e-9)
    assert math.isclose(rep.hd, oracles.hausdorff(a.tolist(), b.tolist()), rel_tol=1e-9)
    assert rep.cd > 0


def test_report_scaling():
    d = MetricReport(0.001, 0.5, 0.02, 0.003, 0.25, 8192).to_dict()
    assert d == pytest.approx({"cd": 0.1, "hd": 0.5, "jsd": 2.0, "mmd": 0.3, "ir": 0.25, "n": 8192},
                              rel=1e-12)
    json.dumps(d)
