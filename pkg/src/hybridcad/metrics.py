"""
Point-cloud metrics for comparing generated and reference shapes.

Conventions:

* Chamfer distance is the sum of the two directed means of squared
  nearest-neighbour distances (so a single pair of points at distance 1 gives 2).
* Hausdorff distance uses unsquared distances.
* JSD compares grid^3 occupancy histograms of whole sets over [0, 1]^3 with
  natural logs, so it lies in [0, ln 2].
* MMD is the mean over references of the best chamfer match in the generated set.

Nearest neighbours come from a kd-tree; an O(N^2) brute-force route is kept
for cross-checking (``method="brute"``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError, DocumentError

log = logging.getLogger(__name__)

__all__ = [
    "nearest_sq_distances",
    "chamfer_distance",
    "hausdorff_distance",
    "occupancy_histogram",
    "jsd",
    "mmd",
    "invalidity_ratio",
    "MetricReport",
    "evaluate_pairs",
]

SCALE = 100.0
_BLOCK = 512


def _points(cloud) -> np.ndarray:
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("point cloud must have shape (n, 3)")
    if len(pts) == 0:
        raise DegenerateInputError("point cloud is empty")
    return pts


def _brute_nearest(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(len(a))
    for s in range(0, len(a), _BLOCK):
        diff = a[s:s + _BLOCK, None, :] - b[None, :, :]
        out[s:s + _BLOCK] = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
    return out


def nearest_sq_distances(a, b, method: str = "kdtree") -> np.ndarray:
    """Squared distance from each point of ``a`` to its nearest point of ``b``."""
    a, b = _points(a), _points(b)
    if method == "brute":
        return _brute_nearest(a, b)
    if method != "kdtree":
        raise ValueError(f"unknown method {method!r}")
    return _tree_nearest(a, b, cKDTree(b))


def _tree_nearest(a: np.ndarray, b: np.ndarray, tree: cKDTree) -> np.ndarray:
    _, idx = tree.query(a, k=1)
    # recompute from coordinates so both routes share the same arithmetic
    diff = a - b[idx]
    return np.einsum("ij,ij->i", diff, diff)


def chamfer_distance(a, b, method: str = "kdtree") -> float:
    return float(nearest_sq_distances(a, b, method).mean()
                 + nearest_sq_distances(b, a, method).mean())


def hausdorff_distance(a, b, method: str = "kdtree") -> float:
    return math.sqrt(max(nearest_sq_distances(a, b, method).max(),
                         nearest_sq_distances(b, a, method).max()))


def occupancy_histogram(clouds: Iterable, grid: int = 32) -> np.ndarray:
    """Normalized grid^3 histogram of all points of ``clouds`` over [0, 1]^3.

    Points outside the cube are clamped into the border cells.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    counts = np.zeros(grid ** 3)
    total = 0
    for cloud in clouds:
        pts = _points(cloud)
        cells = np.clip(np.floor(pts * grid).astype(np.int64), 0, grid - 1)
        flat = (cells[:, 0] * grid + cells[:, 1]) * grid + cells[:, 2]
        counts += np.bincount(flat, minlength=grid ** 3)
        total += len(pts)
    if total == 0:
        raise DegenerateInputError("cloud set is empty")
    return counts / total


def _kl(p: np.ndarray, m: np.ndarray) -> float:
    nz = p > 0
    return math.fsum(p[nz] * np.log(p[nz] / m[nz]))


def jsd(reference: Sequence, generated: Sequence, grid: int = 32) -> float:
    if not len(reference) or not len(generated):
        raise DegenerateInputError("JSD needs non-empty reference and generated sets")
    p = occupancy_histogram(reference, grid)
    q = occupancy_histogram(generated, grid)
    m = 0.5 * (p + q)
    value = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    # the exact value lies in [0, ln 2]; clamp away last-ulp rounding
    return min(max(value, 0.0), math.log(2))


def mmd(reference: Sequence, generated: Sequence, method: str = "kdtree") -> float:
    if not len(reference) or not len(generated):
        raise DegenerateInputError("MMD needs non-empty reference and generated sets")
    if method != "kdtree":
        return float(np.mean([min(chamfer_distance(g, r, method) for g in generated)
                              for r in reference]))
    # one tree per cloud instead of two per pair
    ref = [_points(r) for r in reference]
    gen = [_points(g) for g in generated]
    ref_trees = [cKDTree(r) for r in ref]
    gen_trees = [cKDTree(g) for g in gen]
    best = []
    for i, (r, rt) in enumerate(zip(ref, ref_trees)):
        low = math.inf
        # the paired generated cloud is usually the best match; try it first
        order = sorted(range(len(gen)), key=lambda j: j != i)
        for g, gt in ((gen[j], gen_trees[j]) for j in order):
            first = _tree_nearest(r, g, gt).mean()
            # both directed terms are >= 0, so this candidate cannot beat ``low``
            if first >= low:
                continue
            low = min(low, float(_tree_nearest(g, r, rt).mean() + first))
        best.append(low)
    return float(np.mean(best))


def invalidity_ratio(reports: Sequence[Sequence]) -> float:
    """Fraction of validity reports that list at least one violation."""
    if not len(reports):
        raise ValueError("need at least one report")
    return sum(1 for r in reports if len(r)) / len(reports)


@dataclass(frozen=True)
class MetricReport:
    """Raw (unscaled) metric values; ``to_dict`` applies the x100 reporting scale."""

    cd: float | None
    hd: float | None
    jsd: float | None
    mmd: float | None
    ir: float
    sample_count: int

    def to_dict(self) -> dict:
        def scaled(x):
            return None if x is None else x * SCALE
        return {"cd": scaled(self.cd), "hd": self.hd, "jsd": scaled(self.jsd),
                "mmd": scaled(self.mmd), "ir": self.ir, "n": self.sample_count}


def _cloud_for(source, n_points, seed, chord_tolerance):
    """``(violations, points or None)`` for a document, its text, or its bytes."""
    from .cad_json import check_document
    from .mesh import sample_points

    _, mesh, violations = check_document(source, chord_tolerance)
    if violations:
        return [str(v) for v in violations], None
    return [], sample_points(mesh, n_points, seed).points


def _pair_job(args):
    gen, ref, n_points, seed, chord_tolerance = args
    ref_report, ref_pts = _cloud_for(ref, n_points, seed, chord_tolerance)
    gen_report, gen_pts = _cloud_for(gen, n_points, seed, chord_tolerance)
    return gen_report, gen_pts, ref_report, ref_pts


def evaluate_pairs(pairs: Sequence[tuple], n_points: int = 8192, seed: int = 0,
                   grid: int = 32, chord_tolerance: float = 1e-3, jobs: int = 1,
                   method: str = "kdtree") -> MetricReport:
    """Score (generated, reference) document pairs.

    Invalid generated documents count towards IR and are left out of the
    geometric metrics.  An invalid reference raises :class:`DocumentError`.
    Geometric fields are ``None`` when no generated document is valid.
    """
    if not pairs:
        raise ValueError("no pairs to evaluate")
    tasks = [(g, r, n_points, seed, chord_tolerance) for g, r in pairs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_pair_job, tasks))
    else:
        results = [_pair_job(t) for t in tasks]

    gen_reports, gen_clouds, ref_clouds = [], [], []
    cds, hds = [], []
    for i, (g_rep, g_pts, r_rep, r_pts) in enumerate(results):
        if r_rep:
            raise DocumentError(f"reference document {i} is invalid: {'; '.join(r_rep)}")
        ref_clouds.append(r_pts)
        gen_reports.append(g_rep)
        if g_pts is None:
            continue
        gen_clouds.append(g_pts)
        cds.append(chamfer_distance(g_pts, r_pts, method))
        hds.append(hausdorff_distance(g_pts, r_pts, method))
    ir = invalidity_ratio(gen_reports)
    if not gen_clouds:
        log.warning("no valid generated documents; geometric metrics undefined")
        return MetricReport(None, None, None, None, ir, n_points)
    return MetricReport(float(np.mean(cds)), float(np.mean(hds)),
                        jsd(ref_clouds, gen_clouds, grid),
                        mmd(ref_clouds, gen_clouds, method), ir, n_points)
