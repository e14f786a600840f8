"""
Dataset curation: per-face representation choice and complexity-balanced sampling.

A face keeps its NURBS fit when the chamfer distance to the reference geometry
is at most ``epsilon`` (default 6e-4); otherwise it falls back to analytic
primitives.

Parts are scored with

    w = 0.35 t + 0.3 h + 0.25 r + 0.1 d

where t, h, r, d are the token count, through-hole count, area/volume ratio
and bounding-box diagonal, each min-max normalized over the corpus.  Tiers are
simple (w <= 0.12), moderate (w <= 0.23) and complex.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, CorpusSizeError, LexError

log = logging.getLogger(__name__)

__all__ = [
    "EPSILON",
    "WEIGHTS",
    "TIERS",
    "DEFAULT_RATIOS",
    "RepresentationDecision",
    "select_representation",
    "decide_representation",
    "token_count",
    "ComplexityFeatures",
    "CorpusStats",
    "complexity_score",
    "tier_for",
    "extract_features",
    "ScoredPart",
    "score_corpus",
    "allocate_quotas",
    "curate_corpus",
]

EPSILON = 6e-4
WEIGHTS = {"token_count": 0.35, "through_holes": 0.3, "area_volume_ratio": 0.25, "bbox_diag": 0.1}
FEATURES = tuple(WEIGHTS)
TIERS = ("simple", "moderate", "complex")
THRESHOLDS = (0.12, 0.23)
DEFAULT_RATIOS = (0.10, 0.50, 0.40)

KEEP_NURBS = "keep_nurbs"
FALLBACK_PRIMITIVE = "fallback_primitive"


# ----------------------------------------------------------------------------
# representation choice
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RepresentationDecision:
    choice: str
    cd: float
    epsilon: float

    @property
    def keep_nurbs(self) -> bool:
        return self.choice == KEEP_NURBS


def decide_representation(cd: float, epsilon: float = EPSILON) -> RepresentationDecision:
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    return RepresentationDecision(KEEP_NURBS if cd <= epsilon else FALLBACK_PRIMITIVE, cd, epsilon)


def select_representation(nurbs_cloud, reference_cloud,
                          epsilon: float = EPSILON) -> RepresentationDecision:
    """Keep the NURBS fit iff its chamfer distance to the reference is <= ``epsilon``."""
    from .metrics import chamfer_distance

    return decide_representation(chamfer_distance(nurbs_cloud, reference_cloud), epsilon)


# ----------------------------------------------------------------------------
# token count
# ----------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    [{}\[\]:,]
  | "(?:[^"\\\x00-\x1f]|\\(?:["\\/bfnrt]|u[0-9a-fA-F]{4}))*"
  | -?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?
  | true|false|null
""", re.VERBOSE)


def token_count(text) -> int:
    """Number of JSON lexical tokens: punctuation, strings, numbers and keywords."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LexError(f"not UTF-8: {exc}") from exc
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise LexError(f"malformed JSON: {exc}") from exc
    # well-formed JSON is tokens separated only by whitespace
    return len(_TOKEN.findall(text))


# ----------------------------------------------------------------------------
# scoring
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexityFeatures:
    """Raw per-part features.  ``area_volume_ratio`` is ``None`` for open or zero-volume parts."""

    token_count: int
    through_holes: int
    area_volume_ratio: float | None
    bbox_diag: float

    def __post_init__(self):
        values = [self.token_count, self.through_holes, self.bbox_diag]
        if self.area_volume_ratio is not None:
            values.append(self.area_volume_ratio)
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ValueError("features must be finite and non-negative")


@dataclass(frozen=True)
class CorpusStats:
    """Per-feature (min, max) over a corpus."""

    ranges: Mapping[str, tuple[float, float]]

    @classmethod
    def from_features(cls, features: Iterable[ComplexityFeatures]) -> "CorpusStats":
        feats = list(features)
        if not feats:
            raise ConfigError("cannot compute statistics of an empty corpus")
        ranges = {}
        for name in FEATURES:
            vals = [getattr(f, name) for f in feats if getattr(f, name) is not None]
            ranges[name] = (float(min(vals)), float(max(vals))) if vals else (0.0, 0.0)
        return cls(ranges)

    @classmethod
    def from_dict(cls, data: Mapping) -> "CorpusStats":
        ranges = {}
        for name in FEATURES:
            try:
                lo, hi = data[name]["min"], data[name]["max"]
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"stats missing feature {name!r}") from exc
            ranges[name] = (float(lo), float(hi))
        return cls(ranges)

    def to_dict(self) -> dict:
        return {name: {"min": lo, "max": hi} for name, (lo, hi) in self.ranges.items()}


def _normalized(x: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    return min(1.0, max(0.0, (x - lo) / (hi - lo)))


def tier_for(w: float) -> str:
    if w <= THRESHOLDS[0]:
        return "simple"
    if w <= THRESHOLDS[1]:
        return "moderate"
    return "complex"


def complexity_score(features: ComplexityFeatures, stats: CorpusStats) -> tuple[float, str]:
    """Weighted sum of min-max normalized features and its tier."""
    terms = []
    for name in FEATURES:
        if name not in stats.ranges:
            raise ConfigError(f"stats missing feature {name!r}")
        lo, hi = stats.ranges[name]
        x = getattr(features, name)
        if x is None:
            # open or zero-volume part: treated as the thinnest in the corpus
            x = hi
        terms.append(WEIGHTS[name] * _normalized(float(x), lo, hi))
    # fsum keeps the all-maximum score at exactly 1.0
    w = math.fsum(terms)
    return w, tier_for(w)


def extract_features(text, chord_tolerance: float = 1e-3) -> ComplexityFeatures:
    """Features of one document, with geometry normalized to the 2x2x2 box."""
    from .cad_json import parse_document
    from .mesh import normalize_to_box, tessellate_document
    from .topology import compute_aabb, mesh_metadata

    tokens = token_count(text)
    mesh, _, _ = normalize_to_box(tessellate_document(parse_document(text), chord_tolerance))
    meta = mesh_metadata(mesh)
    ratio = None
    if meta.watertight and meta.volume and meta.volume > 0:
        ratio = meta.surface_area / meta.volume
    holes = meta.genus if meta.genus is not None else 0
    return ComplexityFeatures(tokens, holes, ratio, compute_aabb(mesh).diagonal)


# ----------------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoredPart:
    id: str
    w: float | None
    tier: str

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")


def score_corpus(features: Mapping[str, ComplexityFeatures],
                 stats: CorpusStats | None = None) -> tuple[list[ScoredPart], CorpusStats]:
    stats = stats or CorpusStats.from_features(features.values())
    parts = []
    for pid in sorted(features):
        w, tier = complexity_score(features[pid], stats)
        parts.append(ScoredPart(pid, w, tier))
    return parts, stats


def _check_ratios(ratios: Sequence[float]) -> tuple[float, ...]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError("ratios must be three non-negative numbers summing to 1")
    return ratios


def _shares(target: int, ratios: Sequence[float], available: Sequence[int]) -> list[float]:
    """Real-valued per-tier shares; capped tiers pass their excess on in ratio."""
    ideal = [target * r for r in ratios]
    capped = [False] * len(ratios)
    while True:
        over = [i for i in range(len(ideal)) if not capped[i] and ideal[i] > available[i]]
        if not over:
            return ideal
        excess = 0.0
        for i in over:
            excess += ideal[i] - available[i]
            ideal[i] = float(available[i])
            capped[i] = True
        open_tiers = [i for i in range(len(ideal)) if not capped[i]]
        if not open_tiers:
            return ideal
        weights = [ratios[i] for i in open_tiers]
        if sum(weights) == 0:
            weights = [1.0] * len(open_tiers)
        for i, wt in zip(open_tiers, weights):
            ideal[i] += excess * wt / sum(weights)
        log.info("redistributed %.3g from tiers %s", excess, [TIERS[i] for i in over])


def allocate_quotas(target: int, ratios: Sequence[float], available: Sequence[int]) -> list[int]:
    """Per-tier counts summing to ``target``.

    Shares follow ``ratios``.  A tier with too few members is capped and its
    excess goes to the other tiers in proportion to their ratios, repeated
    until every share fits.  The shares are then rounded by largest remainder
    (ties to the lower tier index), which gives the integer split closest to
    them in L1.
    """
    ratios = _check_ratios(ratios)
    if target < 0:
        raise ConfigError("target size must be non-negative")
    if target > sum(available):
        raise CorpusSizeError(f"target size {target} exceeds corpus size {sum(available)}")
    ideal = _shares(target, ratios, available)
    quotas = [min(math.floor(x), a) for x, a in zip(ideal, available)]
    order = sorted(range(len(ideal)), key=lambda i: (-(ideal[i] - quotas[i]), i))
    left = target - sum(quotas)
    while left > 0:
        for i in order:
            if left and quotas[i] < available[i]:
                quotas[i] += 1
                left -= 1
    return quotas


def curate_corpus(parts: Sequence[ScoredPart], target_size: int,
                  ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> list[dict]:
    """Manifest entries ``{"id", "w", "tier", "selected"}`` for every part, sorted by id.

    ``parts`` may also hold plain ``(id, tier)`` or ``(id, w, tier)`` tuples.
    """
    parts = [p if isinstance(p, ScoredPart)
             else ScoredPart(p[0], None, p[1]) if len(p) == 2 else ScoredPart(*p) for p in parts]
    by_tier = {t: sorted(p.id for p in parts if p.tier == t) for t in TIERS}
    if len({p.id for p in parts}) != len(parts):
        raise ConfigError("part ids must be unique")
    quotas = allocate_quotas(target_size, ratios, [len(by_tier[t]) for t in TIERS])
    rng = np.random.default_rng(seed)
    chosen = set()
    for tier, quota in zip(TIERS, quotas):
        ids = by_tier[tier]
        if quota:
            picks = rng.choice(len(ids), size=quota, replace=False)
            chosen.update(ids[i] for i in picks)
    return [dict(asdict(p), selected=p.id in chosen) for p in sorted(parts, key=lambda p: p.id)]
