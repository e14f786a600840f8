"""Scoring a synthetic corpus and drawing a complexity-balanced subset.

Generates 300 parts, extracts the four complexity features from their
canonical JSON, scores them against corpus statistics, and samples a
60-part subset with the default 10/50/40 tier mix.
"""

from collections import Counter

from hybridcad.cad_json import serialize_document
from hybridcad.curation import curate_corpus, extract_features, score_corpus
from hybridcad.shapes import synthetic_corpus

corpus = synthetic_corpus(300, seed=1)
features = {pid: extract_features(serialize_document(doc)) for pid, doc in corpus.items()}
parts, stats = score_corpus(features)

print("feature ranges:")
for name, (lo, hi) in stats.ranges.items():
    print(f"  {name:18} {lo:10.3f} .. {hi:10.3f}")
print("tier sizes:", dict(Counter(p.tier for p in parts)))

manifest = curate_corpus(parts, 60, seed=0)
print("selected:", dict(Counter(e["tier"] for e in manifest if e["selected"])))
for e in manifest[:5]:
    print("  ", e)
