"""Hybrid NURBS/primitive CAD documents: evaluation, meshing, metrics and curation."""

from .cad_json import (FaceRecord, SolidDocument, Violation, check_document, parse_document,
                       serialize_document, validate_document)
from .curation import complexity_score, curate_corpus, select_representation, token_count
from .errors import (DegenerateInputError, DocumentError, EvaluationError, HybridCadError,
                     ManifoldError, StructuralError, TessellationError)
from .mesh import PointCloud, TriMesh, normalize_to_box, sample_points, tessellate_document
from .metrics import chamfer_distance, evaluate_pairs, hausdorff_distance, jsd, mmd
from .nurbs import KnotVector, NurbsCurve, NurbsSurface, curve_point, surface_point
from .topology import compute_metadata, euler_genus

__all__ = [
    "FaceRecord", "SolidDocument", "Violation", "check_document", "parse_document",
    "serialize_document", "validate_document", "complexity_score", "curate_corpus",
    "select_representation", "token_count", "DegenerateInputError", "DocumentError",
    "EvaluationError", "HybridCadError", "ManifoldError", "StructuralError",
    "TessellationError", "PointCloud", "TriMesh", "normalize_to_box", "sample_points",
    "tessellate_document", "chamfer_distance", "evaluate_pairs", "hausdorff_distance", "jsd",
    "mmd", "KnotVector", "NurbsCurve", "NurbsSurface", "curve_point", "surface_point",
    "compute_metadata", "euler_genus",
]
