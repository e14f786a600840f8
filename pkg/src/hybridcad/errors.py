"""Exception hierarchy shared by all hybridcad modules."""

from __future__ import annotations


class HybridCadError(Exception):
    """Base class for every error raised by hybridcad."""


class DomainError(HybridCadError, ValueError):
    """A parameter lies outside the valid evaluation domain."""


class StructuralError(HybridCadError, ValueError):
    """Geometry data violates a structural invariant (knots, pole counts, weights)."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


class EvaluationError(HybridCadError, ArithmeticError):
    """Rational evaluation produced a zero or non-finite denominator."""


class DegenerateInputError(HybridCadError, ValueError):
    """Input has no extent, no area or no points."""


class TessellationError(HybridCadError):
    """One or more faces could not be meshed into finite, non-empty geometry."""

    def __init__(self, message: str, faces: list[int] | None = None,
                 reasons: dict[int, str] | None = None):
        super().__init__(message)
        self.faces = list(faces or [])
        self.reasons = dict(reasons or {})


class UnsupportedFaceError(TessellationError):
    """Primitive face whose boundary is not planar."""


class ManifoldError(HybridCadError):
    """Mesh is not a closed 2-manifold, so the Euler/genus relation does not apply."""


class DocumentError(HybridCadError, ValueError):
    """A CAD JSON document failed to parse or validate.

    ``face`` is the index of the offending face (``None`` for document-level
    problems) and ``path`` the JSON field path inside that face.
    """

    def __init__(self, message: str, face: int | None = None, path: str = ""):
        self.message = message
        self.face = face
        self.path = path
        where = []
        if face is not None:
            where.append(f"face {face}")
        if path:
            where.append(path)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class LexError(HybridCadError, ValueError):
    """Text is not well-formed JSON."""


class ConfigError(HybridCadError, ValueError):
    """Invalid run configuration or corpus statistics."""


class CorpusSizeError(HybridCadError, ValueError):
    """Requested selection is larger than the corpus."""
