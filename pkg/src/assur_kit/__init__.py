"""Planar pinned bar-joint frameworks: Assur graphs, singular realizations and drivers."""

from .assur import AssurScheme, decompose, is_assur, verify_sufficiency
from .counts import laman_check, pinned_framework_conditions
from .model import (
    DYAD,
    FOURBAR,
    K4,
    K33_ASSUR,
    STACKED_DYADS,
    TRIAD,
    Configuration,
    Framework,
    PinnedGraph,
    ValidationError,
)
from .singular import SingularCertificate, construct_singular_nonplanar, construct_singular_planar

__all__ = [
    "AssurScheme", "Configuration", "Framework", "PinnedGraph", "SingularCertificate", "ValidationError",
    "DYAD", "FOURBAR", "K4", "K33_ASSUR", "STACKED_DYADS", "TRIAD",
    "construct_singular_nonplanar", "construct_singular_planar", "decompose", "is_assur",
    "laman_check", "pinned_framework_conditions", "verify_sufficiency",
]
