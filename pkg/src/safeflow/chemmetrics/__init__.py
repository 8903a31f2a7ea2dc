"""Similarity and distance metrics between molecules."""

from .fingerprint import Fingerprint, ecfp, environment_hashes, tanimoto
from .groups import PatternGraph, fg_scores, functional_groups, group_names, load_patterns, parse_pattern
from .mces import DEFAULT_BUDGET, MCESResult, mces_distance
from .properties import heavy_atom_count, rotatable_bond_count

__all__ = [
    "DEFAULT_BUDGET",
    "Fingerprint",
    "MCESResult",
    "PatternGraph",
    "ecfp",
    "environment_hashes",
    "fg_scores",
    "functional_groups",
    "group_names",
    "heavy_atom_count",
    "load_patterns",
    "mces_distance",
    "parse_pattern",
    "rotatable_bond_count",
    "tanimoto",
]
