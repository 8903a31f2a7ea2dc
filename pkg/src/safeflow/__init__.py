"""Spectrum-conditioned molecule generation with discrete flow matching over SAFE strings."""

from .molgraph import MolGraph, SmilesError, mol_equal, parse_smiles, write_canonical
from .safe import Vocabulary, decode_safe, encode_safe

__version__ = "0.1.0"

__all__ = [
    "MolGraph",
    "SmilesError",
    "Vocabulary",
    "decode_safe",
    "encode_safe",
    "mol_equal",
    "parse_smiles",
    "write_canonical",
]
