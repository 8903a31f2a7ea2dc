from __future__ import annotations

from ..molgraph import BondOrder, MolGraph


def rotatable_bond_count(mol: MolGraph) -> int:
    """Single, acyclic bonds between two non-terminal heavy atoms."""
    return sum(
        1
        for b in mol.bonds
        if b.order is BondOrder.SINGLE and not b.in_ring and mol.degree(b.begin) > 1 and mol.degree(b.end) > 1
    )


def heavy_atom_count(mol: MolGraph) -> int:
    return mol.num_atoms
