"""Deterministic random molecules assembled from drug-like building blocks.

Used to build desk-scale corpora for training and for property tests.
"""

from __future__ import annotations

import random

from .molgraph import Atom, Bond, BondOrder, MolGraph, SmilesError, parse_smiles, write_canonical

RING_BLOCKS = (
    "c1ccccc1", "c1ccncc1", "c1cncnc1", "c1ccoc1", "c1ccsc1", "c1cc[nH]c1", "c1cnc[nH]1",
    "C1CCCCC1", "C1CCNCC1", "C1CCOCC1", "C1CCCC1", "C1CC1", "C1CCOC1", "C1CNCCN1",
    "c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1", "O=C1CCCO1", "C1OC1",
)
CHAIN_BLOCKS = (
    "C", "C", "C", "CC", "CCC", "C(C)C", "O", "N", "F", "Cl", "Br", "I", "OC", "N(C)C", "C=C", "C#C",
    "C(=O)O", "C(=O)OC", "C(=O)N", "C(=O)C", "NC(=O)C", "C#N", "[N+](=O)[O-]", "S(=O)(=O)C",
    "SC", "S", "S(=O)C", "C(F)(F)F", "OP(=O)(O)O", "P(=O)(O)O", "N=[N+]=[N-]", "OO", "C=O", "CO",
)

_RING_GRAPHS: list[MolGraph] = []
_CHAIN_GRAPHS: list[MolGraph] = []


def _blocks() -> tuple[list[MolGraph], list[MolGraph]]:
    if not _RING_GRAPHS:
        _RING_GRAPHS.extend(parse_smiles(s) for s in RING_BLOCKS)
        _CHAIN_GRAPHS.extend(parse_smiles(s) for s in CHAIN_BLOCKS)
    return _RING_GRAPHS, _CHAIN_GRAPHS


def _attach_sites(mol: MolGraph) -> list[int]:
    return [i for i, a in enumerate(mol.atoms) if a.explicit_h is None and mol.hcounts[i] > 0]


def _join(mol: MolGraph, piece: MolGraph, at: int, piece_at: int) -> MolGraph | None:
    offset = len(mol.atoms)
    atoms = list(mol.atoms) + list(piece.atoms)
    bonds = [Bond(b.begin, b.end, b.order) for b in mol.bonds]
    bonds += [Bond(b.begin + offset, b.end + offset, b.order) for b in piece.bonds]
    bonds.append(Bond(at, piece_at + offset, BondOrder.SINGLE))
    try:
        return MolGraph.build(atoms, bonds)
    except SmilesError:
        return None


def random_molecule(rng: random.Random, max_atoms: int = 30, min_atoms: int = 4) -> MolGraph:
    """Grow a molecule by attaching random blocks at hydrogen-bearing atoms."""
    rings, chains = _blocks()
    while True:
        mol = rng.choice(rings if rng.random() < 0.8 else chains)
        target = rng.randint(min_atoms, max_atoms)
        for _ in range(12):
            if len(mol.atoms) >= target:
                break
            piece = rng.choice(rings if rng.random() < 0.3 else chains)
            if len(mol.atoms) + len(piece.atoms) > max_atoms:
                continue
            sites, piece_sites = _attach_sites(mol), _attach_sites(piece)
            if not sites or not piece_sites:
                continue
            joined = _join(mol, piece, rng.choice(sites), rng.choice(piece_sites))
            if joined is not None:
                mol = joined
        if min_atoms <= len(mol.atoms) <= max_atoms:
            return mol


def toy_corpus(n: int, seed: int, max_atoms: int = 30, min_atoms: int = 4) -> list[str]:
    """``n`` distinct canonical SMILES drawn deterministically from ``seed``."""
    rng = random.Random(seed)
    seen: set[str] = set()
    out = []
    while len(out) < n:
        smi = write_canonical(random_molecule(rng, max_atoms, min_atoms))
        if smi not in seen:
            seen.add(smi)
            out.append(smi)
    return out
