"""Circular (Morgan/ECFP-style) fingerprints and Tanimoto similarity."""

from __future__ import annotations

from dataclasses import dataclass

from ..molgraph import ATOMIC_NUMBERS, MolGraph

_MASK = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _hash(values) -> int:
    h = _FNV_OFFSET
    for v in values:
        h ^= v & _MASK
        h = (h * _FNV_PRIME) & _MASK
    # splitmix64 finalizer
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    h = (h ^ (h >> 27)) * 0x94D049BB133111EB & _MASK
    return h ^ (h >> 31)


@dataclass(frozen=True)
class Fingerprint:
    bits: int
    nbits: int = 2048
    radius: int = 2

    def on_bits(self) -> list[int]:
        return [i for i in range(self.nbits) if self.bits >> i & 1]

    def count(self) -> int:
        return self.bits.bit_count()


def environment_hashes(mol: MolGraph, radius: int = 2) -> list[int]:
    """All atom-environment hashes for radii ``0..radius`` (one per atom per radius)."""
    current = [
        _hash((ATOMIC_NUMBERS[a.element], mol.degree(i), mol.hcounts[i], a.formal_charge, int(a.in_ring)))
        for i, a in enumerate(mol.atoms)
    ]
    out = list(current)
    for r in range(1, radius + 1):
        updated = []
        for i in range(len(mol.atoms)):
            env = sorted((int(mol.bonds[k].order), current[nb]) for nb, k in mol.neighbors[i])
            flat = [r, current[i]]
            for order, h in env:
                flat.extend((order, h))
            updated.append(_hash(flat))
        current = updated
        out.extend(current)
    return out


def ecfp(mol: MolGraph, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if nbits <= 0 or nbits & (nbits - 1):
        raise ValueError("nbits must be a power of two")
    bits = 0
    for h in environment_hashes(mol, radius):
        bits |= 1 << (h % nbits)
    return Fingerprint(bits, nbits, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.nbits != b.nbits:
        raise ValueError(f"fingerprint sizes differ: {a.nbits} vs {b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 0.0
    return (a.bits & b.bits).bit_count() / union
