"""Toy MS/MS simulator, spectrum binning, descriptor loading and MGF-like I/O.

The simulator is a deterministic stand-in for real fragmentation: every
acyclic single bond is broken once, both pieces keep the hydrogens they had
in the parent (no hydrogen transfer, no charge bookkeeping), and each piece's
peak intensity is its heavy-atom count.  It exists so that the whole
train/sample/evaluate loop can run end to end without external encoders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .molgraph import BondOrder, MolGraph

H_MASS = 1.00782503207
MONOISOTOPIC_MASS = {
    "H": H_MASS,
    "B": 11.0093054,
    "C": 12.0,
    "N": 14.0030740048,
    "O": 15.99491461956,
    "F": 18.99840322,
    "P": 30.97376163,
    "S": 31.97207100,
    "Cl": 34.96885268,
    "Br": 78.9183371,
    "I": 126.904473,
}

DEFAULT_NBINS = 256
DEFAULT_MAX_MZ = 1000.0


class SpectrumFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    peaks: tuple[tuple[float, float], ...]
    precursor_mz: float

    @property
    def mz(self) -> np.ndarray:
        return np.array([p[0] for p in self.peaks], dtype=np.float64)

    @property
    def intensities(self) -> np.ndarray:
        return np.array([p[1] for p in self.peaks], dtype=np.float64)


@dataclass(frozen=True)
class SpectrumRecord:
    id: str
    spectrum: Spectrum
    smiles: str | None = None


def atom_masses(mol: MolGraph) -> list[float]:
    out = []
    for i, a in enumerate(mol.atoms):
        if a.element not in MONOISOTOPIC_MASS:
            raise KeyError(f"no monoisotopic mass for element {a.element}")
        out.append(MONOISOTOPIC_MASS[a.element] + mol.hcounts[i] * H_MASS)
    return out


def monoisotopic_mass(mol: MolGraph) -> float:
    return math.fsum(atom_masses(mol))


def cleavable_bonds(mol: MolGraph) -> list[int]:
    return [k for k, b in enumerate(mol.bonds) if b.order is BondOrder.SINGLE and not b.in_ring]


def fragment_pairs(mol: MolGraph) -> list[tuple[tuple[float, int], tuple[float, int]]]:
    """Per cleavable bond: ((mass, heavy atoms), (mass, heavy atoms)) of both pieces."""
    masses = atom_masses(mol)
    out = []
    for k in cleavable_bonds(mol):
        comps = mol.components([k])
        sides = [c for c in comps if mol.bonds[k].begin in c or mol.bonds[k].end in c]
        out.append(tuple((math.fsum(masses[a] for a in c), len(c)) for c in sides))
    return out


def simulate_spectrum(mol: MolGraph) -> Spectrum:
    """Precursor peak plus both fragment peaks of every acyclic single bond."""
    if not mol.atoms:
        raise ValueError("cannot simulate a spectrum for an empty molecule")
    precursor = monoisotopic_mass(mol)
    merged: dict[float, float] = {round(precursor, 6): float(len(mol.atoms))}
    for pair in fragment_pairs(mol):
        for mass, heavy in pair:
            key = round(mass, 6)
            merged[key] = merged.get(key, 0.0) + heavy
    top = max(merged.values())
    peaks = tuple((mz, merged[mz] / top) for mz in sorted(merged))
    return Spectrum(peaks, precursor)


def bin_spectrum(spectrum: Spectrum, nbins: int = DEFAULT_NBINS, max_mz: float = DEFAULT_MAX_MZ) -> np.ndarray:
    """Sum intensities into ``nbins`` equal-width bins over [0, max_mz), then max-normalize."""
    if nbins < 1:
        raise ValueError("nbins must be >= 1")
    if max_mz <= 0:
        raise ValueError("max_mz must be positive")
    vec = np.zeros(nbins, dtype=np.float64)
    width = max_mz / nbins
    for mz, intensity in spectrum.peaks:
        idx = min(int(math.floor(mz / width)), nbins - 1)
        vec[max(idx, 0)] += intensity
    top = vec.max()
    if top > 0:
        vec /= top
    return vec


# ---------------------------------------------------------------- files


def write_mgf(records: Iterable[SpectrumRecord], path: str | Path) -> None:
    lines = []
    for rec in records:
        lines.append("BEGIN IONS")
        lines.append(f"TITLE={rec.id}")
        if rec.smiles is not None:
            lines.append(f"SMILES={rec.smiles}")
        lines.append(f"PEPMASS={rec.spectrum.precursor_mz:.6f}")
        lines.extend(f"{mz:.6f} {inten:.6f}" for mz, inten in rec.spectrum.peaks)
        lines.append("END IONS")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def read_mgf(path: str | Path) -> list[SpectrumRecord]:
    records = []
    current: dict | None = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "BEGIN IONS":
            if current is not None:
                raise SpectrumFormatError(f"line {lineno}: nested BEGIN IONS")
            current = {"peaks": []}
        elif line == "END IONS":
            if current is None:
                raise SpectrumFormatError(f"line {lineno}: END IONS without BEGIN IONS")
            if "TITLE" not in current or "PEPMASS" not in current:
                raise SpectrumFormatError(f"line {lineno}: record lacks TITLE or PEPMASS")
            peaks = tuple(sorted(current["peaks"]))
            records.append(SpectrumRecord(current["TITLE"], Spectrum(peaks, current["PEPMASS"]), current.get("SMILES")))
            current = None
        elif current is None:
            raise SpectrumFormatError(f"line {lineno}: content outside BEGIN/END IONS")
        elif "=" in line:
            key, value = line.split("=", 1)
            if key == "PEPMASS":
                try:
                    current[key] = float(value.split()[0])
                except (ValueError, IndexError) as exc:
                    raise SpectrumFormatError(f"line {lineno}: bad PEPMASS {value!r}") from exc
            elif key in ("TITLE", "SMILES"):
                current[key] = value
            else:
                raise SpectrumFormatError(f"line {lineno}: unknown key {key!r}")
        else:
            parts = line.split()
            try:
                mz, inten = float(parts[0]), float(parts[1])
            except (ValueError, IndexError) as exc:
                raise SpectrumFormatError(f"line {lineno}: expected '<mz> <intensity>', got {line!r}") from exc
            if len(parts) != 2:
                raise SpectrumFormatError(f"line {lineno}: expected two fields, got {line!r}")
            current["peaks"].append((mz, inten))
    if current is not None:
        raise SpectrumFormatError("unterminated record at end of file")
    return records


def is_mgf(path: str | Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                return line == "BEGIN IONS"
    return False


def load_descriptors(path: str | Path) -> tuple[dict[str, np.ndarray], int]:
    """Condition vectors keyed by record id, and their shared dimension.

    Accepts the corpus format (``SMILES<TAB>v1,v2,...``; ids are the 0-based
    record index) or a CSV of ``id,v1,v2,...`` rows.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    corpus_format = any("\t" in ln for ln in lines)
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for idx, line in enumerate(lines):
        if corpus_format:
            if "\t" not in line:
                raise SpectrumFormatError(f"record {idx}: missing condition vector")
            rid, fields = str(idx), line.split("\t", 1)[1].split(",")
        else:
            parts = line.split(",")
            rid, fields = parts[0].strip(), parts[1:]
        try:
            vec = np.array([float(f) for f in fields], dtype=np.float64)
        except ValueError as exc:
            raise SpectrumFormatError(f"record {rid}: non-numeric field") from exc
        if not np.all(np.isfinite(vec)):
            raise SpectrumFormatError(f"record {rid}: non-finite value")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise SpectrumFormatError(f"ragged dimensions: record {rid} has {len(vec)} values, expected {dim}")
        if rid in vectors:
            raise SpectrumFormatError(f"duplicate record id {rid!r}")
        vectors[rid] = vec
    if dim is None:
        raise SpectrumFormatError("no descriptor rows found")
    return vectors, dim
