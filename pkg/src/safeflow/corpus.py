"""Corpus files: one SMILES per line, optionally TAB + comma-separated condition vector."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .molgraph import MolGraph, SmilesError, parse_smiles


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusRecord:
    id: str  # 0-based index among data lines
    smiles: str
    mol: MolGraph
    vector: np.ndarray | None
    line: int  # 1-based line number in the file


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    records: list[CorpusRecord] = []
    dim: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        smiles, _, vec_text = raw.partition("\t")
        smiles = smiles.strip()
        try:
            mol = parse_smiles(smiles)
        except SmilesError as exc:
            raise CorpusError(f"{path}:{lineno}: cannot parse {smiles!r}: {exc}") from exc
        vector = None
        if vec_text.strip():
            try:
                vector = np.array([float(v) for v in vec_text.split(",")], dtype=np.float64)
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: non-numeric condition field") from exc
            if not np.all(np.isfinite(vector)):
                raise CorpusError(f"{path}:{lineno}: non-finite condition value")
        this_dim = None if vector is None else len(vector)
        if records and this_dim != dim:
            raise CorpusError(f"{path}:{lineno}: condition dimension {this_dim} differs from {dim} on earlier lines")
        dim = this_dim
        records.append(CorpusRecord(str(len(records)), smiles, mol, vector, lineno))
    if not records:
        raise CorpusError(f"{path}: no molecules found")
    return records


def write_corpus(smiles: list[str], path: str | Path, vectors: list[np.ndarray] | None = None) -> None:
    lines = []
    for i, s in enumerate(smiles):
        if vectors is None:
            lines.append(s)
        else:
            lines.append(s + "\t" + ",".join(repr(float(v)) for v in vectors[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
