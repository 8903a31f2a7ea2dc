"""Functional-group detection by substructure matching against a pattern table.

Pattern lines are ``<name> <pattern>``.  Patterns use a small SMILES subset:
``X`` matches any element, uppercase symbols match either aromaticity,
lowercase symbols only aromatic atoms.  Bracket atoms take ``;``-separated
primitives: ``+``/``-`` charge, ``H<n>`` total hydrogens, ``D<n>`` heavy
degree, ``R``/``!R`` ring membership, ``A``/``a`` aliphatic/aromatic.  Bond
symbols: ``-`` single, ``=`` double, ``#`` triple, ``:`` aromatic, ``~`` any,
``@`` any ring bond; an omitted bond means single or aromatic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..molgraph import BondOrder, MolGraph

_SINGLE_OR_AROMATIC = "implicit"
COMPUTED_GROUPS = ("heteroaromatic", "polycyclic_aromatic")


@dataclass(frozen=True)
class PatternAtom:
    element: str | None = None
    aromatic: bool | None = None
    charge: int | None = None
    hcount: int | None = None
    degree: int | None = None
    ring: bool | None = None

    def matches(self, mol: MolGraph, i: int) -> bool:
        a = mol.atoms[i]
        if self.element is not None and a.element != self.element:
            return False
        if self.aromatic is not None and a.aromatic != self.aromatic:
            return False
        if self.charge is not None and a.formal_charge != self.charge:
            return False
        if self.hcount is not None and mol.hcounts[i] != self.hcount:
            return False
        if self.degree is not None and mol.degree(i) != self.degree:
            return False
        if self.ring is not None and a.in_ring != self.ring:
            return False
        return True


@dataclass(frozen=True)
class PatternGraph:
    name: str
    atoms: tuple[PatternAtom, ...]
    bonds: tuple[tuple[int, int, str], ...]
    text: str = ""
    _adj: tuple = field(default=(), compare=False, repr=False)


def _bond_ok(spec: str, mol: MolGraph, k: int) -> bool:
    bond = mol.bonds[k]
    if spec == "~":
        return True
    if spec == "@":
        return bond.in_ring
    if spec == _SINGLE_OR_AROMATIC:
        return bond.order in (BondOrder.SINGLE, BondOrder.AROMATIC)
    return bond.order is {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE,
                          ":": BondOrder.AROMATIC}[spec]


def parse_pattern(name: str, text: str) -> PatternGraph:
    atoms: list[PatternAtom] = []
    bonds: list[tuple[int, int, str]] = []
    stack: list[int] = []
    rings: dict[str, tuple[int, str | None]] = {}
    prev: int | None = None
    pending: str | None = None
    i = 0
    while i < len(text):
        ch = text[i]
        atom = None
        if ch == "[":
            end = text.index("]", i)
            atom = _parse_pattern_bracket(text[i + 1:end])
            i = end + 1
        elif text.startswith(("Cl", "Br"), i):
            atom = PatternAtom(text[i:i + 2])
            i += 2
        elif ch == "X":
            atom = PatternAtom()
            i += 1
        elif ch in "BCNOPSFI":
            atom = PatternAtom(ch)
            i += 1
        elif ch in "bcnops":
            atom = PatternAtom(ch.upper(), aromatic=True)
            i += 1
        elif ch in "-=#:~@":
            pending = ch
            i += 1
            continue
        elif ch == "(":
            stack.append(prev)
            i += 1
            continue
        elif ch == ")":
            prev = stack.pop()
            i += 1
            continue
        elif ch.isdigit():
            if ch in rings:
                other, order = rings.pop(ch)
                bonds.append((other, prev, pending or order or _SINGLE_OR_AROMATIC))
            else:
                rings[ch] = (prev, pending)
            pending = None
            i += 1
            continue
        else:
            raise ValueError(f"bad pattern character {ch!r} in {text!r}")
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            bonds.append((prev, idx, pending or _SINGLE_OR_AROMATIC))
        pending = None
        prev = idx
    if rings or stack:
        raise ValueError(f"unbalanced pattern {text!r}")
    if len(atoms) > 12:
        raise ValueError(f"pattern {name} has more than 12 atoms")
    adj: list[list[tuple[int, str]]] = [[] for _ in atoms]
    for a, b, spec in bonds:
        adj[a].append((b, spec))
        adj[b].append((a, spec))
    return PatternGraph(name, tuple(atoms), tuple(bonds), text, tuple(tuple(x) for x in adj))


def _parse_pattern_bracket(body: str) -> PatternAtom:
    fields = body.split(";")
    head, prims = fields[0], fields[1:]
    kw: dict = {}
    if head == "X":
        pass
    elif head in ("Cl", "Br") or head in tuple("BCNOPSFI"):
        kw["element"] = head
    elif head in tuple("bcnops"):
        kw["element"], kw["aromatic"] = head.upper(), True
    else:
        raise ValueError(f"bad pattern atom [{body}]")
    kw.setdefault("charge", 0)
    for p in prims:
        if p in ("+", "-"):
            kw["charge"] = 1 if p == "+" else -1
        elif p.startswith("H"):
            kw["hcount"] = int(p[1:] or 1)
        elif p.startswith("D"):
            kw["degree"] = int(p[1:])
        elif p == "R":
            kw["ring"] = True
        elif p == "!R":
            kw["ring"] = False
        elif p == "A":
            kw["aromatic"] = False
        elif p == "a":
            kw["aromatic"] = True
        else:
            raise ValueError(f"bad pattern primitive {p!r} in [{body}]")
    return PatternAtom(**kw)


def has_match(pattern: PatternGraph, mol: MolGraph) -> bool:
    """Backtracking subgraph monomorphism with label and degree pruning."""
    n = len(pattern.atoms)
    if n == 0:
        return True
    if n > len(mol.atoms):
        return False
    pdeg = [len(x) for x in pattern._adj]
    mapping = [-1] * n
    used = set()

    def extend(i: int) -> bool:
        if i == n:
            return True
        earlier = [(j, spec) for j, spec in pattern._adj[i] if j < i]
        if earlier:
            anchor, _ = earlier[0]
            candidates = [nb for nb, _ in mol.neighbors[mapping[anchor]]]
        else:
            candidates = range(len(mol.atoms))
        for t in candidates:
            if t in used or mol.degree(t) < pdeg[i] or not pattern.atoms[i].matches(mol, t):
                continue
            ok = True
            for j, spec in earlier:
                bond = mol.bond_index.get((t, mapping[j]) if t < mapping[j] else (mapping[j], t))
                if bond is None or not _bond_ok(spec, mol, bond):
                    ok = False
                    break
            if not ok:
                continue
            mapping[i] = t
            used.add(t)
            if extend(i + 1):
                return True
            used.discard(t)
            mapping[i] = -1
        return False

    return extend(0)


def load_patterns(path: str | Path | None = None) -> list[PatternGraph]:
    if path is None:
        text = resources.files("safeflow.data").joinpath("functional_groups.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, pat = line.split(None, 1)
        patterns.append(parse_pattern(name, pat.strip()))
    return patterns


_DEFAULT: list[PatternGraph] = []


def _default_patterns() -> list[PatternGraph]:
    if not _DEFAULT:
        _DEFAULT.extend(load_patterns())
    return _DEFAULT


def group_names(patterns: Iterable[PatternGraph] | None = None) -> list[str]:
    pats = _default_patterns() if patterns is None else patterns
    names = []
    for p in pats:
        if p.name not in names:
            names.append(p.name)
    return names + list(COMPUTED_GROUPS)


def _aromatic_rings(mol: MolGraph) -> list[tuple[int, ...]]:
    return [ring for ring in mol.rings if all(mol.bonds[k].order is BondOrder.AROMATIC for k in ring)]


def functional_groups(mol: MolGraph, patterns: Iterable[PatternGraph] | None = None) -> set[str]:
    found = set()
    for p in _default_patterns() if patterns is None else patterns:
        if p.name not in found and has_match(p, mol):
            found.add(p.name)
    arom = _aromatic_rings(mol)
    for ring in arom:
        atoms = {a for k in ring for a in (mol.bonds[k].begin, mol.bonds[k].end)}
        if any(mol.atoms[a].element != "C" for a in atoms):
            found.add("heteroaromatic")
            break
    ring_sets = [set(r) for r in arom]
    if any(ring_sets[i] & ring_sets[j] for i in range(len(ring_sets)) for j in range(i + 1, len(ring_sets))):
        found.add("polycyclic_aromatic")
    return found


def fg_scores(truth: set[str], pred: set[str], known: Iterable[str] | None = None) -> tuple[float, float, float]:
    """Precision, recall and F1 of predicted groups; both empty scores (1, 1, 1)."""
    names = set(group_names() if known is None else known)
    unknown = (truth | pred) - names
    if unknown:
        raise ValueError(f"unknown functional group name(s): {sorted(unknown)}")
    if not truth and not pred:
        return 1.0, 1.0, 1.0
    tp = len(truth & pred)
    fp = len(pred - truth)
    fn = len(truth - pred)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
