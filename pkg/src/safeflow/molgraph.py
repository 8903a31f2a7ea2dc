"""Molecular graphs, a SMILES-subset parser and a canonical SMILES writer.

The supported grammar covers organic-subset atoms, lowercase aromatic atoms,
bracket atoms with hydrogen count and charge, the bond symbols ``- = # :``
(``/`` and ``\\`` are read as single bonds), branches, ring closures ``1-9``
and ``%nn`` and dot-separated components.  Ring-closure numbers are shared
across dots, so ``C1.C1`` is ethane.  Stereo markers are accepted and dropped.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "ALLOWED_ELEMENTS",
    "Atom",
    "Bond",
    "BondOrder",
    "MolGraph",
    "SmilesError",
    "parse_smiles",
    "write_canonical",
    "mol_equal",
]

ALLOWED_ELEMENTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ELEMENTS = frozenset({"B", "C", "N", "O", "P", "S"})
ORGANIC_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}
ATOMIC_NUMBERS = {"B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "P": 15, "S": 16, "Cl": 17, "Br": 35, "I": 53}
# atoms that contribute one electron to the pi system when lowercase and H-free
_PI_DONORS = frozenset({"B", "C", "N", "P"})


class BondOrder(enum.IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> int:
        return 1 if self is BondOrder.AROMATIC else int(self)


class SmilesError(ValueError):
    """Raised for malformed or chemically invalid SMILES input."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    explicit_h: int | None = None
    aromatic: bool = False
    in_ring: bool = False


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder = BondOrder.SINGLE
    in_ring: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.begin, self.end) if self.begin < self.end else (self.end, self.begin)

    def other(self, idx: int) -> int:
        return self.end if idx == self.begin else self.begin


def _default_hcount(element: str, aromatic: bool, valence_sum: int) -> int:
    valences = ORGANIC_VALENCES[element]
    if aromatic:
        return max(0, valences[0] - valence_sum - 1)
    for v in valences:
        if v >= valence_sum:
            return v - valence_sum
    return -1


def _charged_max_valence(element: str, charge: int) -> int:
    base = max(ORGANIC_VALENCES[element])
    if element in ("N", "P", "O", "S"):
        return base + charge
    if element == "C":
        return 4 - abs(charge)
    if element == "B":
        return 3 - charge
    return base + charge


@dataclass(frozen=True)
class MolGraph:
    """Immutable labeled molecular graph.

    ``atoms`` and ``bonds`` are tuples; hydrogen counts, ring flags and
    adjacency are derived on construction through :meth:`build`.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    hcounts: tuple[int, ...] = field(default=(), compare=False)

    @classmethod
    def build(cls, atoms: Sequence[Atom], bonds: Sequence[Bond], validate: bool = True) -> "MolGraph":
        """Fill hydrogen counts and ring flags, optionally checking valences."""
        n = len(atoms)
        seen: set[tuple[int, int]] = set()
        for b in bonds:
            if b.begin == b.end or not (0 <= b.begin < n and 0 <= b.end < n):
                raise SmilesError(f"invalid bond endpoints {b.begin}-{b.end}")
            if b.key in seen:
                raise SmilesError(f"duplicate bond {b.begin}-{b.end}")
            seen.add(b.key)
        ring_bonds = _ring_bond_flags(n, bonds)
        ring_atoms = [False] * n
        new_bonds = []
        for b, ring in zip(bonds, ring_bonds):
            order = b.order
            # an aromatic bond outside any ring is a single bond (biaryl links)
            if order is BondOrder.AROMATIC and not ring:
                order = BondOrder.SINGLE
            if ring:
                ring_atoms[b.begin] = ring_atoms[b.end] = True
            new_bonds.append(Bond(b.begin, b.end, order, ring))
        new_atoms = tuple(
            a if a.in_ring == ring_atoms[i] else Atom(a.element, a.formal_charge, a.explicit_h, a.aromatic, ring_atoms[i])
            for i, a in enumerate(atoms)
        )
        valence_sums = [0] * n
        for b in new_bonds:
            valence_sums[b.begin] += b.order.valence
            valence_sums[b.end] += b.order.valence
        hcounts = []
        for i, a in enumerate(new_atoms):
            if a.explicit_h is not None:
                h = a.explicit_h
            elif a.formal_charge:
                h = 0
            else:
                h = _default_hcount(a.element, a.aromatic, valence_sums[i])
            if validate:
                _check_atom(i, a, valence_sums[i], h)
            hcounts.append(max(h, 0))
        mol = cls(new_atoms, tuple(new_bonds), tuple(hcounts))
        if validate:
            for b in mol.bonds:
                if b.order is BondOrder.AROMATIC and not (mol.atoms[b.begin].aromatic and mol.atoms[b.end].aromatic):
                    raise SmilesError(f"aromatic bond between non-aromatic atoms {b.begin}-{b.end}")
            _check_kekulizable(mol)
        return mol

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    @cached_property
    def neighbors(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom: tuple of ``(neighbor, bond_index)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for k, b in enumerate(self.bonds):
            adj[b.begin].append((b.end, k))
            adj[b.end].append((b.begin, k))
        return tuple(tuple(x) for x in adj)

    @cached_property
    def bond_index(self) -> dict[tuple[int, int], int]:
        return {b.key: k for k, b in enumerate(self.bonds)}

    def bond_between(self, i: int, j: int) -> Bond | None:
        k = self.bond_index.get((i, j) if i < j else (j, i))
        return None if k is None else self.bonds[k]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    @cached_property
    def valence_sums(self) -> tuple[int, ...]:
        sums = [0] * len(self.atoms)
        for b in self.bonds:
            sums[b.begin] += b.order.valence
            sums[b.end] += b.order.valence
        return tuple(sums)

    @cached_property
    def rings(self) -> tuple[tuple[int, ...], ...]:
        """Smallest set of smallest rings, each as a tuple of bond indices."""
        return _sssr(self)

    def components(self, removed_bonds: Iterable[int] = ()) -> list[list[int]]:
        """Connected components (sorted atom lists) after deleting ``removed_bonds``."""
        removed = set(removed_bonds)
        seen = [False] * len(self.atoms)
        comps = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                a = stack.pop()
                comp.append(a)
                for nb, k in self.neighbors[a]:
                    if k not in removed and not seen[nb]:
                        seen[nb] = True
                        stack.append(nb)
            comps.append(sorted(comp))
        return comps

    def permute(self, order: Sequence[int], bond_order: Sequence[int] | None = None) -> "MolGraph":
        """Relabel atoms: new atom ``i`` is old atom ``order[i]``."""
        inverse = [0] * len(order)
        for new, old in enumerate(order):
            inverse[old] = new
        atoms = [self.atoms[old] for old in order]
        bonds = [self.bonds[k] for k in (bond_order if bond_order is not None else range(len(self.bonds)))]
        bonds = [Bond(inverse[b.begin], inverse[b.end], b.order, b.in_ring) for b in bonds]
        return MolGraph(tuple(atoms), tuple(bonds), tuple(self.hcounts[old] for old in order))

    def subgraph(self, atom_indices: Sequence[int]) -> "MolGraph":
        """Induced subgraph keeping the parent's hydrogen counts and ring flags."""
        index = {a: i for i, a in enumerate(atom_indices)}
        bonds = [
            Bond(index[b.begin], index[b.end], b.order, b.in_ring)
            for b in self.bonds
            if b.begin in index and b.end in index
        ]
        return MolGraph(
            tuple(self.atoms[a] for a in atom_indices), tuple(bonds), tuple(self.hcounts[a] for a in atom_indices)
        )

    def __str__(self) -> str:
        return write_canonical(self)


def _check_atom(i: int, atom: Atom, valence_sum: int, h: int) -> None:
    if atom.element not in ORGANIC_VALENCES:
        raise SmilesError(f"unknown element {atom.element!r} on atom {i}")
    if atom.aromatic and atom.element not in AROMATIC_ELEMENTS:
        raise SmilesError(f"element {atom.element} cannot be aromatic (atom {i})")
    if atom.aromatic and not atom.in_ring:
        raise SmilesError(f"aromatic atom {i} is not in a ring")
    if h < 0:
        raise SmilesError(f"valence violation on atom {i} ({atom.element}, bond order sum {valence_sum})")
    total = valence_sum + h + (1 if atom.aromatic and atom.element in _PI_DONORS else 0)
    if atom.explicit_h is not None or atom.formal_charge:
        limit = _charged_max_valence(atom.element, atom.formal_charge)
        if atom.aromatic and atom.element in _PI_DONORS and total > limit:
            # pyrrole-type [nH] and charged aromatics carry no extra pi bond
            total -= 1
        if total > limit:
            raise SmilesError(f"valence violation on atom {i} ({atom.element}, charge {atom.formal_charge})")
    elif valence_sum > max(ORGANIC_VALENCES[atom.element]):
        raise SmilesError(f"valence violation on atom {i} ({atom.element}, bond order sum {valence_sum})")


def _ring_bond_flags(n: int, bonds: Sequence[Bond]) -> list[bool]:
    """A bond lies on a cycle iff it is not a bridge (iterative Tarjan)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, b in enumerate(bonds):
        adj[b.begin].append((b.end, k))
        adj[b.end].append((b.begin, k))
    disc = [-1] * n
    low = [0] * n
    is_bridge = [False] * len(bonds)
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, parent_edge, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == parent_edge:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, k, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                u = stack[-1][0]
                low[u] = min(low[u], low[v])
                if low[v] > disc[u]:
                    is_bridge[parent_edge] = True
    return [not x for x in is_bridge]


def _sssr(mol: MolGraph) -> tuple[tuple[int, ...], ...]:
    """Shortest cycle through every ring bond, reduced to an independent set over GF(2)."""
    ring_bonds = [k for k, b in enumerate(mol.bonds) if b.in_ring]
    if not ring_bonds:
        return ()
    n_ring_atoms = len({a for k in ring_bonds for a in (mol.bonds[k].begin, mol.bonds[k].end)})
    n_comp = len(
        [c for c in mol.components(k for k, b in enumerate(mol.bonds) if not b.in_ring) if mol.atoms[c[0]].in_ring]
    )
    nullity = len(ring_bonds) - n_ring_atoms + n_comp
    candidates = set()
    for k in ring_bonds:
        b = mol.bonds[k]
        path = _shortest_path_bonds(mol, b.begin, b.end, k)
        if path is not None:
            candidates.add(tuple(sorted(path + [k])))
    basis: list[int] = []  # reduced bitmasks
    chosen = []
    for cyc in sorted(candidates, key=lambda c: (len(c), c)):
        mask = 0
        for k in cyc:
            mask |= 1 << k
        for row in basis:
            mask = min(mask, mask ^ row)
        if mask:
            basis.append(mask)
            basis.sort(reverse=True)
            chosen.append(cyc)
            if len(chosen) == nullity:
                break
    return tuple(chosen)


def _shortest_path_bonds(mol: MolGraph, src: int, dst: int, skip_bond: int) -> list[int] | None:
    prev: dict[int, tuple[int, int]] = {src: (-1, -1)}
    frontier = [src]
    while frontier:
        nxt = []
        for a in frontier:
            for nb, k in mol.neighbors[a]:
                if k == skip_bond or nb in prev or not mol.bonds[k].in_ring:
                    continue
                prev[nb] = (a, k)
                if nb == dst:
                    path = []
                    cur = dst
                    while cur != src:
                        p, kk = prev[cur]
                        path.append(kk)
                        cur = p
                    return path
                nxt.append(nb)
        frontier = nxt
    return None


def _check_kekulizable(mol: MolGraph) -> None:
    """Aromatic atoms that need a pi double bond must admit a perfect matching."""
    need = set()
    for i, a in enumerate(mol.atoms):
        if not a.aromatic:
            continue
        if any(mol.bonds[k].order is BondOrder.DOUBLE for _, k in mol.neighbors[i]):
            continue
        if a.element in ("N", "P"):
            if a.formal_charge == 0:
                needs = mol.hcounts[i] == 0 and mol.degree(i) == 2
            else:
                needs = a.formal_charge == 1 and mol.hcounts[i] + mol.degree(i) == 3
        else:
            needs = a.element == "C" and a.formal_charge == 0
        if needs:
            need.add(i)
    if not need:
        return
    options = {
        i: [nb for nb, k in mol.neighbors[i] if nb in need and mol.bonds[k].order is BondOrder.AROMATIC]
        for i in need
    }
    unmatched = set(need)

    def solve() -> bool:
        if not unmatched:
            return True
        u = min(unmatched, key=lambda x: (sum(1 for v in options[x] if v in unmatched), x))
        unmatched.discard(u)
        for v in options[u]:
            if v in unmatched:
                unmatched.discard(v)
                if solve():
                    return True
                unmatched.add(v)
        unmatched.add(u)
        return False

    if not solve():
        raise SmilesError("cannot kekulize aromatic system")


# ---------------------------------------------------------------- parsing

_BOND_SYMBOLS = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE, ":": BondOrder.AROMATIC,
                 "/": BondOrder.SINGLE, "\\": BondOrder.SINGLE}
_ORGANIC_TWO = {"Cl", "Br"}
_ORGANIC_ONE = {"B", "C", "N", "O", "P", "S", "F", "I"}
_AROMATIC_ONE = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}


def parse_smiles(text: str) -> MolGraph:
    """Parse a SMILES string into a valence-checked :class:`MolGraph`."""
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    bond_keys: set[tuple[int, int]] = set()
    branch_stack: list[tuple[int, int]] = []
    open_rings: dict[int, tuple[int, BondOrder | None, int]] = {}
    prev: int | None = None
    pending: BondOrder | None = None
    pending_pos = -1
    i = 0
    n = len(text)

    def add_bond(a: int, b: int, order: BondOrder | None, pos: int) -> None:
        if a == b:
            raise SmilesError("ring closure bonds an atom to itself", pos)
        key = (a, b) if a < b else (b, a)
        if key in bond_keys:
            raise SmilesError("duplicate bond between the same atoms", pos)
        if order is None:
            order = BondOrder.AROMATIC if atoms[a].aromatic and atoms[b].aromatic else BondOrder.SINGLE
        bond_keys.add(key)
        bonds.append(Bond(a, b, order))

    def add_atom(atom: Atom, pos: int) -> None:
        nonlocal prev, pending
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, pending, pos)
        elif pending is not None:
            raise SmilesError("bond symbol without a preceding atom", pending_pos)
        pending = None
        prev = idx

    while i < n:
        ch = text[i]
        if ch == "[":
            atom, i = _parse_bracket(text, i)
            add_atom(atom, i)
            continue
        if text.startswith(("Cl", "Br"), i):
            add_atom(Atom(text[i:i + 2]), i)
            i += 2
            continue
        if ch in _ORGANIC_ONE:
            add_atom(Atom(ch), i)
            i += 1
            continue
        if ch in _AROMATIC_ONE:
            add_atom(Atom(_AROMATIC_ONE[ch], aromatic=True), i)
            i += 1
            continue
        if ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesError("two consecutive bond symbols", i)
            if prev is None:
                raise SmilesError("bond symbol without a preceding atom", i)
            pending, pending_pos = _BOND_SYMBOLS[ch], i
            i += 1
            continue
        if ch == "(":
            if prev is None:
                raise SmilesError("branch opened without a preceding atom", i)
            if pending is not None:
                raise SmilesError("bond symbol before branch", pending_pos)
            branch_stack.append((prev, i))
            i += 1
            continue
        if ch == ")":
            if not branch_stack:
                raise SmilesError("unmatched closing parenthesis", i)
            if pending is not None:
                raise SmilesError("dangling bond symbol before ')'", pending_pos)
            if prev is None or prev == branch_stack[-1][0] and text[i - 1] == "(":
                raise SmilesError("empty branch", i)
            prev = branch_stack.pop()[0]
            i += 1
            continue
        if ch.isdigit() or ch == "%":
            pos = i
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesError("'%' must be followed by two digits", i)
                num = int(digits)
                i += 3
            else:
                num = int(ch)
                i += 1
            if prev is None:
                raise SmilesError("ring closure without a preceding atom", pos)
            if num in open_rings:
                other, order, _ = open_rings.pop(num)
                if order is not None and pending is not None and order != pending:
                    raise SmilesError("conflicting ring-closure bond symbols", pos)
                add_bond(prev, other, pending if pending is not None else order, pos)
            else:
                open_rings[num] = (prev, pending, pos)
            pending = None
            continue
        if ch == ".":
            if pending is not None:
                raise SmilesError("bond symbol before '.'", pending_pos)
            if prev is None:
                raise SmilesError("'.' without a preceding atom", i)
            if branch_stack:
                raise SmilesError("'.' inside a branch", i)
            prev = None
            i += 1
            continue
        if ch == "*":
            raise SmilesError("wildcard atoms are not supported", i)
        if ch.isalpha():
            raise SmilesError(f"unknown element starting with {ch!r}", i)
        raise SmilesError(f"unexpected character {ch!r}", i)

    if branch_stack:
        raise SmilesError("unmatched opening parenthesis", branch_stack[-1][1])
    if pending is not None:
        raise SmilesError("dangling bond symbol at end of input", pending_pos)
    if open_rings:
        num, (_, _, pos) = min(open_rings.items(), key=lambda kv: kv[1][2])
        raise SmilesError(f"unmatched ring closure {num}", pos)
    if text and prev is None and atoms:
        raise SmilesError("trailing '.'", n - 1)
    return MolGraph.build(atoms, bonds)


def _parse_bracket(text: str, start: int) -> tuple[Atom, int]:
    end = text.find("]", start)
    if end < 0:
        raise SmilesError("unterminated bracket atom", start)
    body = text[start + 1:end]
    j = 0
    if j < len(body) and body[j].isdigit():
        raise SmilesError("isotopes are not supported", start + 1)
    if body[j:j + 2] in ("Cl", "Br"):
        element, aromatic = body[j:j + 2], False
        j += 2
    elif j < len(body) and body[j] in _ORGANIC_ONE:
        element, aromatic = body[j], False
        j += 1
    elif j < len(body) and body[j] in _AROMATIC_ONE:
        element, aromatic = _AROMATIC_ONE[body[j]], True
        j += 1
    elif j < len(body) and body[j] == "*":
        raise SmilesError("wildcard atoms are not supported", start + 1)
    else:
        raise SmilesError(f"unknown element in bracket atom [{body}]", start + 1)
    if j < len(body) and body[j].islower() and body[j].isalpha():
        raise SmilesError(f"unknown element in bracket atom [{body}]", start + 1)
    # chirality: @, @@, @TH1, @SP2 ...
    if j < len(body) and body[j] == "@":
        while j < len(body) and body[j] == "@":
            j += 1
        while j < len(body) and body[j].isupper() and body[j] != "H":
            j += 1
        while j < len(body) and body[j].isdigit():
            j += 1
    h = 0
    if j < len(body) and body[j] == "H":
        j += 1
        h = 1
        if j < len(body) and body[j].isdigit():
            h = int(body[j])
            j += 1
    charge = 0
    if j < len(body) and body[j] in "+-":
        sign = 1 if body[j] == "+" else -1
        j += 1
        if j < len(body) and body[j].isdigit():
            mag = 0
            while j < len(body) and body[j].isdigit():
                mag = mag * 10 + int(body[j])
                j += 1
            charge = sign * mag
        else:
            charge = sign
            while j < len(body) and body[j] == ("+" if sign > 0 else "-"):
                charge += sign
                j += 1
    if j < len(body) and body[j] == ":":
        j += 1
        while j < len(body) and body[j].isdigit():
            j += 1
    if j != len(body):
        raise SmilesError(f"malformed bracket atom [{body}]", start + 1 + j)
    return Atom(element, charge, h, aromatic), end + 1


# ---------------------------------------------------------------- canonical form

_MAX_CANON_LEAVES = 256


def _refine(mol: MolGraph, ranks: list[int]) -> list[int]:
    """Iterate neighborhood refinement until the number of classes is stable."""
    nbrs = [[(mol.bonds[k].order, nb) for nb, k in mol.neighbors[a]] for a in range(len(mol.atoms))]
    n_classes = len(set(ranks))
    while True:
        keys = [(ranks[a], sorted((o, ranks[nb]) for o, nb in nbrs[a])) for a in range(len(ranks))]
        ranks = _ranks_from_keys(keys)
        count = len(set(ranks))
        if count == n_classes:
            return ranks
        n_classes = count


def _ranks_from_keys(keys: list) -> list[int]:
    """Rank = number of atoms with a strictly smaller key."""
    order = sorted(range(len(keys)), key=keys.__getitem__)
    ranks = [0] * len(keys)
    for pos, a in enumerate(order):
        if pos and keys[a] == keys[order[pos - 1]]:
            ranks[a] = ranks[order[pos - 1]]
        else:
            ranks[a] = pos
    return ranks


def _initial_ranks(mol: MolGraph) -> list[int]:
    keys = [
        (ATOMIC_NUMBERS[a.element], a.aromatic, mol.degree(i), a.formal_charge, mol.hcounts[i], a.in_ring)
        for i, a in enumerate(mol.atoms)
    ]
    return _ranks_from_keys(keys)


def canonical_rankings(mol: MolGraph) -> list[list[int]]:
    """Discrete rankings reachable by refinement plus tie breaking.

    Every member of the first tied class is tried in turn.  Tied terminal
    atoms sharing a neighbor and bond order are interchangeable, so only one
    of them is branched on.
    """
    results: list[list[int]] = []
    budget = [_MAX_CANON_LEAVES]

    def recurse(ranks: list[int]) -> None:
        ranks = _refine(mol, ranks)
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = [r for r, c in counts.items() if c > 1]
        if not tied:
            results.append(ranks)
            budget[0] -= 1
            return
        target = min(tied)
        members = [a for a, r in enumerate(ranks) if r == target]
        if _interchangeable_leaves(mol, members) or budget[0] <= 0:
            members = members[:1]
        for a in members:
            if budget[0] <= 0 and results:
                return
            broken = [r + 1 if (r == target and b != a) else r for b, r in enumerate(ranks)]
            recurse(broken)

    if mol.atoms:
        recurse(_initial_ranks(mol))
    else:
        results.append([])
    return results


def _interchangeable_leaves(mol: MolGraph, members: list[int]) -> bool:
    sig = set()
    for a in members:
        if mol.degree(a) != 1:
            return False
        nb, k = mol.neighbors[a][0]
        sig.add((nb, mol.bonds[k].order))
    return len(sig) == 1


def _format_ring_number(num: int) -> str:
    return str(num) if num < 10 else f"%{num:02d}"


def _bond_symbol(mol: MolGraph, bond: Bond) -> str:
    if bond.order is BondOrder.DOUBLE:
        return "="
    if bond.order is BondOrder.TRIPLE:
        return "#"
    if bond.order is BondOrder.SINGLE and mol.atoms[bond.begin].aromatic and mol.atoms[bond.end].aromatic:
        return "-"
    return ""


def atom_symbol(mol: MolGraph, i: int) -> str:
    a = mol.atoms[i]
    h = mol.hcounts[i]
    sym = a.element.lower() if a.aromatic else a.element
    if a.formal_charge == 0 and _default_hcount(a.element, a.aromatic, mol.valence_sums[i]) == h:
        return sym
    out = "[" + sym
    if h:
        out += "H" if h == 1 else f"H{h}"
    if a.formal_charge:
        sign = "+" if a.formal_charge > 0 else "-"
        mag = abs(a.formal_charge)
        out += sign if mag == 1 else f"{sign}{mag}"
    return out + "]"


def write_smiles(
    mol: MolGraph,
    ranks: Sequence[int],
    cut_bonds: Sequence[int] = (),
    attachment_numbers: dict[int, int] | None = None,
) -> list[str]:
    """Render each component of ``mol`` minus ``cut_bonds`` as a SMILES string.

    Traversal starts at the lowest-ranked atom and visits neighbors in rank
    order.  Every cut bond is written as a ring-closure pair carrying the
    number from ``attachment_numbers``; ring numbers used inside a component
    avoid those.  Returns one string per component in component order.
    """
    cut = set(cut_bonds)
    attachment_numbers = attachment_numbers or {}
    reserved = set(attachment_numbers.values())
    attach_at: dict[int, list[tuple[int, int]]] = {}
    for k in cut:
        b = mol.bonds[k]
        num = attachment_numbers[k]
        attach_at.setdefault(b.begin, []).append((num, k))
        attach_at.setdefault(b.end, []).append((num, k))

    sorted_nbrs = [
        sorted(((ranks[nb], nb, k) for nb, k in mol.neighbors[a] if k not in cut)) for a in range(len(mol.atoms))
    ]
    visited = [False] * len(mol.atoms)
    out = []
    for comp in mol.components(cut):
        start = min(comp, key=ranks.__getitem__)
        children: dict[int, list[tuple[int, int]]] = {}
        closures: dict[int, list[tuple[int, int, int]]] = {}  # atom -> (partner rank, bond, partner)
        closure_bonds: set[int] = set()
        finished: set[int] = set()
        # iterative DFS establishing tree edges and ring-closure bonds
        visited[start] = True
        stack = [(start, -1, iter(sorted_nbrs[start]))]
        while stack:
            a, parent_bond, it = stack[-1]
            pushed = False
            for _, nb, k in it:
                if k == parent_bond or k in closure_bonds:
                    continue
                if visited[nb]:
                    if nb not in finished:
                        closure_bonds.add(k)
                        closures.setdefault(nb, []).append((ranks[a], k, a))
                        closures.setdefault(a, []).append((ranks[nb], k, nb))
                    continue
                visited[nb] = True
                children.setdefault(a, []).append((nb, k))
                stack.append((nb, k, iter(sorted_nbrs[nb])))
                pushed = True
                break
            if not pushed:
                finished.add(a)
                stack.pop()

        parts: list[str] = []
        open_nums: dict[int, int] = {}
        used: set[int] = set()
        emitted: set[int] = set()
        work: list[tuple[str, int, int]] = [("atom", start, -1)]
        while work:
            kind, a, via = work.pop()
            if kind == "text":
                parts.append(")" if a == 1 else "(")
                continue
            if via >= 0:
                parts.append(_bond_symbol(mol, mol.bonds[via]))
            parts.append(atom_symbol(mol, a))
            emitted.add(a)
            ring_part = []
            for _, k, partner in sorted(closures.get(a, ())):
                if partner in emitted:
                    num = open_nums.pop(k)
                    used.discard(num)
                    ring_part.append(_format_ring_number(num))
                else:
                    num = 1
                    while num in used or num in reserved:
                        num += 1
                    used.add(num)
                    open_nums[k] = num
                    ring_part.append(_bond_symbol(mol, mol.bonds[k]) + _format_ring_number(num))
            for num, k in sorted(attach_at.get(a, ())):
                ring_part.append(_bond_symbol(mol, mol.bonds[k]) + _format_ring_number(num))
            parts.extend(ring_part)
            kids = children.get(a, [])
            # push in reverse so the first child is rendered first; all but last are branches
            for idx in range(len(kids) - 1, -1, -1):
                nb, k = kids[idx]
                if idx < len(kids) - 1:
                    work.append(("text", 1, -1))
                    work.append(("atom", nb, k))
                    work.append(("text", 0, -1))
                else:
                    work.append(("atom", nb, k))
        out.append("".join(parts))
    return out


def write_canonical(mol: MolGraph) -> str:
    """Deterministic canonical SMILES, invariant under atom relabeling."""
    if not mol.atoms:
        return ""
    best = None
    for ranks in canonical_rankings(mol):
        text = ".".join(sorted(write_smiles(mol, ranks)))
        if best is None or text < best:
            best = text
    assert best is not None
    return best


def mol_equal(a: MolGraph, b: MolGraph) -> bool:
    return write_canonical(a) == write_canonical(b)
