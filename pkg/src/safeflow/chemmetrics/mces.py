"""Exact maximum common edge subgraph (MCES) distance with an expansion budget."""

from __future__ import annotations

from dataclasses import dataclass

from .. import _kernels
from ..molgraph import ATOMIC_NUMBERS, MolGraph, write_canonical

DEFAULT_BUDGET = 10_000_000


@dataclass(frozen=True)
class MCESResult:
    distance: int
    exact: bool
    common_edges: int
    expansions: int = 0


def _edge_labels(mol: MolGraph):
    elem = [ATOMIC_NUMBERS[a.element] for a in mol.atoms]
    edges, labels = [], []
    for b in mol.bonds:
        ea, eb = elem[b.begin], elem[b.end]
        edges.append((b.begin, b.end))
        labels.append((min(ea, eb), max(ea, eb), int(b.order)))
    return elem, edges, labels


def _search_order(edges, labels, rarity):
    """Rarest label first, then grow along edges touching already-chosen atoms."""
    remaining = set(range(len(edges)))
    touched: set[int] = set()
    order = []
    while remaining:
        frontier = [e for e in remaining if edges[e][0] in touched or edges[e][1] in touched]
        pool = frontier or list(remaining)
        e = min(pool, key=lambda k: (rarity[labels[k]], k))
        order.append(e)
        remaining.discard(e)
        touched.update(edges[e])
    return order


def prepare(a: MolGraph, b: MolGraph):
    """Arguments for ``_kernels.mces_search`` (shared by both backends)."""
    elem1, edges1, lab1 = _edge_labels(a)
    elem2, edges2, lab2 = _edge_labels(b)
    label_ids: dict[tuple, int] = {}
    for lab in sorted(set(lab1) | set(lab2)):
        label_ids[lab] = len(label_ids)
    ids1 = [label_ids[x] for x in lab1]
    ids2 = [label_ids[x] for x in lab2]
    count2 = [0] * len(label_ids)
    for x in ids2:
        count2[x] += 1
    order = _search_order(edges1, ids1, count2)
    by_label: dict[int, list[int]] = {}
    for e2, x in enumerate(ids2):
        by_label.setdefault(x, []).append(e2)
    cand_ptr, cand_idx = [0], []
    for e1 in order:
        cand_idx.extend(by_label.get(ids1[e1], ()))
        cand_ptr.append(len(cand_idx))
    return dict(
        edges1=edges1, elem1=elem1, labels1=ids1,
        edges2=edges2, elem2=elem2, labels2=ids2,
        order=order, cand_ptr=cand_ptr, cand_idx=cand_idx, n_labels=len(label_ids),
    )


def mces_distance(a: MolGraph, b: MolGraph, budget: int = DEFAULT_BUDGET, backend=None) -> MCESResult:
    """Distance ``|E1| + |E2| - 2 * common``; ``exact`` is False if the budget ran out.

    Edges correspond when bond orders agree and their endpoint elements agree
    as an unordered pair, under one consistent partial atom bijection.
    """
    m1, m2 = a.num_bonds, b.num_bonds
    if m1 and m1 == m2 and write_canonical(a) == write_canonical(b):
        return MCESResult(0, True, m1, 0)
    kernel = (backend or _kernels).mces_search
    common, expansions, exact = kernel(**prepare(a, b), budget=budget)
    return MCESResult(m1 + m2 - 2 * common, bool(exact), int(common), int(expansions))
