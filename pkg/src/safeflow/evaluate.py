"""Frequency ranking of generated candidates and top-k retrieval metrics."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .chemmetrics import DEFAULT_BUDGET, ecfp, mces_distance, rotatable_bond_count, tanimoto
from .molgraph import MolGraph, SmilesError, parse_smiles, write_canonical
from .safe import SafeError, decode_safe

DEFAULT_K = (1, 10)


def canonical_from_safe(text: str) -> str | None:
    """Canonical SMILES of a decoded sample, or None if it does not parse."""
    if not text:
        return None
    try:
        mol = decode_safe(text)
    except (SmilesError, SafeError):
        return None
    return write_canonical(mol) or None


@dataclass(frozen=True)
class RankedCandidates:
    entries: tuple[tuple[str, int], ...]
    total_samples: int
    n_invalid: int

    @property
    def n_valid(self) -> int:
        return self.total_samples - self.n_invalid

    def top(self, k: int) -> list[str]:
        return [s for s, _ in self.entries[:k]]


def rank_by_frequency(samples: Iterable[str],
                      canonicalize: Callable[[str], str | None] = canonical_from_safe) -> RankedCandidates:
    """Count canonical forms; order by count descending, then string ascending."""
    counts: Counter[str] = Counter()
    total = invalid = 0
    for s in samples:
        total += 1
        canon = canonicalize(s)
        if canon is None:
            invalid += 1
        else:
            counts[canon] += 1
    entries = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return RankedCandidates(entries, total, invalid)


@dataclass
class MetricRow:
    spectrum_id: str
    truth_canonical: str
    n_valid: int
    n_invalid: int
    hit: dict[int, bool]
    max_tanimoto: dict[int, float | None]
    min_mces: dict[int, int | None]
    mces_exact: bool | None
    n_atoms: int
    n_rotatable: int

    def validity(self) -> float:
        total = self.n_valid + self.n_invalid
        return self.n_valid / total if total else 0.0


def topk_report(ranked: RankedCandidates, truth: MolGraph, k_values: Sequence[int] = DEFAULT_K,
                spectrum_id: str = "", mces_budget: int = DEFAULT_BUDGET) -> MetricRow:
    ks = sorted(set(int(k) for k in k_values))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be positive integers")
    truth_canon = write_canonical(truth)
    cands = ranked.top(ks[-1])
    hits, tans, mcs = [], [], []
    exact = True
    truth_fp = ecfp(truth)
    for smi in cands:
        mol = parse_smiles(smi)
        hits.append(smi == truth_canon)
        tans.append(tanimoto(ecfp(mol), truth_fp))
        res = mces_distance(mol, truth, budget=mces_budget)
        exact = exact and res.exact
        mcs.append(res.distance)
    hit = {k: any(hits[:k]) for k in ks}
    if cands:
        max_tan = {k: max(tans[:k]) for k in ks}
        min_mces = {k: min(mcs[:k]) for k in ks}
        mces_exact: bool | None = exact
    else:
        max_tan = {k: None for k in ks}
        min_mces = {k: None for k in ks}
        mces_exact = None
    return MetricRow(spectrum_id, truth_canon, ranked.n_valid, ranked.n_invalid, hit, max_tan, min_mces,
                     mces_exact, truth.num_atoms, rotatable_bond_count(truth))


# ---------------------------------------------------------------- aggregation


def row_metrics(row: MetricRow) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for k, v in row.hit.items():
        out[f"hit{k}"] = 1.0 if v else 0.0
    for k, v in row.max_tanimoto.items():
        out[f"tanimoto{k}"] = v
    for k, v in row.min_mces.items():
        out[f"mces{k}"] = None if v is None else float(v)
    out["validity"] = row.validity()
    return out


def _mean_of(dicts: Sequence[dict[str, float | None]]) -> dict[str, float | None]:
    keys: list[str] = []
    for d in dicts:
        keys.extend(k for k in d if k not in keys)
    out: dict[str, float | None] = {}
    for key in keys:
        vals = [d[key] for d in dicts if d.get(key) is not None]
        out[key] = math.fsum(vals) / len(vals) if vals else None
    return out


def aggregate(rows: Sequence[MetricRow], grouping: str = "spectrum") -> dict[str, float | None]:
    """Mean metrics per spectrum, or per unique truth molecule (mean of group means).

    Null metrics (empty candidate lists) are left out of the mean.
    """
    if not rows:
        raise ValueError("cannot aggregate zero rows")
    if grouping == "spectrum":
        return _mean_of([row_metrics(r) for r in rows])
    if grouping == "molecule":
        groups: dict[str, list[MetricRow]] = {}
        for r in rows:
            groups.setdefault(r.truth_canonical, []).append(r)
        return _mean_of([_mean_of([row_metrics(r) for r in g]) for _, g in sorted(groups.items())])
    raise ValueError(f"unknown grouping {grouping!r}; use 'spectrum' or 'molecule'")


@dataclass
class StratumSummary:
    lo: float
    hi: float
    count: int
    metrics: dict[str, float | None] | None = field(default=None)


_PROPERTIES = {"n_atoms": lambda r: r.n_atoms, "n_rotatable": lambda r: r.n_rotatable}


def stratify(rows: Sequence[MetricRow], prop: str, edges: Sequence[float],
             row_filter: Callable[[MetricRow], bool] | None = None) -> list[StratumSummary]:
    """Bin rows into half-open intervals [e_i, e_{i+1}) of ``prop``."""
    if prop not in _PROPERTIES:
        raise ValueError(f"unknown property {prop!r}; use one of {sorted(_PROPERTIES)}")
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing with at least two entries")
    get = _PROPERTIES[prop]
    bins: list[list[MetricRow]] = [[] for _ in range(len(edges) - 1)]
    for r in rows:
        if row_filter is not None and not row_filter(r):
            continue
        v = get(r)
        for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
            if lo <= v < hi:
                bins[i].append(r)
                break
    return [StratumSummary(lo, hi, len(b), aggregate(b) if b else None) for (lo, hi), b in zip(zip(edges, edges[1:]), bins)]


# ---------------------------------------------------------------- output


def report_columns(k_values: Sequence[int] = DEFAULT_K) -> list[str]:
    ks = sorted(set(k_values))
    return (["spectrum_id", "truth_smiles", "n_valid", "n_invalid"] + [f"hit{k}" for k in ks]
            + [f"tanimoto{k}" for k in ks] + [f"mces{k}" for k in ks] + ["mces_exact", "n_atoms", "n_rot_bonds"])


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_report(rows: Sequence[MetricRow], path: str | Path, k_values: Sequence[int] = DEFAULT_K) -> None:
    ks = sorted(set(k_values))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(report_columns(ks))
        for r in rows:
            w.writerow([r.spectrum_id, r.truth_canonical, r.n_valid, r.n_invalid]
                       + [_fmt(r.hit[k]) for k in ks] + [_fmt(r.max_tanimoto[k]) for k in ks]
                       + [_fmt(r.min_mces[k]) for k in ks]
                       + [_fmt(r.mces_exact), r.n_atoms, r.n_rotatable])


def write_strata(strata: Sequence[StratumSummary], path: str | Path) -> None:
    keys: list[str] = []
    for s in strata:
        if s.metrics:
            keys.extend(k for k in s.metrics if k not in keys)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lo", "hi", "count"] + keys)
        for s in strata:
            vals = [_fmt((s.metrics or {}).get(k)) for k in keys]
            w.writerow([_fmt(float(s.lo)), _fmt(float(s.hi)), s.count] + vals)


def summarize(rows: Sequence[MetricRow]) -> dict[str, float | int | None]:
    summary: dict[str, float | int | None] = {"n_records": len(rows)}
    for grouping, tag in (("spectrum", "per_spectrum"), ("molecule", "per_molecule")):
        for key, val in aggregate(rows, grouping).items():
            summary[f"{tag}.{key}"] = val
    return summary


def summary_lines(summary: dict) -> list[str]:
    return [f"{k}={_fmt(v)}" for k, v in summary.items()]


def write_summary_json(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
