import csv
import math

import pytest

from safeflow.evaluate import (RankedCandidates, aggregate, canonical_from_safe, rank_by_frequency, report_columns,
                               stratify, summarize, topk_report, write_report, write_strata)
from safeflow.molgraph import parse_smiles, write_canonical

from oracles import aggregation_contrast_rows, metric_row

canon = lambda s: s  # noqa: E731


def test_rank_by_frequency_examples():
    r = rank_by_frequency(["a", "b", "a", "c", "b", "a"], canonicalize=canon)
    assert r.entries == (("a", 3), ("b", 2), ("c", 1))
    r = rank_by_frequency(["z", "x", "y"], canonicalize=canon)
    assert r.top(3) == ["x", "y", "z"]
    r = rank_by_frequency(["?", "?"], canonicalize=lambda s: None)
    assert r.entries == () and r.n_invalid == 2 and r.n_valid == 0


def test_rank_merges_equivalent_safe_strings():
    r = rank_by_frequency(["CC1.OC1", "OC1.CC1", "C1CC1", "not(valid"])
    assert r.n_invalid == 1
    assert r.entries[0] == (write_canonical(parse_smiles("CCCO")), 2)


def test_canonical_from_safe_rejects_garbage():
    assert canonical_from_safe("") is None
    assert canonical_from_safe("CC1.CC2") is None
    assert canonical_from_safe("c1ccccc1") == write_canonical(parse_smiles("c1ccccc1"))


def _ranked(smiles):
    return RankedCandidates(tuple((write_canonical(parse_smiles(s)), 10 - i) for i, s in enumerate(smiles)), 100, 0)


def test_topk_truth_first():
    row = topk_report(_ranked(["CCO", "CCC"]), parse_smiles("OCC"))
    assert row.hit == {1: True, 10: True}
    assert row.max_tanimoto[1] == 1.0 and row.min_mces[1] == 0


def test_topk_truth_at_rank_five():
    row = topk_report(_ranked(["C", "CC", "CCC", "CCCC", "CCO", "CCN"]), parse_smiles("CCO"))
    assert row.hit == {1: False, 10: True}


def test_topk_truth_absent_and_empty():
    row = topk_report(_ranked(["CCC"]), parse_smiles("CCO"), k_values=(1, 5, 10))
    assert not any(row.hit.values())
    empty = topk_report(RankedCandidates((), 100, 100), parse_smiles("CCO"))
    assert empty.hit == {1: False, 10: False}
    assert empty.max_tanimoto[1] is None and empty.min_mces[10] is None
    with pytest.raises(ValueError):
        topk_report(_ranked(["C"]), parse_smiles("C"), k_values=(0,))


def test_metric_monotonicity_across_k():
    import random
    from safeflow.toyset import toy_corpus
    pool = toy_corpus(15, seed=21, max_atoms=10)
    rng = random.Random(0)
    for _ in range(8):
        cands = rng.sample(pool, 12)
        row = topk_report(_ranked(cands), parse_smiles(rng.choice(pool)), k_values=(1, 3, 10))
        for a, b in ((1, 3), (3, 10)):
            assert row.hit[a] <= row.hit[b]
            assert row.max_tanimoto[a] <= row.max_tanimoto[b]
            assert row.min_mces[a] >= row.min_mces[b]


def test_aggregation_contrast():
    rows = aggregation_contrast_rows()
    assert aggregate(rows, "spectrum")["hit1"] == 0.5
    assert aggregate(rows, "molecule")["hit1"] == pytest.approx(0.01, abs=1e-15)
    same = [metric_row("CCO", i % 2 == 0) for i in range(6)]
    assert aggregate(same, "spectrum") == aggregate(same, "molecule")
    with pytest.raises(ValueError):
        aggregate(rows, "batch")


def test_aggregate_skips_null_metrics():
    rows = [metric_row("CCO", True), metric_row("CCN", False)]
    rows[1].max_tanimoto = {1: None, 10: None}
    agg = aggregate(rows)
    assert agg["tanimoto1"] == 1.0 and agg["hit1"] == 0.5


def test_stratify_half_open():
    rows = [metric_row("CCO", True, n_atoms=10)]
    bins = stratify(rows, "n_atoms", [0, 10, 20, math.inf])
    assert [b.count for b in bins] == [0, 1, 0]
    assert bins[0].metrics is None and bins[1].metrics["hit1"] == 1.0
    rows = [metric_row("CCO", True, n_atoms=n, n_rot=n % 4) for n in (5, 21, 22, 30)]
    flex = stratify(rows, "n_rotatable", [0, 2, 4], row_filter=lambda r: 20 <= r.n_atoms <= 25)
    assert sum(b.count for b in flex) == 2
    with pytest.raises(ValueError):
        stratify(rows, "mass", [0, 1])
    with pytest.raises(ValueError):
        stratify(rows, "n_atoms", [3, 3])


def test_report_files(tmp_path):
    rows = [metric_row("CCO", True, spectrum_id="0"), metric_row("CCN", False, spectrum_id="1")]
    rows[1].max_tanimoto = {1: None, 10: None}
    path = tmp_path / "r.csv"
    write_report(rows, path)
    with open(path, newline="") as fh:
        data = list(csv.reader(fh))
    assert data[0] == report_columns()
    assert data[1][data[0].index("hit1")] == "1"
    assert data[2][data[0].index("tanimoto1")] == "NA"
    write_strata(stratify(rows, "n_atoms", [0, 50]), tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("lo,hi,count")
    s = summarize(rows)
    assert s["n_records"] == 2 and s["per_spectrum.hit1"] == 0.5
