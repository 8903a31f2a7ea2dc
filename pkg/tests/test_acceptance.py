"""Acceptance criteria 1-9, one test each; a PASS/FAIL line per criterion is printed at the end of the run."""

import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record_criterion
from oracles import (aggregation_contrast_rows, brute_force_common_edges, finite_difference_report,
                     grad_check_setup, random_labeled_graph)
from safeflow.chemmetrics import fg_scores, mces_distance
from safeflow.cli import main
from safeflow.evaluate import RankedCandidates, aggregate, topk_report
from safeflow.flow import interpolate, time_grid, transition_probs, velocity_from_posterior
from safeflow.molgraph import mol_equal, parse_smiles, write_canonical
from safeflow.safe import decode_safe, encode_safe, permute_fragments, training_cuts
from safeflow.toyset import toy_corpus

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def corpus_1000():
    return toy_corpus(1000, seed=2024, max_atoms=30)


def test_criterion_1_parser_canonical(corpus_1000):
    rng = random.Random(1)
    t0 = time.perf_counter()
    round_trip = invariant = 0
    for smi in corpus_1000:
        mol = parse_smiles(smi)
        canon = write_canonical(mol)
        round_trip += mol_equal(parse_smiles(canon), mol)
        order = list(range(mol.num_atoms))
        rng.shuffle(order)
        invariant += write_canonical(mol.permute(order)) == canon
    elapsed = time.perf_counter() - t0
    n = len(corpus_1000)
    ok = round_trip == n and invariant == n and elapsed < 10 and max(parse_smiles(s).num_atoms for s in corpus_1000) <= 30
    record_criterion(1, ok, f"round-trip {round_trip}/{n}, render-invariant {invariant}/{n}, {elapsed:.1f}s (< 10s)")
    assert ok


def test_criterion_2_safe_permutation_invariance(corpus_1000):
    rng = random.Random(2)
    t0 = time.perf_counter()
    checked = good = 0
    for smi in corpus_1000:
        mol = parse_smiles(smi)
        cuts = training_cuts(mol)
        if not cuts:
            continue
        text = encode_safe(mol, cuts)
        for _ in range(20):
            checked += 1
            good += mol_equal(decode_safe(permute_fragments(text, rng)), mol)
    elapsed = time.perf_counter() - t0
    ok = checked > 0 and good == checked and elapsed < 30
    record_criterion(2, ok, f"{good}/{checked} permuted decodings equal, {elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_3_flow_invariants():
    rng = np.random.default_rng(3)
    worst_sum = 0.0
    for _ in range(10_000):
        k = int(rng.integers(2, 50))
        u = velocity_from_posterior(rng.dirichlet(np.ones(k)), int(rng.integers(k)), float(rng.uniform(0, 0.999)))
        worst_sum = max(worst_sum, abs(float(u.sum())))
    simplex_ok, worst_terminal = True, 0.0
    for steps in (1, 2, 10, 50):
        for t, dt in time_grid(steps):
            post = rng.dirichlet(np.ones(8), size=64)
            q = transition_probs(post, rng.integers(0, 8, 64), t, dt)
            simplex_ok &= bool(np.all(q >= 0) and np.allclose(q.sum(axis=1), 1.0, atol=1e-12))
        t, dt = time_grid(steps)[-1]
        post = rng.dirichlet(np.ones(8), size=64)
        worst_terminal = max(worst_terminal, float(np.max(np.abs(transition_probs(post, rng.integers(0, 8, 64), t, dt) - post))))
    k, n = 12, 100_000
    worst_sigma = 0.0
    for t in (0.1, 0.5, 0.9):
        x1, x0 = rng.integers(0, k, n), rng.integers(0, k, n)
        p = t + (1 - t) / k
        frac = float(np.mean(interpolate(x0, x1, t, rng) == x1))
        worst_sigma = max(worst_sigma, abs(frac - p) / math.sqrt(p * (1 - p) / n))
    ok = worst_sum < 1e-9 and simplex_ok and worst_terminal < 1e-12 and worst_sigma < 3
    record_criterion(3, ok, f"max|sum u|={worst_sum:.1e}, simplex {'ok' if simplex_ok else 'violated'}, "
                            f"terminal err={worst_terminal:.1e}, marginal {worst_sigma:.2f} sigma")
    assert ok


def test_criterion_4_gradient_check():
    t0 = time.perf_counter()
    params, loss = grad_check_setup()
    report = finite_difference_report(loss, params, h=1e-5)
    elapsed = time.perf_counter() - t0
    worst_name = max(report, key=report.get)
    ok = report[worst_name] < 1e-4 and elapsed < 60
    record_criterion(4, ok, f"{len(report)} parameter tensors, max rel err {report[worst_name]:.1e} ({worst_name}), "
                            f"{elapsed:.1f}s (< 60s)")
    assert ok


# ---------------------------------------------------------------- end-to-end runs through the CLI


def _pipeline(root: Path, n: int, seed: int, max_atoms: int, config: Path, data_seed: int,
              unconditional: bool = False) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    corpus, vocab = root / "corpus.txt", root / "vocab.txt"
    t0 = time.perf_counter()
    assert main(["toy-corpus", "--n", str(n), "--seed", str(data_seed), "--max-atoms", str(max_atoms),
                 "--out", str(corpus)]) == 0
    assert main(["build-vocab", "--corpus", str(corpus), "--max-len", "40", "--out", str(vocab)]) == 0
    assert main(["train", "--config", str(config), "--corpus", str(corpus), "--vocab", str(vocab),
                 "--conditions", "simulate", "--seed", str(seed), "--quiet", "--out", str(root / "train")]) == 0
    t_train = time.perf_counter() - t0
    out = {"root": root, "train_s": t_train}
    runs = [("cond", False)] + ([("uncond", True)] if unconditional else [])
    for tag, uncond in runs:
        args = ["sample", "--config", str(config), "--checkpoint", str(root / "train" / "model.ckpt"),
                "--vocab", str(vocab), "--corpus", str(corpus), "--seed", str(seed),
                "--out", str(root / f"samples_{tag}")]
        args += ["--unconditional"] if uncond else ["--conditions", "simulate"]
        assert main(args) == 0
        assert main(["evaluate", "--predictions", str(root / f"samples_{tag}" / "samples.jsonl"), "--truth",
                     str(corpus), "--json", str(root / f"summary_{tag}.json"), "--out", str(root / f"eval_{tag}")]) == 0
        out[tag] = json.loads((root / f"summary_{tag}.json").read_text())
    out["total_s"] = time.perf_counter() - t0
    return out


MEMO = dict(n=32, seed=11, max_atoms=14, data_seed=7)


@pytest.fixture(scope="module")
def memorization_run(tmp_path_factory):
    return _pipeline(tmp_path_factory.mktemp("memo_a"), config=CONFIGS / "memorize.cfg", **MEMO)


@pytest.mark.slow
def test_criterion_5_memorization(memorization_run):
    s = memorization_run["cond"]
    top1, top10 = s["per_spectrum.hit1"], s["per_spectrum.hit10"]
    total = memorization_run["total_s"]
    ok = top1 >= 0.90 and top10 >= 0.95 and total < 900
    record_criterion(5, ok, f"top-1 {top1:.3f} (>= 0.90), top-10 {top10:.3f} (>= 0.95), validity "
                            f"{s['per_spectrum.validity']:.3f}, train {memorization_run['train_s']:.0f}s, "
                            f"total {total:.0f}s (< 900s)")
    assert ok


@pytest.mark.slow
def test_criterion_6_conditioning_signal(tmp_path):
    run = _pipeline(tmp_path / "held_in", n=200, seed=13, max_atoms=14, data_seed=8,
                    config=CONFIGS / "conditioning.cfg", unconditional=True)
    cond, uncond = run["cond"]["per_spectrum.hit10"], run["uncond"]["per_spectrum.hit10"]
    ok = cond - uncond >= 0.10
    record_criterion(6, ok, f"conditional top-10 {cond:.3f} vs unconditional {uncond:.3f}, "
                            f"gap {cond - uncond:+.3f} (>= +0.10), {run['total_s']:.0f}s")
    assert ok


def test_criterion_7_mces_oracle():
    rng = random.Random(7)
    t0 = time.perf_counter()
    agree = common = 0
    for _ in range(100):
        a, b = (random_labeled_graph(rng, max_atoms=8, max_edges=8, min_atoms=5, min_edges=5, elements="CCCN")
                for _ in range(2))
        r = mces_distance(a, b)
        best = brute_force_common_edges(a, b)
        common += best
        agree += r.exact and r.distance == a.num_bonds + b.num_bonds - 2 * best
    elapsed = time.perf_counter() - t0
    ok = agree == 100 and elapsed < 60
    record_criterion(7, ok, f"{agree}/100 pairs equal to exhaustive enumeration "
                            f"(mean common edges {common / 100:.1f}), {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_8_metric_identities():
    pool = toy_corpus(30, seed=88, max_atoms=12)
    rng = random.Random(8)
    monotone = True
    for _ in range(20):
        cands = rng.sample(pool, 15)
        ranked = RankedCandidates(tuple((c, 15 - i) for i, c in enumerate(cands)), 100, 0)
        row = topk_report(ranked, parse_smiles(rng.choice(pool)), k_values=(1, 5, 10))
        for a, b in ((1, 5), (5, 10)):
            monotone &= row.hit[a] <= row.hit[b]
            monotone &= row.max_tanimoto[a] <= row.max_tanimoto[b]
            monotone &= row.min_mces[a] >= row.min_mces[b]
    rows = aggregation_contrast_rows()
    per_spec, per_mol = aggregate(rows, "spectrum")["hit1"], aggregate(rows, "molecule")["hit1"]
    agg_ok = per_spec == 0.5 and abs(per_mol - 0.01) < 1e-15
    fg_ok = (fg_scores({"ester", "amide"}, {"ester", "nitro"}) == (0.5, 0.5, 0.5)
             and fg_scores({"ester"}, {"ester"}) == (1.0, 1.0, 1.0))
    ok = monotone and agg_ok and fg_ok
    record_criterion(8, ok, f"monotone {monotone}, aggregation {per_spec} / {per_mol:.2f}, fg cases {fg_ok}")
    assert ok


@pytest.mark.slow
def test_criterion_9_determinism(memorization_run, tmp_path):
    first = memorization_run["root"]
    second = _pipeline(tmp_path / "memo_b", config=CONFIGS / "memorize.cfg", **MEMO)["root"]
    same = {
        "checkpoint": (first / "train" / "model.ckpt").read_bytes() == (second / "train" / "model.ckpt").read_bytes(),
        "samples": (first / "samples_cond" / "samples.jsonl").read_bytes()
        == (second / "samples_cond" / "samples.jsonl").read_bytes(),
        "report": (first / "eval_cond" / "report.csv").read_bytes() == (second / "eval_cond" / "report.csv").read_bytes(),
    }
    assert main(["sample", "--config", str(CONFIGS / "memorize.cfg"), "--checkpoint", str(first / "train" / "model.ckpt"),
                 "--vocab", str(first / "vocab.txt"), "--corpus", str(first / "corpus.txt"), "--conditions", "simulate",
                 "--seed", str(MEMO["seed"]), "--workers", "4", "--out", str(tmp_path / "workers4")]) == 0
    same["workers4"] = ((tmp_path / "workers4" / "samples.jsonl").read_bytes()
                        == (first / "samples_cond" / "samples.jsonl").read_bytes())
    ok = all(same.values())
    record_criterion(9, ok, ", ".join(f"{k} {'identical' if v else 'DIFFER'}" for k, v in same.items()))
    assert ok
