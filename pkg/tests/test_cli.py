import json
import subprocess
import sys

import pytest

from safeflow.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main

SMALL = ["--model-preset", "tiny", "--set", "d_model=16", "--set", "n_layers=1", "--set", "d_ff=32",
         "--set", "nbins=32"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["toy-corpus", "--n", "5", "--seed", "3", "--max-atoms", "10", "--out", str(d / "corpus.txt")]) == 0
    assert main(["build-vocab", "--corpus", str(d / "corpus.txt"), "--max-len", "40", "--out", str(d / "vocab.txt")]) == 0
    rc = main(["train", "--corpus", str(d / "corpus.txt"), "--vocab", str(d / "vocab.txt"), "--conditions", "simulate",
               "--seed", "5", "--epochs", "3", "--batch-size", "2", "--quiet", "--out", str(d / "run")] + SMALL)
    assert rc == 0
    return d


def _sample(d, out, *extra):
    return main(["sample", "--checkpoint", str(d / "run" / "model.ckpt"), "--vocab", str(d / "vocab.txt"),
                 "--corpus", str(d / "corpus.txt"), "--conditions", "simulate", "--set", "nbins=32", "--seed", "1",
                 "--steps", "4", "--samples-per-condition", "3", "--out", str(out), *extra])


def test_canonicalize_and_fragment(capsys, tmp_path):
    assert main(["canonicalize", "--smiles", "OCC"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "CCO"
    assert main(["canonicalize", "--smiles", "C1CC"]) == EXIT_DATA
    assert main(["fragment", "--smiles", "c1ccccc1CCN"]) == EXIT_OK
    assert "." in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path):
    assert main(["train", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["no-such-command"]) == EXIT_CONFIG


def test_train_outputs(workspace):
    run = workspace / "run"
    lines = (run / "loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss,token_loss" and len(lines) == 5
    cfg = (run / "config.txt").read_text()
    assert "seed=5" in cfg and "d_model=16" in cfg


def test_missing_seed_and_unknown_key(workspace, tmp_path):
    base = ["train", "--corpus", str(workspace / "corpus.txt"), "--vocab", str(workspace / "vocab.txt"),
            "--out", str(tmp_path / "o")]
    assert main(base) == EXIT_CONFIG
    assert main(base + ["--seed", "1", "--set", "colour=blue"]) == EXIT_CONFIG
    assert main(base + ["--seed", "1", "--lr", "-1"]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("seed=1\nnot a pair\n")
    assert main(base + ["--config", str(bad)]) == EXIT_CONFIG


def test_config_file_and_flag_precedence(workspace, tmp_path):
    conf = tmp_path / "c.cfg"
    conf.write_text("# run settings\nseed=5\nepochs=1\nbatch_size=2\nconditions=simulate\n"
                    "model_preset=tiny\nd_model=16\nn_layers=1\nd_ff=32\nnbins=32\n")
    rc = main(["train", "--config", str(conf), "--corpus", str(workspace / "corpus.txt"), "--vocab",
               str(workspace / "vocab.txt"), "--epochs", "2", "--quiet", "--out", str(tmp_path / "r")])
    assert rc == EXIT_OK
    assert len((tmp_path / "r" / "loss.csv").read_text().splitlines()) == 4


def test_training_is_reproducible(workspace, tmp_path):
    rc = main(["train", "--corpus", str(workspace / "corpus.txt"), "--vocab", str(workspace / "vocab.txt"),
               "--conditions", "simulate", "--seed", "5", "--epochs", "3", "--batch-size", "2", "--quiet",
               "--out", str(tmp_path / "again")] + SMALL)
    assert rc == EXIT_OK
    assert (tmp_path / "again" / "model.ckpt").read_bytes() == (workspace / "run" / "model.ckpt").read_bytes()


def test_sample_and_evaluate(workspace, tmp_path, capsys):
    assert _sample(workspace, tmp_path / "s") == EXIT_OK
    out = capsys.readouterr().out
    assert "records=5" in out and "samples=15" in out
    recs = [json.loads(line) for line in (tmp_path / "s" / "samples.jsonl").read_text().splitlines()]
    assert [r["id"] for r in recs] == ["0", "1", "2", "3", "4"]
    assert all(len(r["samples"]) == 3 for r in recs)
    rc = main(["evaluate", "--predictions", str(tmp_path / "s" / "samples.jsonl"), "--truth",
               str(workspace / "corpus.txt"), "--stratify", "n_atoms:0,10,inf", "--filter-atoms", "0,40",
               "--json", str(tmp_path / "summary.json"), "--out", str(tmp_path / "e")])
    assert rc == EXIT_OK
    assert "per_molecule.hit1=" in capsys.readouterr().out
    assert (tmp_path / "e" / "report.csv").read_text().startswith("spectrum_id,truth_smiles")
    assert (tmp_path / "e" / "strata_n_atoms.csv").exists()
    assert json.loads((tmp_path / "summary.json").read_text())["n_records"] == 5


def test_sample_unconditional(workspace, tmp_path):
    rc = main(["sample", "--checkpoint", str(workspace / "run" / "model.ckpt"), "--vocab", str(workspace / "vocab.txt"),
               "--corpus", str(workspace / "corpus.txt"), "--unconditional", "--seed", "1", "--steps", "2",
               "--samples-per-condition", "2", "--out", str(tmp_path / "u")])
    assert rc == EXIT_OK


def test_workers_match_single_process(workspace, tmp_path):
    assert _sample(workspace, tmp_path / "one") == EXIT_OK
    assert _sample(workspace, tmp_path / "two", "--workers", "2") == EXIT_OK
    assert (tmp_path / "one" / "samples.jsonl").read_bytes() == (tmp_path / "two" / "samples.jsonl").read_bytes()


def test_condition_dimension_mismatch_exits_3(workspace, tmp_path, capsys):
    rc = main(["sample", "--checkpoint", str(workspace / "run" / "model.ckpt"), "--vocab", str(workspace / "vocab.txt"),
               "--corpus", str(workspace / "corpus.txt"), "--conditions", "simulate", "--set", "nbins=64",
               "--seed", "1", "--out", str(tmp_path / "m")])
    assert rc == EXIT_DATA
    err = capsys.readouterr().err
    assert "32" in err and "64" in err


def test_vocab_mismatch_exits_3(workspace, tmp_path):
    other = tmp_path / "v.txt"
    other.write_text((workspace / "vocab.txt").read_text() + "Zz\n")
    rc = main(["sample", "--checkpoint", str(workspace / "run" / "model.ckpt"), "--vocab", str(other),
               "--corpus", str(workspace / "corpus.txt"), "--seed", "1", "--out", str(tmp_path / "m")])
    assert rc == EXIT_DATA


def test_unknown_prediction_id_exits_3(workspace, tmp_path):
    preds = tmp_path / "p.jsonl"
    preds.write_text(json.dumps({"id": "99", "samples": ["CCO"]}) + "\n")
    rc = main(["evaluate", "--predictions", str(preds), "--truth", str(workspace / "corpus.txt"),
               "--out", str(tmp_path / "e")])
    assert rc == EXIT_DATA


def test_divergence_exits_4(workspace, tmp_path):
    rc = main(["train", "--corpus", str(workspace / "corpus.txt"), "--vocab", str(workspace / "vocab.txt"),
               "--conditions", "simulate", "--seed", "5", "--epochs", "2", "--batch-size", "2", "--lr", "1e300",
               "--quiet", "--out", str(tmp_path / "boom")] + SMALL)
    assert rc == EXIT_NUMERIC


def test_simulate_spectra_and_descriptor_conditions(workspace, tmp_path):
    rc = main(["simulate-spectra", "--corpus", str(workspace / "corpus.txt"), "--out", str(tmp_path / "s.mgf"),
               "--descriptors-out", str(tmp_path / "d.csv"), "--nbins", "32"])
    assert rc == EXIT_OK
    assert _sample(workspace, tmp_path / "from_mgf", "--conditions", str(tmp_path / "s.mgf")) == EXIT_OK
    assert _sample(workspace, tmp_path / "from_csv", "--conditions", str(tmp_path / "d.csv")) == EXIT_OK
    a = (tmp_path / "from_mgf" / "samples.jsonl").read_bytes()
    assert a == (tmp_path / "from_csv" / "samples.jsonl").read_bytes()


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "safeflow.cli", "canonicalize", "--smiles", "C(C)O"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "CCO"
