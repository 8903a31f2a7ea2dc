"""Command-line entry point: ``safeflow <command> [--long-options]``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import denoiser as dn
from .chemmetrics import DEFAULT_BUDGET
from .corpus import CorpusError, CorpusRecord, read_corpus, write_corpus
from .denoiser import CheckpointError, DivergenceError, VocabMismatchError
from .evaluate import (rank_by_frequency, stratify, summarize, summary_lines, topk_report, write_report,
                       write_strata, write_summary_json)
from .flow import SamplerConfig, sample_batch
from .molgraph import parse_smiles, write_canonical
from .safe import (SafeError, TokenizeError, Vocabulary, build_vocab, detokenize, encode_safe, split_tokens,
                   training_cuts)
from .specsim import (SpectrumFormatError, SpectrumRecord, bin_spectrum, is_mgf, load_descriptors, read_mgf,
                      simulate_spectrum, write_mgf)
from .toyset import toy_corpus
from .training import LR_SCHEDULES, Example, TrainConfig, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------- config


def _positive_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise ValueError("must be a positive integer")
    return n


def _nonneg_int(v: str) -> int:
    n = int(v)
    if n < 0:
        raise ValueError("must be >= 0")
    return n


def _positive_float(v: str) -> float:
    x = float(v)
    if not (x > 0 and math.isfinite(x)):
        raise ValueError("must be a positive finite number")
    return x


def _nonneg_float(v: str) -> float:
    x = float(v)
    if not (x >= 0 and math.isfinite(x)):
        raise ValueError("must be a finite number >= 0")
    return x


def _probability(v: str) -> float:
    x = float(v)
    if not 0.0 <= x <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return x


def _seed(v: str) -> int:
    n = int(v)
    if not 0 <= n < 2 ** 64:
        raise ValueError("must be a 64-bit unsigned integer")
    return n


def _k_list(v: str) -> str:
    ks = [int(x) for x in v.split(",") if x.strip()]
    if not ks or min(ks) < 1:
        raise ValueError("must be a comma-separated list of positive integers")
    return ",".join(str(k) for k in sorted(set(ks)))


def _boolean(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _lr_schedule(v: str) -> str:
    if v not in LR_SCHEDULES:
        raise ValueError(f"expected one of {', '.join(LR_SCHEDULES)}")
    return v


def _preset(v: str) -> str:
    if v not in ("default", "tiny"):
        raise ValueError("must be 'default' or 'tiny'")
    return v


SCHEMA: dict[str, tuple[Callable[[str], object], object]] = {
    "model_preset": (_preset, "default"),
    "d_model": (_positive_int, None),
    "n_layers": (_positive_int, None),
    "n_heads": (_positive_int, None),
    "d_ff": (_positive_int, None),
    "cond_dim": (_positive_int, 256),
    "lr": (_positive_float, 3e-4),
    "batch_size": (_positive_int, 64),
    "epochs": (_nonneg_int, 100),
    "cond_drop_prob": (_probability, 0.1),
    "lr_schedule": (_lr_schedule, "constant"),
    "fragment_permutation": (_boolean, True),
    "seed": (_seed, None),
    "steps": (_positive_int, 50),
    "guidance": (_nonneg_float, 1.5),
    "samples_per_condition": (_positive_int, 100),
    "workers": (_positive_int, 1),
    "nbins": (_positive_int, 256),
    "max_mz": (_positive_float, 1000.0),
    "max_len": (_positive_int, 96),
    "mces_budget": (_positive_int, DEFAULT_BUDGET),
    "k": (_k_list, "1,10"),
    "corpus": (str, None),
    "vocab": (str, None),
    "conditions": (str, "none"),
    "checkpoint": (str, None),
}

_DEFAULT_SIZES = {"d_model": 128, "n_layers": 4, "n_heads": 4, "d_ff": 512}


def parse_config_text(text: str, origin: str = "config") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def resolve_config(path: str | None, overrides: dict[str, str | None]) -> dict[str, object]:
    raw: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        raw.update(parse_config_text(text, path))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    cfg: dict[str, object] = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                cfg[key] = conv(str(raw[key]))
            except ValueError as exc:
                raise ConfigError(f"config key {key}={raw[key]!r}: {exc}") from exc
        else:
            cfg[key] = default
    sizes = dn.TINY_SIZES if cfg["model_preset"] == "tiny" else _DEFAULT_SIZES
    for key, val in sizes.items():
        if cfg[key] is None:
            cfg[key] = val
    if cfg["d_model"] % cfg["n_heads"]:
        raise ConfigError(f"d_model={cfg['d_model']} is not divisible by n_heads={cfg['n_heads']}")
    return cfg


def config_text(cfg: dict[str, object]) -> str:
    return "".join(f"{k}={'' if v is None else v}\n" for k, v in sorted(cfg.items()))


def _require(cfg: dict[str, object], *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join(missing)} (give a flag or a config entry)")


# ---------------------------------------------------------------- shared helpers


def _load_corpus(path: str) -> list[CorpusRecord]:
    try:
        return read_corpus(path)
    except CorpusError as exc:
        raise DataError(str(exc)) from exc


def _load_vocab(path: str) -> Vocabulary:
    try:
        return Vocabulary.load(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load vocabulary {path}: {exc}") from exc


def _safe_of(record: CorpusRecord) -> str:
    return encode_safe(record.mol, training_cuts(record.mol))


@dataclass(frozen=True)
class Condition:
    id: str
    vector: np.ndarray | None


def _conditions(cfg: dict[str, object], records: list[CorpusRecord] | None) -> list[Condition]:
    """Resolve the condition source: none, corpus, simulate, or an MGF/CSV path."""
    src = str(cfg["conditions"])
    if src == "none":
        if records is None:
            raise ConfigError("conditions=none needs a corpus to enumerate records")
        return [Condition(r.id, None) for r in records]
    if src == "corpus":
        if records is None:
            raise ConfigError("conditions=corpus needs a corpus")
        if records[0].vector is None:
            raise DataError("conditions=corpus but the corpus has no TAB-separated condition vectors")
        return [Condition(r.id, r.vector) for r in records]
    if src == "simulate":
        if records is None:
            raise ConfigError("conditions=simulate needs a corpus")
        return [Condition(r.id, bin_spectrum(simulate_spectrum(r.mol), cfg["nbins"], cfg["max_mz"])) for r in records]
    path = Path(src)
    if not path.exists():
        raise DataError(f"condition file {src} does not exist")
    try:
        if is_mgf(path):
            spectra = read_mgf(path)
            found = {s.id: bin_spectrum(s.spectrum, cfg["nbins"], cfg["max_mz"]) for s in spectra}
            order = [s.id for s in spectra]
        else:
            found, _ = load_descriptors(path)
            order = list(found)
    except SpectrumFormatError as exc:
        raise DataError(f"{src}: {exc}") from exc
    if records is None:
        return [Condition(i, found[i]) for i in order]
    missing = [r.id for r in records if r.id not in found]
    if missing:
        raise DataError(f"{src}: no condition for record id(s) {', '.join(missing[:5])}")
    return [Condition(r.id, found[r.id]) for r in records]


def _write_atomic(path: Path, data: bytes | str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, str):
        tmp.write_text(data, encoding="utf-8")
    else:
        tmp.write_bytes(data)
    tmp.replace(path)


def _prepare_out_dir(path: str) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def cmd_canonicalize(args) -> int:
    inputs = _smiles_inputs(args)
    out = []
    for label, smi in inputs:
        try:
            out.append(write_canonical(parse_smiles(smi)))
        except ValueError as exc:
            raise DataError(f"{label}: {exc}") from exc
    _emit(out, args.out)
    return EXIT_OK


def cmd_fragment(args) -> int:
    inputs = _smiles_inputs(args)
    out = []
    for label, smi in inputs:
        try:
            mol = parse_smiles(smi)
            out.append(encode_safe(mol, training_cuts(mol, cap=args.max_cuts)))
        except ValueError as exc:
            raise DataError(f"{label}: {exc}") from exc
    _emit(out, args.out)
    return EXIT_OK


def _smiles_inputs(args) -> list[tuple[str, str]]:
    if (args.smiles is None) == (args.input is None):
        raise ConfigError("give exactly one of --smiles or --input")
    if args.smiles is not None:
        return [("--smiles", args.smiles)]
    try:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc}") from exc
    return [(f"{args.input}:{i}", ln.split("\t")[0].strip()) for i, ln in enumerate(lines, start=1)
            if ln.strip() and not ln.startswith("#")]


def _emit(lines: list[str], out: str | None) -> None:
    text = "".join(line + "\n" for line in lines)
    if out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(Path(out), text)


def cmd_build_vocab(args) -> int:
    if args.max_len < 1:
        raise ConfigError("--max-len must be a positive integer")
    records = _load_corpus(args.corpus)
    safes = []
    for r in records:
        try:
            safes.append(_safe_of(r))
        except SafeError as exc:
            raise DataError(f"record {r.id}: {exc}") from exc
    report = build_vocab(safes, args.max_len)
    _write_atomic(Path(args.out), report.vocab.to_text())
    longest = max(len(split_tokens(s)) for s in safes)
    print(f"tokens={report.vocab.size}")
    print(f"max_len={args.max_len}")
    print(f"coverage={report.coverage:.6f}")
    print(f"excluded={len(report.excluded)}")
    print(f"longest_sequence={longest}")
    return EXIT_OK


def cmd_toy_corpus(args) -> int:
    if args.n < 1 or args.max_atoms < args.min_atoms:
        raise ConfigError("--n must be positive and --max-atoms >= --min-atoms")
    write_corpus(toy_corpus(args.n, args.seed, args.max_atoms, args.min_atoms), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    records = _load_corpus(args.corpus)
    out = [SpectrumRecord(r.id, simulate_spectrum(r.mol), write_canonical(r.mol)) for r in records]
    write_mgf(out, args.out)
    if args.descriptors_out:
        lines = [r.id + "," + ",".join(f"{v:.6f}" for v in bin_spectrum(s.spectrum, args.nbins, args.max_mz))
                 for r, s in zip(records, out)]
        _write_atomic(Path(args.descriptors_out), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, ("corpus", "vocab", "seed", "epochs", "lr", "batch_size",
                                                        "cond_drop_prob", "conditions", "model_preset")))
    _require(cfg, "corpus", "vocab", "seed")
    records = _load_corpus(str(cfg["corpus"]))
    vocab = _load_vocab(str(cfg["vocab"]))
    conds = _conditions(cfg, records)
    cond_dim = cfg["cond_dim"] if conds[0].vector is None else len(conds[0].vector)
    cfg["cond_dim"] = cond_dim
    examples = []
    for r, c in zip(records, conds):
        try:
            examples.append(Example(_safe_of(r), c.vector))
        except SafeError as exc:
            raise DataError(f"record {r.id}: {exc}") from exc
    model_cfg = dn.DenoiserConfig(vocab.size, vocab.max_len, cond_dim, cfg["d_model"], cfg["n_layers"],
                                  cfg["n_heads"], cfg["d_ff"])
    tcfg = TrainConfig(epochs=cfg["epochs"], seed=cfg["seed"], batch_size=cfg["batch_size"], lr=cfg["lr"],
                       cond_drop_prob=cfg["cond_drop_prob"], lr_schedule=cfg["lr_schedule"],
                       fragment_permutation=cfg["fragment_permutation"])
    from .training import validate_examples
    try:
        validate_examples(examples, vocab, model_cfg)
    except (TokenizeError, ValueError) as exc:
        raise DataError(f"training data does not fit the vocabulary: {exc}") from exc

    out = _prepare_out_dir(args.out)
    init_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg["seed"], 2])))
    params = dn.init_params(model_cfg, init_rng)
    rows = ["epoch,loss,token_loss\n"]

    def log(row):
        rows.append(f"{row.epoch},{row.loss:.10g},{row.token_loss:.10g}\n")
        if not args.quiet:
            print(f"epoch={row.epoch} loss={row.loss:.6f} token_loss={row.token_loss:.6f}", file=sys.stderr)

    train(params, model_cfg, vocab, examples, tcfg, on_epoch=log)
    ckpt = out / "model.ckpt"
    dn.save_checkpoint(params, model_cfg, vocab.sha256(), ckpt)
    _write_atomic(out / "loss.csv", "".join(rows))
    _write_atomic(out / "config.txt", config_text(cfg))
    return EXIT_OK


# worker state for process-based sampling
_WORKER: dict = {}


def _worker_init(ckpt: str, vocab_path: str) -> None:
    vocab = Vocabulary.load(vocab_path)
    params, model_cfg, _ = dn.load_checkpoint(ckpt, vocab.sha256())
    _WORKER.update(params=params, cfg=model_cfg, vocab=vocab)


def _sample_record(task) -> dict:
    index, rid, vector, scfg = task
    params, model_cfg, vocab = _WORKER["params"], _WORKER["cfg"], _WORKER["vocab"]

    def logits_fn(x, t, y):
        return dn.logits(x, t, y, params, model_cfg)

    ids = sample_batch(logits_fn, vector, scfg, model_cfg.vocab_size, model_cfg.max_len, record=index)
    samples = [detokenize(row, vocab) for row in ids]
    ranked = rank_by_frequency(samples)
    return {"id": rid, "n_invalid": ranked.n_invalid, "n_samples": ranked.total_samples,
            "ranked": [[s, c] for s, c in ranked.entries], "samples": samples}


def cmd_sample(args) -> int:
    overrides = _overrides(args, ("corpus", "vocab", "checkpoint", "seed", "steps", "guidance",
                                  "samples_per_condition", "workers", "conditions"))
    if args.unconditional:
        overrides["conditions"] = "none"
    cfg = resolve_config(args.config, overrides)
    _require(cfg, "vocab", "checkpoint", "seed")
    vocab = _load_vocab(str(cfg["vocab"]))
    try:
        params, model_cfg, _ = dn.load_checkpoint(str(cfg["checkpoint"]), vocab.sha256())
    except VocabMismatchError as exc:
        raise DataError(str(exc)) from exc
    except (CheckpointError, OSError) as exc:
        raise DataError(f"cannot load checkpoint: {exc}") from exc
    records = _load_corpus(str(cfg["corpus"])) if cfg["corpus"] else None
    conds = _conditions(cfg, records)
    for c in conds:
        if c.vector is not None and len(c.vector) != model_cfg.cond_dim:
            raise DataError(f"condition dimension mismatch: checkpoint expects cond_dim={model_cfg.cond_dim}, "
                            f"record {c.id} supplies {len(c.vector)}")
    scfg = SamplerConfig(cfg["steps"], cfg["guidance"], cfg["samples_per_condition"], cfg["seed"])
    out = _prepare_out_dir(args.out)
    tasks = [(i, c.id, c.vector, scfg) for i, c in enumerate(conds)]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"], initializer=_worker_init,
                                 initargs=(str(cfg["checkpoint"]), str(cfg["vocab"]))) as pool:
            results = list(pool.map(_sample_record, tasks))
    else:
        _WORKER.update(params=params, cfg=model_cfg, vocab=vocab)
        results = [_sample_record(t) for t in tasks]
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in results)
    _write_atomic(out / "samples.jsonl", text)
    _write_atomic(out / "config.txt", config_text(cfg))
    n_total = sum(r["n_samples"] for r in results)
    n_invalid = sum(r["n_invalid"] for r in results)
    print(f"records={len(results)}")
    print(f"samples={n_total}")
    print(f"validity={(n_total - n_invalid) / n_total:.6f}")
    return EXIT_OK


def _truth_map(path: str) -> dict[str, object]:
    p = Path(path)
    if p.exists() and is_mgf(p):
        try:
            spectra = read_mgf(p)
        except SpectrumFormatError as exc:
            raise DataError(f"{path}: {exc}") from exc
        out = {}
        for s in spectra:
            if s.smiles is None:
                raise DataError(f"{path}: record {s.id} has no SMILES")
            try:
                out[s.id] = parse_smiles(s.smiles)
            except ValueError as exc:
                raise DataError(f"{path}: record {s.id}: {exc}") from exc
        return out
    return {r.id: r.mol for r in _load_corpus(path)}


def _parse_strata(spec: str) -> tuple[str, list[float]]:
    prop, _, edges = spec.partition(":")
    try:
        values = [float(e) for e in edges.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --stratify edges {edges!r}") from exc
    if prop not in ("n_atoms", "n_rotatable") or len(values) < 2 or any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("--stratify expects n_atoms|n_rotatable:<increasing comma-separated edges>")
    return prop, values


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, ("k", "mces_budget")))
    ks = [int(k) for k in str(cfg["k"]).split(",")]
    strata = [_parse_strata(s) for s in args.stratify or []]
    if args.filter_atoms:
        try:
            lo, hi = (int(x) for x in args.filter_atoms.split(","))
        except ValueError as exc:
            raise ConfigError("--filter-atoms expects LO,HI") from exc
    truth = _truth_map(args.truth)
    try:
        preds = [json.loads(line) for line in Path(args.predictions).read_text(encoding="utf-8").splitlines()
                 if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read predictions {args.predictions}: {exc}") from exc
    for p in preds:
        if not isinstance(p, dict) or "id" not in p or "samples" not in p:
            raise DataError("prediction records need 'id' and 'samples' fields")
        if str(p["id"]) not in truth:
            raise DataError(f"prediction record id {p['id']!r} not found in truth file {args.truth}")
    if not preds:
        raise DataError("predictions file is empty")
    rows = []
    for p in preds:
        ranked = rank_by_frequency(p["samples"])
        rows.append(topk_report(ranked, truth[str(p["id"])], ks, spectrum_id=str(p["id"]),
                                mces_budget=cfg["mces_budget"]))
    out = _prepare_out_dir(args.out)
    write_report(rows, out / "report.csv", ks)
    summary = summarize(rows)
    for line in summary_lines(summary):
        print(line)
    if args.json:
        write_summary_json(summary, args.json)
    row_filter = None
    if args.filter_atoms:
        row_filter = lambda r: lo <= r.n_atoms <= hi  # noqa: E731
    for prop, edges in strata:
        write_strata(stratify(rows, prop, edges, row_filter), out / f"strata_{prop}.csv")
    _write_atomic(out / "config.txt", config_text(cfg))
    return EXIT_OK


def _overrides(args, keys: Sequence[str]) -> dict[str, str | None]:
    out: dict[str, str | None] = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = str(value)
    return out


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2 with our message format
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="safeflow", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="flat key=value config file")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        return sp

    sp = sub.add_parser("canonicalize", help="print canonical SMILES", allow_abbrev=False)
    sp.add_argument("--smiles")
    sp.add_argument("--input", help="file with one SMILES per line")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_canonicalize)

    sp = sub.add_parser("fragment", help="print SAFE encodings", allow_abbrev=False)
    sp.add_argument("--smiles")
    sp.add_argument("--input")
    sp.add_argument("--max-cuts", dest="max_cuts", type=int, default=8)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fragment)

    sp = sub.add_parser("build-vocab", help="build a token vocabulary from a corpus", allow_abbrev=False)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--max-len", dest="max_len", type=int, default=96)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_build_vocab)

    sp = sub.add_parser("toy-corpus", help="write a deterministic toy corpus", allow_abbrev=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--max-atoms", dest="max_atoms", type=int, default=30)
    sp.add_argument("--min-atoms", dest="min_atoms", type=int, default=4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_toy_corpus)

    sp = sub.add_parser("simulate-spectra", help="toy MS/MS spectra for a corpus", allow_abbrev=False)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True, help="MGF output file")
    sp.add_argument("--descriptors-out", dest="descriptors_out", help="also write binned vectors as id,values CSV")
    sp.add_argument("--nbins", type=int, default=256)
    sp.add_argument("--max-mz", dest="max_mz", type=float, default=1000.0)
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("train", help="train a denoiser", allow_abbrev=False))
    sp.add_argument("--corpus")
    sp.add_argument("--vocab")
    sp.add_argument("--conditions", help="none | corpus | simulate | path to MGF or id,values CSV")
    sp.add_argument("--seed")
    sp.add_argument("--epochs")
    sp.add_argument("--lr")
    sp.add_argument("--batch-size", dest="batch_size")
    sp.add_argument("--cond-drop-prob", dest="cond_drop_prob")
    sp.add_argument("--model-preset", dest="model_preset")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("sample", help="sample molecules per condition", allow_abbrev=False))
    sp.add_argument("--checkpoint")
    sp.add_argument("--vocab")
    sp.add_argument("--corpus")
    sp.add_argument("--conditions")
    sp.add_argument("--unconditional", action="store_true")
    sp.add_argument("--seed")
    sp.add_argument("--steps")
    sp.add_argument("--guidance")
    sp.add_argument("--samples-per-condition", dest="samples_per_condition")
    sp.add_argument("--workers")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_sample)

    sp = common(sub.add_parser("evaluate", help="score samples against the truth", allow_abbrev=False))
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--truth", required=True, help="corpus file or MGF with SMILES")
    sp.add_argument("--k")
    sp.add_argument("--mces-budget", dest="mces_budget")
    sp.add_argument("--stratify", action="append", metavar="PROP:EDGES", help="e.g. n_atoms:0,10,20,inf")
    sp.add_argument("--filter-atoms", dest="filter_atoms", metavar="LO,HI", help="restrict strata to LO<=n_atoms<=HI")
    sp.add_argument("--json", help="also write the summary as JSON")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
