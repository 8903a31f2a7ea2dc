import math

import numpy as np
import pytest

from safeflow import autograd as ag
from safeflow import denoiser as dn
from safeflow.safe import Vocabulary, build_vocab, encode_safe, training_cuts
from safeflow.molgraph import parse_smiles
from safeflow.specsim import bin_spectrum, simulate_spectrum
from safeflow.toyset import toy_corpus
from safeflow.training import Example, TrainConfig, train

from oracles import finite_difference_report, grad_check_setup


def small_cfg(**kw):
    base = dict(vocab_size=7, max_len=5, cond_dim=4, d_model=8, n_layers=1, n_heads=2, d_ff=16)
    base.update(kw)
    return dn.DenoiserConfig(**base)


def test_config_validation_and_text_round_trip():
    with pytest.raises(ValueError):
        small_cfg(d_model=10, n_heads=3)
    with pytest.raises(ValueError):
        small_cfg(vocab_size=0)
    cfg = small_cfg()
    assert dn.DenoiserConfig.from_text(cfg.to_text()) == cfg


def test_param_shapes_cover_named_groups():
    shapes = dn.param_shapes(small_cfg())
    assert shapes["tok_emb"] == (7, 8) and shapes["pos_emb"] == (5, 8)
    assert shapes["cond.w"] == (4, 8) and shapes["null_cond"] == (4,)
    assert shapes["head.w"] == (8, 7)


# ---------------------------------------------------------------- layer norm / adaln


def _ln_params(scale_b, shift_b, d=4, cdim=3):
    return {
        "x.scale.w": ag.parameter(np.zeros((cdim, d)), "sw"),
        "x.scale.b": ag.parameter(np.full(d, scale_b, dtype=float), "sb"),
        "x.shift.w": ag.parameter(np.zeros((cdim, d)), "hw"),
        "x.shift.b": ag.parameter(np.full(d, shift_b, dtype=float), "hb"),
    }


def test_adaln_identity_modulation_is_layer_norm():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(2, 3, 4))
    out = dn.adaln(ag.Tensor(h), ag.Tensor(rng.normal(size=(2, 3))), _ln_params(1.0, 0.0), "x").data
    mu = h.mean(-1, keepdims=True)
    ref = (h - mu) / np.sqrt(h.var(-1, keepdims=True) + 1e-5)
    assert np.allclose(out, ref, atol=1e-12)


def test_adaln_affine_example():
    row = np.array([[[1.0, 2.0, 3.0, 4.0]]])
    ln = (row - 2.5) / math.sqrt(1.25 + 1e-5)
    out = dn.adaln(ag.Tensor(row), ag.Tensor(np.zeros((1, 3))), _ln_params(2.0, 3.0), "x").data
    assert np.allclose(out, 2 * ln + 3, atol=1e-12)


def test_adaln_constant_row_gives_shift():
    out = dn.adaln(ag.Tensor(np.full((1, 2, 4), 7.0)), ag.Tensor(np.zeros((1, 3))), _ln_params(5.0, -0.5), "x").data
    assert np.allclose(out, -0.5)


def test_fresh_model_conditioning_does_not_change_logits():
    cfg = small_cfg()
    p = dn.init_params(cfg, np.random.default_rng(1))
    x = np.random.default_rng(2).integers(0, 7, (3, 5))
    y = np.random.default_rng(3).normal(size=(3, 4))
    t = np.array([0.1, 0.5, 0.9])
    assert np.allclose(dn.logits(x, t, y, p, cfg), dn.logits(x, t, None, p, cfg), atol=1e-12)


def test_null_condition_equivalence():
    cfg = small_cfg()
    rng = np.random.default_rng(4)
    p = dn.init_params(cfg, rng)
    for v in p.values():
        v.data = v.data + rng.normal(0, 0.2, v.shape)
    x = rng.integers(0, 7, (2, 5))
    t = np.array([0.3, 0.6])
    nulls = np.tile(p["null_cond"].data, (2, 1))
    a = dn.logits(x, t, None, p, cfg)
    b = dn.logits(x, t, nulls, p, cfg)
    with ag.no_grad():
        c = dn.forward(x, t, rng.normal(size=(2, 4)), p, cfg, use_null=np.array([True, True])).data
    assert np.array_equal(a, b) and np.array_equal(a, c)
    y = rng.normal(size=(2, 4))
    assert not np.allclose(dn.logits(x, t, y, p, cfg), a)


def test_forward_rejects_bad_inputs():
    cfg = small_cfg()
    p = dn.init_params(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        dn.forward(np.zeros((1, 4), dtype=int), 0.5, None, p, cfg)
    with pytest.raises(ValueError):
        dn.forward(np.full((1, 5), 7), 0.5, None, p, cfg)
    with pytest.raises(ValueError):
        dn.forward(np.zeros((1, 5), dtype=int), 1.0, None, p, cfg)
    with pytest.raises(ValueError):
        dn.forward(np.zeros((1, 5), dtype=int), 0.5, np.zeros((1, 3)), p, cfg)


def test_attention_content_equivariance():
    # no positional signal: swapping two tokens swaps their output rows
    cfg = small_cfg(max_len=2)
    rng = np.random.default_rng(5)
    p = dn.init_params(cfg, rng)
    for v in p.values():
        v.data = v.data + rng.normal(0, 0.3, v.shape)
    p["pos_emb"].data[:] = 0.0
    a = dn.logits(np.array([[1, 4]]), 0.4, None, p, cfg)
    b = dn.logits(np.array([[4, 1]]), 0.4, None, p, cfg)
    assert np.allclose(a[0, 0], b[0, 1]) and np.allclose(a[0, 1], b[0, 0])


# ---------------------------------------------------------------- gradients


def test_gradient_check_tiny_denoiser():
    params, loss = grad_check_setup()
    report = finite_difference_report(loss, params)
    assert max(report.values()) < 1e-4, report


def test_gradient_linearity():
    params, loss = grad_check_setup(seed=3)
    loss().backward()
    g1 = {k: v.grad.copy() for k, v in params.items()}
    dn.zero_grads(params)
    ag.scale(loss(), 2.0).backward()
    assert all(np.array_equal(params[k].grad, 2 * g1[k]) for k in params)


def test_zero_loss_region_gradient_vanishes():
    logits = ag.parameter(np.where(np.eye(4, dtype=bool), 60.0, -60.0), "z")
    ag.cross_entropy(logits, np.arange(4)).backward()
    assert np.max(np.abs(logits.grad)) < 1e-40


def test_nonfinite_gradient_names_parameter():
    p = {"w": ag.parameter(np.zeros(2), "w")}
    p["w"].grad = np.array([np.nan, 0.0])
    with pytest.raises(dn.DivergenceError, match="w"):
        dn.collect_grads(p)


# ---------------------------------------------------------------- adam


def test_adam_zero_gradient_leaves_params():
    p = {"a": ag.parameter(np.ones(3), "a")}
    dn.adam_step(p, {"a": np.zeros(3)}, dn.AdamState(), dn.AdamConfig(lr=0.1))
    assert np.array_equal(p["a"].data, np.ones(3))


def test_adam_first_step_moves_lr_per_component():
    p = {"a": ag.parameter(np.zeros(4), "a")}
    state = dn.AdamState()
    dn.adam_step(p, {"a": np.array([3.0, -0.5, 1e-3, -7.0])}, state, dn.AdamConfig(lr=0.01))
    assert np.allclose(p["a"].data, [-0.01, 0.01, -0.01, 0.01], rtol=1e-4)
    assert state.step == 1


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip_and_errors(tmp_path):
    cfg = small_cfg()
    p = dn.init_params(cfg, np.random.default_rng(9))
    h = bytes(range(32))
    path = tmp_path / "m.ckpt"
    dn.save_checkpoint(p, cfg, h, path)
    back, cfg2, h2 = dn.load_checkpoint(path, expected_vocab_hash=h)
    assert cfg2 == cfg and h2 == h
    assert all(back[k].data.tobytes() == p[k].data.tobytes() for k in p)
    raw = path.read_bytes()
    (tmp_path / "bad.ckpt").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(dn.CheckpointError, match="magic"):
        dn.load_checkpoint(tmp_path / "bad.ckpt")
    (tmp_path / "short.ckpt").write_bytes(raw[:-3])
    with pytest.raises(dn.CheckpointError, match="truncated"):
        dn.load_checkpoint(tmp_path / "short.ckpt")
    (tmp_path / "long.ckpt").write_bytes(raw + b"\0")
    with pytest.raises(dn.CheckpointError, match="trailing"):
        dn.load_checkpoint(tmp_path / "long.ckpt")


def test_checkpoint_vocab_mismatch(tmp_path):
    v40 = Vocabulary(["[PAD]"] + [f"t{i:02d}" for i in range(39)], 6)
    v41 = Vocabulary(["[PAD]"] + [f"t{i:02d}" for i in range(40)], 6)
    cfg = small_cfg(vocab_size=v40.size)
    dn.save_checkpoint(dn.init_params(cfg, np.random.default_rng(0)), cfg, v40.sha256(), tmp_path / "m.ckpt")
    with pytest.raises(dn.VocabMismatchError):
        dn.load_checkpoint(tmp_path / "m.ckpt", expected_vocab_hash=v41.sha256())


# ---------------------------------------------------------------- training loop


def _toy_examples(n=6, seed=3):
    mols = [parse_smiles(s) for s in toy_corpus(n, seed, max_atoms=10)]
    safes = [encode_safe(m, training_cuts(m)) for m in mols]
    report = build_vocab(safes, 40)
    assert not report.excluded
    vocab = report.vocab
    ex = [Example(s, bin_spectrum(simulate_spectrum(m), nbins=16)) for s, m in zip(safes, mols)]
    return vocab, ex


def test_epoch_zero_loss_is_uniform():
    vocab, ex = _toy_examples()
    cfg = dn.DenoiserConfig(vocab.size, vocab.max_len, 16, **dn.TINY_SIZES)
    p = dn.init_params(cfg, np.random.default_rng(0))
    hist = train(p, cfg, vocab, ex, TrainConfig(epochs=0, seed=1, batch_size=4))
    expected = vocab.max_len * math.log(vocab.size)
    assert abs(hist[0].loss - expected) / expected < 0.05


def test_training_is_deterministic_and_reduces_loss(tmp_path):
    vocab, ex = _toy_examples()
    cfg = dn.DenoiserConfig(vocab.size, vocab.max_len, 16, d_model=16, n_layers=1, n_heads=2, d_ff=32)
    blobs = []
    for run in range(2):
        p = dn.init_params(cfg, np.random.default_rng(0))
        hist = train(p, cfg, vocab, ex, TrainConfig(epochs=15, seed=4, batch_size=2, lr=3e-3))
        path = tmp_path / f"{run}.ckpt"
        dn.save_checkpoint(p, cfg, vocab.sha256(), path)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    assert hist[-1].loss < hist[0].loss


def test_train_config_schedule_and_validation():
    cos = TrainConfig(epochs=1, seed=0, lr=1e-3, lr_schedule="cosine")
    assert cos.lr_at(0, 100) == 1e-3
    assert cos.lr_at(50, 100) == pytest.approx(5e-4)
    assert cos.lr_at(100, 100) == pytest.approx(0.0, abs=1e-18)
    assert TrainConfig(epochs=1, seed=0, lr=1e-3).lr_at(70, 100) == 1e-3
    with pytest.raises(ValueError):
        TrainConfig(epochs=1, seed=0, lr_schedule="step")


def test_fixed_order_cosine_train():
    vocab, ex = _toy_examples(n=4)
    cfg = dn.DenoiserConfig(vocab.size, vocab.max_len, 16, d_model=16, n_layers=1, n_heads=2, d_ff=32)
    p = dn.init_params(cfg, np.random.default_rng(0))
    hist = train(p, cfg, vocab, ex, TrainConfig(epochs=2, seed=4, batch_size=2,
                                                fragment_permutation=False, lr_schedule="cosine"))
    assert len(hist) == 3 and all(math.isfinite(h.loss) for h in hist)
