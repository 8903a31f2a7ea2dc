"""Training loop for the conditional flow matching objective."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autograd as ag
from .denoiser import AdamConfig, AdamState, DenoiserConfig, DivergenceError, Params, adam_step, collect_grads, forward, zero_grads
from .flow import interpolate
from .safe import Vocabulary, permute_fragments, tokenize


LR_SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    seed: int
    batch_size: int = 64
    lr: float = 3e-4
    cond_drop_prob: float = 0.1
    lr_schedule: str = "constant"
    # shuffle fragment order each time a molecule is drawn (augmentation)
    fragment_permutation: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.cond_drop_prob <= 1.0:
            raise ValueError("cond_drop_prob must lie in [0, 1]")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")

    def lr_at(self, step: int, total: int) -> float:
        """Learning rate for optimizer step ``step`` of ``total``."""
        if self.lr_schedule == "cosine":
            return self.lr * 0.5 * (1.0 + math.cos(math.pi * step / total))
        return self.lr


@dataclass(frozen=True)
class Example:
    safe: str
    cond: np.ndarray | None = None


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float  # mean per-sequence CE
    token_loss: float  # loss / L


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def _batch_loss(params: Params, cfg: DenoiserConfig, vocab: Vocabulary, batch: Sequence[Example],
                texts: Sequence[str], rng: np.random.Generator, drop_prob: float) -> ag.Tensor:
    x1 = np.array([tokenize(s, vocab) for s in texts], dtype=np.int64)
    bsz = len(batch)
    t = rng.random(bsz)
    x0 = rng.integers(0, cfg.vocab_size, x1.shape)
    xt = interpolate(x0, x1, t, rng)
    if batch[0].cond is None:
        y, drop = None, None
    else:
        y = np.stack([ex.cond for ex in batch])
        drop = rng.random(bsz) < drop_prob
    logits = forward(xt, t, y, params, cfg, use_null=drop)
    return ag.scale(ag.cross_entropy(logits, x1), 1.0 / bsz)


def validate_examples(examples: Sequence[Example], vocab: Vocabulary, cfg: DenoiserConfig) -> None:
    if not examples:
        raise ValueError("no training examples")
    conditional = examples[0].cond is not None
    for i, ex in enumerate(examples):
        tokenize(ex.safe, vocab)
        if (ex.cond is not None) != conditional:
            raise ValueError(f"example {i}: mixed conditional and unconditional examples")
        if ex.cond is not None and np.shape(ex.cond) != (cfg.cond_dim,):
            raise ValueError(f"example {i}: condition has dimension {np.size(ex.cond)}, model expects {cfg.cond_dim}")


def train(params: Params, cfg: DenoiserConfig, vocab: Vocabulary, examples: Sequence[Example], tcfg: TrainConfig,
          on_epoch: Callable[[EpochStats], None] | None = None) -> list[EpochStats]:
    """Minimize the summed token cross entropy; returns one row per epoch, epoch 0 being pre-training."""
    validate_examples(examples, vocab, cfg)
    history = []

    # epoch 0: loss of the untouched model on every example once
    eval_rng = _rng(tcfg.seed, 0)
    total = 0.0
    with ag.no_grad():
        for lo in range(0, len(examples), tcfg.batch_size):
            batch = examples[lo:lo + tcfg.batch_size]
            total += float(_batch_loss(params, cfg, vocab, batch, [e.safe for e in batch], eval_rng,
                                       tcfg.cond_drop_prob).data) * len(batch)
    history.append(_stats(0, total / len(examples), cfg, on_epoch))

    rng = _rng(tcfg.seed, 1)
    shuffle_rng = random.Random(tcfg.seed)
    state = AdamState()
    n_steps = tcfg.epochs * math.ceil(len(examples) / tcfg.batch_size)
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(len(examples))
        total = 0.0
        for lo in range(0, len(order), tcfg.batch_size):
            batch = [examples[i] for i in order[lo:lo + tcfg.batch_size]]
            if tcfg.fragment_permutation:
                texts = [permute_fragments(ex.safe, shuffle_rng) for ex in batch]
            else:
                texts = [ex.safe for ex in batch]
            opt = AdamConfig(lr=tcfg.lr_at(state.step, n_steps))
            zero_grads(params)
            loss = _batch_loss(params, cfg, vocab, batch, texts, rng, tcfg.cond_drop_prob)
            value = float(loss.data)
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            adam_step(params, collect_grads(params), state, opt)
            total += value * len(batch)
        history.append(_stats(epoch, total / len(examples), cfg, on_epoch))
    zero_grads(params)
    return history


def _stats(epoch: int, loss: float, cfg: DenoiserConfig, on_epoch) -> EpochStats:
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite loss at epoch {epoch}")
    row = EpochStats(epoch, loss, loss / cfg.max_len)
    if on_epoch is not None:
        on_epoch(row)
    return row
