"""Discrete flow matching over token sequences.

Corruption mixes a uniform-noise sequence with the clean one position by
position; sampling integrates the CTMC with an Euler step on a uniform
time grid, turning denoiser posteriors into per-token jump rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .autograd import softmax_array

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 50
    guidance: float = 1.5
    samples_per_condition: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        if not self.guidance >= 0:
            raise ValueError("guidance must be >= 0")
        if not isinstance(self.samples_per_condition, int) or self.samples_per_condition < 1:
            raise ValueError("samples_per_condition must be a positive integer")


def _check_time(t: float) -> None:
    if not 0.0 <= t < 1.0:
        raise ValueError(f"flow time must lie in [0, 1), got {t}")


def interpolate(x0: np.ndarray, x1: np.ndarray, t: float, rng: np.random.Generator) -> np.ndarray:
    """Keep x1's token with probability ``t`` per position, else x0's."""
    x0 = np.asarray(x0)
    x1 = np.asarray(x1)
    if x0.shape != x1.shape:
        raise ValueError(f"length mismatch: {x0.shape} vs {x1.shape}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t >= 1):
        raise ValueError("flow time must lie in [0, 1)")
    if t.ndim == 1 and x1.ndim == 2:
        t = t[:, None]
    keep = rng.random(x1.shape) < t
    return np.where(keep, x1, x0)


def velocity_from_posterior(row: np.ndarray, current: int, t: float) -> np.ndarray:
    _check_time(t)
    row = np.asarray(row, dtype=np.float64)
    onehot = np.zeros_like(row)
    onehot[current] = 1.0
    return (row - onehot) / (1.0 - t)


def transition_probs(posterior: np.ndarray, current: np.ndarray, t: float, dt: float) -> np.ndarray:
    """onehot(current) + dt * velocity, row-wise; the distribution the Euler step samples."""
    posterior = np.asarray(posterior, dtype=np.float64)
    n = posterior.shape[0]
    onehot = np.zeros_like(posterior)
    onehot[np.arange(n), current] = 1.0
    q = onehot + dt * ((posterior - onehot) / (1.0 - t))
    return np.maximum(q, 0.0)


def check_posterior(posterior: np.ndarray) -> None:
    if posterior.ndim != 2:
        raise ValueError("posterior must be a (L, K) matrix")
    if np.any(posterior < 0) or not np.all(np.isfinite(posterior)):
        raise ValueError("posterior rows must be finite and non-negative")
    if np.any(np.abs(posterior.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("posterior rows must sum to 1")


def euler_step(x_t: np.ndarray, posterior: np.ndarray, t: float, dt: float,
               rng: np.random.Generator | None = None, uniforms: np.ndarray | None = None) -> np.ndarray:
    """One Euler step of the CTMC, independently per position.

    Either an ``rng`` or explicit ``uniforms`` (one per position) drives the draw.
    """
    _check_time(t)
    if dt <= 0 or dt > 1.0 - t + 1e-15:
        raise ValueError(f"step dt={dt} must lie in (0, 1 - t]")
    x_t = np.asarray(x_t, dtype=np.int64)
    posterior = np.asarray(posterior, dtype=np.float64)
    check_posterior(posterior)
    if posterior.shape[0] != x_t.shape[0]:
        raise ValueError("posterior rows must match sequence length")
    if uniforms is None:
        if rng is None:
            raise ValueError("euler_step needs an rng or explicit uniforms")
        uniforms = rng.random(x_t.shape[0])
    return _kernels.euler_sample(posterior, x_t, float(t), float(dt), np.asarray(uniforms, dtype=np.float64))


def cfg_combine(cond_logits: np.ndarray, uncond_logits: np.ndarray, w: float) -> np.ndarray:
    """Guided logits ``uncond + w * (cond - uncond)``; w=1 and w=0 return the inputs exactly."""
    cond_logits = np.asarray(cond_logits, dtype=np.float64)
    uncond_logits = np.asarray(uncond_logits, dtype=np.float64)
    if cond_logits.shape != uncond_logits.shape:
        raise ValueError(f"shape mismatch: {cond_logits.shape} vs {uncond_logits.shape}")
    if w == 1.0:
        return cond_logits.copy()
    if w == 0.0:
        return uncond_logits.copy()
    return uncond_logits + w * (cond_logits - uncond_logits)


def ce_loss(logits: np.ndarray, x1: np.ndarray) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    return float(-np.take_along_axis(logp, np.asarray(x1)[..., None], axis=-1).sum())


def time_grid(steps: int) -> list[tuple[float, float]]:
    """(t_n, dt) pairs with t_n = n / T and dt = 1 / T."""
    return [(n / steps, 1.0 / steps) for n in range(steps)]


# logits_fn(x: (N, L) ids, t: float, y: (N, d) or None) -> (N, L, K) logits
LogitsFn = Callable[[np.ndarray, float, "np.ndarray | None"], np.ndarray]


def sample_rngs(seed: int, record: int, n: int) -> list[np.random.Generator]:
    """One independent stream per sample, keyed by (seed, record, sample index)."""
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, record, s]))) for s in range(n)]


def sample_batch(logits_fn: LogitsFn, y: np.ndarray | None, cfg: SamplerConfig, vocab_size: int, length: int,
                 record: int = 0) -> np.ndarray:
    """Draw ``cfg.samples_per_condition`` sequences for one condition.

    Returns an (N, L) array of token ids.  Each sample consumes only its own
    RNG stream, so the result does not depend on how records are scheduled.
    """
    n = cfg.samples_per_condition
    rngs = sample_rngs(cfg.seed, record, n)
    x = np.stack([r.integers(0, vocab_size, length) for r in rngs])
    ys = None if y is None else np.broadcast_to(np.asarray(y, dtype=np.float64), (n, np.size(y)))
    for t, dt in time_grid(cfg.steps):
        if ys is None or cfg.guidance == 0.0:
            guided = logits_fn(x, t, None)
        elif cfg.guidance == 1.0:
            guided = logits_fn(x, t, ys)
        else:
            guided = cfg_combine(logits_fn(x, t, ys), logits_fn(x, t, None), cfg.guidance)
        probs = softmax_array(guided).reshape(n * length, vocab_size)
        u = np.concatenate([r.random(length) for r in rngs])
        x = _kernels.euler_sample(probs, x.reshape(-1), t, dt, u).reshape(n, length)
    return x


def sample_sequence(logits_fn: LogitsFn, y: np.ndarray | None, cfg: SamplerConfig, vocab_size: int, length: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Single sequence driven by one caller-supplied generator."""
    x = rng.integers(0, vocab_size, length)
    yb = None if y is None else np.asarray(y, dtype=np.float64)[None, :]
    for t, dt in time_grid(cfg.steps):
        if yb is None or cfg.guidance == 0.0:
            guided = logits_fn(x[None, :], t, None)[0]
        elif cfg.guidance == 1.0:
            guided = logits_fn(x[None, :], t, yb)[0]
        else:
            guided = cfg_combine(logits_fn(x[None, :], t, yb)[0], logits_fn(x[None, :], t, None)[0], cfg.guidance)
        x = euler_step(x, softmax_array(guided), t, dt, rng)
    return x
