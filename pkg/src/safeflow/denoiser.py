"""Bidirectional transformer denoiser with adaptive layer norm conditioning.

The conditioning vector ``c`` mixes a sinusoidal embedding of the flow time
with a projection of the condition (or a learned null condition) and reaches
the network only through the per-block AdaLN scale/shift maps.  Those maps
start as constant 1 (scale) and 0 (shift), so a fresh model ignores ``c``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from . import autograd as ag
from .autograd import Tensor

TIME_EMBED_DIM = 128
MAGIC = b"DFM1"
VERSION = 1


class CheckpointError(ValueError):
    pass


class VocabMismatchError(CheckpointError):
    pass


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class DenoiserConfig:
    vocab_size: int
    max_len: int
    cond_dim: int = 256
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 512

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{f.name} must be a positive integer, got {v!r}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "DenoiserConfig":
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = int(val)
        return cls(**values)


# d_model=64 keeps a 32-molecule memorization run to a few minutes on one core
TINY_SIZES = {"d_model": 64, "n_layers": 2, "n_heads": 4, "d_ff": 128}


def tiny_config(vocab_size: int, max_len: int, cond_dim: int = 256) -> DenoiserConfig:
    return DenoiserConfig(vocab_size, max_len, cond_dim, **TINY_SIZES)


Params = dict[str, Tensor]


def _adaln_names(prefix: str) -> list[str]:
    return [f"{prefix}.scale.w", f"{prefix}.scale.b", f"{prefix}.shift.w", f"{prefix}.shift.b"]


def param_shapes(cfg: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.d_model, cfg.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (cfg.vocab_size, d),
        "pos_emb": (cfg.max_len, d),
        "cond.w": (cfg.cond_dim, d),
        "cond.b": (d,),
        "null_cond": (cfg.cond_dim,),
        "time.w1": (TIME_EMBED_DIM + d, d),
        "time.b1": (d,),
        "time.w2": (d, d),
        "time.b2": (d,),
    }
    for i in range(cfg.n_layers):
        p = f"blocks.{i}"
        for ln in ("ln1", "ln2"):
            for name in _adaln_names(f"{p}.{ln}"):
                shapes[name] = (d, d) if name.endswith(".w") else (d,)
        for m in ("q", "k", "v", "o"):
            shapes[f"{p}.attn.w{m}"] = (d, d)
            shapes[f"{p}.attn.b{m}"] = (d,)
        shapes[f"{p}.ff.w1"] = (d, f)
        shapes[f"{p}.ff.b1"] = (f,)
        shapes[f"{p}.ff.w2"] = (f, d)
        shapes[f"{p}.ff.b2"] = (d,)
    for name in _adaln_names("final"):
        shapes[name] = (d, d) if name.endswith(".w") else (d,)
    shapes["head.w"] = (d, cfg.vocab_size)
    shapes["head.b"] = (cfg.vocab_size,)
    return shapes


def init_params(cfg: DenoiserConfig, rng: np.random.Generator) -> Params:
    params: Params = {}
    for name, shape in param_shapes(cfg).items():
        if ".scale." in name or ".shift." in name:
            # AdaLN maps start constant: scale 1, shift 0
            value = np.ones(shape) if name.endswith("scale.b") else np.zeros(shape)
        elif name.endswith((".b", ".b1", ".b2", ".bq", ".bk", ".bv", ".bo")):
            value = np.zeros(shape)
        elif name in ("tok_emb", "pos_emb", "null_cond"):
            value = rng.normal(0.0, 0.02, shape)
        elif name == "head.w":
            value = rng.normal(0.0, 0.02, shape)
        else:
            value = rng.normal(0.0, 1.0 / math.sqrt(shape[0]), shape)
        params[name] = ag.parameter(value, name)
    return params


def check_params(params: Mapping[str, Tensor], cfg: DenoiserConfig) -> None:
    expected = param_shapes(cfg)
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise CheckpointError(f"parameter set mismatch: missing={missing} extra={extra}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise CheckpointError(f"{name}: shape {params[name].shape}, expected {shape}")


def time_embedding(t: np.ndarray, dim: int = TIME_EMBED_DIM) -> np.ndarray:
    """Sinusoidal features of ``t`` (shape (B,)) -> (B, dim)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    # scale t to the step range customary for sinusoidal schedules
    angles = (1000.0 * t)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def adaln(h: Tensor, c: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """scale(c) * LN(h) + shift(c); ``c`` is (B, d), ``h`` is (B, L, d)."""
    s = ag.add(ag.matmul(c, params[f"{prefix}.scale.w"]), params[f"{prefix}.scale.b"])
    b = ag.add(ag.matmul(c, params[f"{prefix}.shift.w"]), params[f"{prefix}.shift.b"])
    bsz, d = c.shape[0], h.shape[-1]
    s = ag.reshape(s, (bsz, 1, d))
    b = ag.reshape(b, (bsz, 1, d))
    return ag.add(ag.mul(s, ag.layer_norm(h)), b)


def _linear(x: Tensor, params: Mapping[str, Tensor], w: str, b: str) -> Tensor:
    return ag.add(ag.matmul(x, params[w]), params[b])


def _attention(h: Tensor, params: Mapping[str, Tensor], prefix: str, cfg: DenoiserConfig) -> Tensor:
    bsz, length, d = h.shape
    nh, hd = cfg.n_heads, cfg.head_dim

    def heads(x: Tensor) -> Tensor:
        return ag.transpose(ag.reshape(x, (bsz, length, nh, hd)), (0, 2, 1, 3))

    q = heads(_linear(h, params, f"{prefix}.wq", f"{prefix}.bq"))
    k = heads(_linear(h, params, f"{prefix}.wk", f"{prefix}.bk"))
    v = heads(_linear(h, params, f"{prefix}.wv", f"{prefix}.bv"))
    scores = ag.scale(ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(hd))
    att = ag.softmax(scores)
    o = ag.reshape(ag.transpose(ag.matmul(att, v), (0, 2, 1, 3)), (bsz, length, d))
    return _linear(o, params, f"{prefix}.wo", f"{prefix}.bo")


def conditioning(t: np.ndarray, y: np.ndarray | None, params: Mapping[str, Tensor],
                 use_null: np.ndarray | None = None) -> Tensor:
    """Conditioning vectors c, shape (B, d_model).

    ``y`` is (B, cond_dim) or None (every row unconditional).  ``use_null``
    is an optional boolean mask selecting rows whose condition is replaced by
    the learned null vector.
    """
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    bsz = t.shape[0]
    null = params["null_cond"]
    if y is None:
        ycond = ag.add(Tensor(np.zeros((bsz, null.shape[0]))), null)
    else:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (bsz, null.shape[0]):
            raise ValueError(f"condition batch has shape {y.shape}, expected {(bsz, null.shape[0])}")
        if use_null is not None and np.any(use_null):
            keep = (~np.asarray(use_null, dtype=bool)).astype(np.float64)[:, None]
            ycond = ag.add(Tensor(y * keep), ag.mul(Tensor(1.0 - keep), null))
        else:
            ycond = Tensor(y)
    proj = _linear(ycond, params, "cond.w", "cond.b")
    temb = Tensor(time_embedding(t))
    hidden = ag.silu(_linear(ag.concat([temb, proj], axis=-1), params, "time.w1", "time.b1"))
    return _linear(hidden, params, "time.w2", "time.b2")


def forward(x: np.ndarray, t, y: np.ndarray | None, params: Mapping[str, Tensor], cfg: DenoiserConfig,
            use_null: np.ndarray | None = None) -> Tensor:
    """Logits of shape (B, L, K) for token ids ``x`` (B, L) at times ``t``."""
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        x = x[None, :]
    bsz, length = x.shape
    if length != cfg.max_len:
        raise ValueError(f"sequence length {length} != max_len {cfg.max_len}")
    if x.min() < 0 or x.max() >= cfg.vocab_size:
        raise ValueError("token id out of vocabulary range")
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (bsz,))
    if np.any(t < 0) or np.any(t >= 1):
        raise ValueError("flow time must lie in [0, 1)")
    c = conditioning(t, y, params, use_null)
    h = ag.add(ag.embedding(params["tok_emb"], x), params["pos_emb"])
    for i in range(cfg.n_layers):
        p = f"blocks.{i}"
        h = ag.add(h, _attention(adaln(h, c, params, f"{p}.ln1"), params, f"{p}.attn", cfg))
        ff = ag.gelu(_linear(adaln(h, c, params, f"{p}.ln2"), params, f"{p}.ff.w1", f"{p}.ff.b1"))
        h = ag.add(h, _linear(ff, params, f"{p}.ff.w2", f"{p}.ff.b2"))
    logits = _linear(adaln(h, c, params, "final"), params, "head.w", "head.b")
    if not np.all(np.isfinite(logits.data)):
        raise DivergenceError("non-finite logits")
    return logits


def logits(x: np.ndarray, t, y: np.ndarray | None, params: Mapping[str, Tensor], cfg: DenoiserConfig) -> np.ndarray:
    """Inference-only forward pass returning a plain array."""
    with ag.no_grad():
        return forward(x, t, y, params, cfg).data


# ---------------------------------------------------------------- optimizer


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class AdamState:
    def __init__(self) -> None:
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState,
              opt: AdamConfig = AdamConfig()) -> None:
    """In-place Adam update with bias correction."""
    state.step += 1
    bc1 = 1.0 - opt.beta1 ** state.step
    bc2 = 1.0 - opt.beta2 ** state.step
    for name in sorted(params):
        g = grads.get(name)
        if g is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        params[name].data -= opt.lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)


def collect_grads(params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    grads = {}
    for name in sorted(params):
        g = params[name].grad
        if g is None:
            g = np.zeros_like(params[name].data)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {name}")
        grads[name] = g
    return grads


def zero_grads(params: Mapping[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


# ---------------------------------------------------------------- checkpoints


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(params: Mapping[str, Tensor], cfg: DenoiserConfig, vocab_hash: bytes, path: str | Path) -> None:
    if len(vocab_hash) != 32:
        raise ValueError("vocabulary hash must be 32 bytes")
    check_params(params, cfg)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(vocab_hash)
    buf.write(_pack_str(cfg.to_text()))
    names = sorted(params)
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        data = params[name].data
        buf.write(_pack_str(name))
        buf.write(struct.pack("<I", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        buf.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointError("truncated checkpoint file")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("corrupt string in checkpoint") from exc


def load_checkpoint(path: str | Path, expected_vocab_hash: bytes | None = None) -> tuple[Params, DenoiserConfig, bytes]:
    """Returns (params, config, vocab hash); rejects a hash different from ``expected_vocab_hash``."""
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MAGIC:
        raise CheckpointError("not a denoiser checkpoint (bad magic bytes)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    vocab_hash = r.take(32)
    if expected_vocab_hash is not None and vocab_hash != expected_vocab_hash:
        raise VocabMismatchError(
            f"checkpoint vocabulary hash {vocab_hash.hex()[:16]}... does not match {expected_vocab_hash.hex()[:16]}..."
        )
    try:
        cfg = DenoiserConfig.from_text(r.text())
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"bad config block: {exc}") from exc
    params: Params = {}
    for _ in range(r.u32()):
        name = r.text()
        rank = r.u32()
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank))
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(dims)
        params[name] = ag.parameter(data, name)
    if r.pos != len(r.raw):
        raise CheckpointError("trailing bytes after checkpoint payload")
    check_params(params, cfg)
    return params, cfg, vocab_hash
