"""SAFE strings: dot-joined fragments whose attachment points are paired
ring-closure numbers, plus fixed-length tokenization.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .molgraph import BondOrder, MolGraph, SmilesError, canonical_rankings, parse_smiles, write_canonical, write_smiles

__all__ = [
    "PAD",
    "MAX_CUTS",
    "SafeError",
    "TokenizeError",
    "Vocabulary",
    "find_cuts",
    "training_cuts",
    "encode_safe",
    "decode_safe",
    "permute_fragments",
    "split_tokens",
    "tokenize",
    "detokenize",
    "build_vocab",
]

PAD = "[PAD]"
MAX_CUTS = 8

# bracket atoms, two-letter halogens, %nn closures, then any single character
_TOKEN_RE = re.compile(r"\[[^\]]*\]|Cl|Br|%\d\d|.")


class SafeError(ValueError):
    pass


class TokenizeError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


def find_cuts(mol: MolGraph) -> list[int]:
    """Acyclic single bonds joining two heavy atoms of degree >= 2."""
    return [
        k
        for k, b in enumerate(mol.bonds)
        if b.order is BondOrder.SINGLE
        and not b.in_ring
        and mol.degree(b.begin) >= 2
        and mol.degree(b.end) >= 2
    ]


# a cut rule maps a molecule to candidate bond indices; swap in BRICS-like rules here
CutRule = Callable[[MolGraph], list[int]]


def training_cuts(mol: MolGraph, rule: CutRule = find_cuts, cap: int = MAX_CUTS) -> list[int]:
    return sorted(rule(mol))[:cap]


def encode_safe(mol: MolGraph, cuts: Sequence[int]) -> str:
    """Render ``mol`` as fragments separated by '.', one number pair per cut bond."""
    if not cuts:
        return write_canonical(mol)
    cuts = list(cuts)
    for k in cuts:
        if not 0 <= k < len(mol.bonds):
            raise SafeError(f"cut index {k} out of range")
        if mol.bonds[k].in_ring:
            raise SafeError(f"cut bond {k} lies in a ring")
    if len(set(cuts)) != len(cuts):
        raise SafeError("duplicate cut index")
    numbers = {k: n for n, k in enumerate(sorted(cuts), start=1)}
    ranks = canonical_rankings(mol)[0]
    fragments = write_smiles(mol, ranks, cut_bonds=cuts, attachment_numbers=numbers)
    return ".".join(sorted(fragments))


def decode_safe(text: str) -> MolGraph:
    """Parse a SAFE string; unpaired attachment numbers are errors."""
    try:
        return parse_smiles(text)
    except SmilesError as exc:
        if "unmatched ring closure" in str(exc):
            raise SafeError(f"dangling attachment point: {exc}") from exc
        raise


def permute_fragments(text: str, rng: random.Random) -> str:
    fragments = text.split(".")
    rng.shuffle(fragments)
    return ".".join(fragments)


def split_tokens(text: str) -> list[str]:
    """Regex split used to discover vocabulary tokens."""
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    max_len: int
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _by_length: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens.count(PAD) != 1 or self.tokens[0] != PAD:
            raise ValueError("vocabulary must contain the pad token exactly once, first")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be distinct")
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})
        object.__setattr__(self, "_by_length", tuple(sorted(self.tokens[1:], key=lambda t: (-len(t), t))))

    @property
    def size(self) -> int:
        return len(self.tokens)

    K = size

    @property
    def pad_id(self) -> int:
        return 0

    def index(self, token: str) -> int:
        return self._index[token]

    def to_text(self) -> str:
        return "".join([f"L={self.max_len}\n"] + [t + "\n" for t in self.tokens])

    def sha256(self) -> bytes:
        return hashlib.sha256(self.to_text().encode("utf-8")).digest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_text(Path(path).read_bytes().decode("utf-8"))

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or not lines[0].startswith("L="):
            raise ValueError("vocabulary file must start with 'L=<int>'")
        try:
            max_len = int(lines[0][2:])
        except ValueError as exc:
            raise ValueError(f"bad length line {lines[0]!r}") from exc
        return cls(tuple(lines[1:]), max_len)


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Greedy longest-match tokenization, right-padded to ``vocab.max_len``."""
    ids = []
    i = 0
    while i < len(text):
        for tok in vocab._by_length:
            if text.startswith(tok, i):
                ids.append(vocab._index[tok])
                i += len(tok)
                break
        else:
            raise TokenizeError(f"unknown token at {text[i:i + 8]!r}", i)
    if len(ids) > vocab.max_len:
        raise TokenizeError(f"sequence of {len(ids)} tokens exceeds max_len {vocab.max_len}")
    return ids + [vocab.pad_id] * (vocab.max_len - len(ids))


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    # interior pads are dropped, validity is for the parser to judge
    return "".join(vocab.tokens[i] for i in ids if i != vocab.pad_id)


@dataclass
class VocabReport:
    vocab: Vocabulary
    n_total: int
    n_fitting: int
    excluded: list[int]

    @property
    def coverage(self) -> float:
        return self.n_fitting / self.n_total


def build_vocab(corpus: Sequence[str], max_len: int) -> VocabReport:
    """Vocabulary over SAFE strings; strings longer than ``max_len`` are excluded."""
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    tokens: set[str] = set()
    excluded = []
    for i, text in enumerate(corpus):
        toks = split_tokens(text)
        if len(toks) > max_len:
            excluded.append(i)
            continue
        tokens.update(toks)
    tokens.discard(PAD)
    vocab = Vocabulary((PAD,) + tuple(sorted(tokens)), max_len)
    return VocabReport(vocab, len(corpus), len(corpus) - len(excluded), excluded)
