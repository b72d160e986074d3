"""Tokenization, corpus record types, and the deterministic RNG contract.

Everything stochastic in this package draws from :class:`RngStream`
(SplitMix64), never from ``random``, so that output files are bit-identical
across runs, platforms, and worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import regex

from .errors import EmptyInput

MASK = "[MASK]"

# Per-record stream separation tags (see derive_record_rng).
STAGE_NOISER = 0
STAGE_SAMPLER = 1
STAGE_POSTEDIT = 2
STAGE_RULE = 3
STAGE_MIX = 4

TokenSeq = list[str]

_GRAPHEME = regex.compile(r"\X")


@dataclass(frozen=True)
class SentencePair:
    """One bitext record: an English sentence and its aligned translation."""

    id: int
    source_en: str
    target: str


@dataclass(frozen=True)
class ErroneousPair:
    """One synthetic training pair: corrupted source, clean target."""

    source: str
    target: str
    record_id: int
    provenance: str  # "nat", "rule", or a tag preserved through mixing


@dataclass(frozen=True)
class LangProfile:
    """Language-level knobs that the corruption stages depend on.

    ``char`` token mode treats each grapheme cluster as a token and
    detokenizes with no separator (e.g. Chinese); ``whitespace`` splits on
    whitespace runs and rejoins with single spaces. ``bicameral`` gates
    casing operations. ``alphabet`` optionally fixes the character pool for
    character-level insert/substitute.
    """

    token_mode: str = "whitespace"
    bicameral: bool = True
    alphabet: str | None = None

    def __post_init__(self):
        if self.token_mode not in ("whitespace", "char"):
            raise ValueError(f"unknown token_mode: {self.token_mode!r}")

    @property
    def joiner(self) -> str:
        return " " if self.token_mode == "whitespace" else ""

    def alphabet_graphemes(self) -> list[str] | None:
        if self.alphabet is None:
            return None
        return graphemes(self.alphabet)


def graphemes(text: str) -> list[str]:
    """Split text into extended grapheme clusters (combining marks attached).

    concurrent=False keeps the match under the GIL: sentence-sized inputs
    finish in microseconds, and the regex module's lock handoff otherwise
    dominates the runtime when worker threads segment in parallel.
    """
    return _GRAPHEME.findall(text, concurrent=False)


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


def tokenize(text: str, profile: LangProfile) -> TokenSeq:
    """Split raw text into tokens according to the profile's token mode.

    Whitespace mode splits on maximal whitespace runs; char mode yields one
    token per grapheme cluster with whitespace graphemes dropped.
    """
    if profile.token_mode == "whitespace":
        tokens = text.split()
    else:
        tokens = [g for g in graphemes(text) if not g.isspace()]
    if not tokens:
        raise EmptyInput("no tokens after whitespace normalization")
    return tokens


def detokenize(seq: Sequence[str], profile: LangProfile) -> str:
    """Join tokens back into raw text (inverse of tokenize for clean input)."""
    if not seq:
        raise EmptyInput("cannot detokenize an empty sequence")
    return profile.joiner.join(seq)


_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: bijective scramble of a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """SplitMix64 stream. Single-owner: never share one across workers."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & _MASK64

    def draw(self) -> int:
        """Next uniform 64-bit value."""
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def to_unit(self) -> float:
        """Next uniform float in [0, 1): draw / 2^64, truncated to 53 bits.

        The truncation keeps the result strictly below 1.0 in IEEE doubles.
        """
        return (self.draw() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Next uniform int in [0, n). Uses integer arithmetic only."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return self.draw() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_record_rng(global_seed: int, record_id: int, stage_tag: int) -> RngStream:
    """Independent stream for (record, stage), regardless of worker layout."""
    state = (global_seed ^ ((record_id * _GAMMA) & _MASK64) ^ stage_tag) & _MASK64
    return RngStream(_mix64(state))


def categorical_index(u: float, probs: Sequence[float]) -> int:
    """Index of the first category whose cumulative probability exceeds u.

    Categories are taken in the given order; u must lie in [0, 1). Rounding
    that leaves the cumulative total fractionally below 1.0 falls through to
    the last category.
    """
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1
