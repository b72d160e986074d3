"""Character-level corruption applied after infilling ("spelling errors").

Operates on grapheme clusters of the detokenized sentence with the same
select-then-pick draw discipline as the token noiser. Whitespace graphemes
are never selected, so the token structure of the sentence survives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigError
from .noiser import AppliedOp
from .textcore import LangProfile, RngStream, categorical_index, graphemes

_PROB_TOL = 1e-9

OP_SUBSTITUTE = "substitute"
OP_INSERT = "insert"
OP_DELETE = "delete"
OP_SWAP = "swap"
OP_RECASE = "recase"
OP_DELETE_SPARED = "delete_spared"
OP_SWAP_NOOP = "swap_noop"
OP_RECASE_NOOP = "recase_noop"

_OPS = (OP_SUBSTITUTE, OP_INSERT, OP_DELETE, OP_SWAP, OP_RECASE)


@dataclass(frozen=True)
class PostEditConfig:
    """Per-grapheme selection probability and the five operation weights."""

    p_noise: float
    p_substitute: float
    p_insert: float
    p_delete: float
    p_swap: float
    p_recase: float

    def __post_init__(self):
        for name in ("p_noise", "p_substitute", "p_insert", "p_delete", "p_swap", "p_recase"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        total = (
            self.p_substitute + self.p_insert + self.p_delete + self.p_swap + self.p_recase
        )
        if abs(total - 1.0) > _PROB_TOL:
            raise ConfigError(f"operation probabilities must sum to 1, got {total}")

    @property
    def op_probs(self) -> tuple[float, float, float, float, float]:
        return (self.p_substitute, self.p_insert, self.p_delete, self.p_swap, self.p_recase)


class CharNoiseResult(NamedTuple):
    text: str
    ops_applied: list[AppliedOp]


def _char_pool(profile: LangProfile, sentence_graphemes: list[str]) -> list[str]:
    pool = profile.alphabet_graphemes()
    if pool is None:
        pool = sorted({g for g in sentence_graphemes if not g.isspace()})
    return pool


def corrupt_chars(
    text: str, cfg: PostEditConfig, profile: LangProfile, rng: RngStream
) -> CharNoiseResult:
    """Apply character-level noise, returning the text and the op log.

    Insert/substitute draw the new character uniformly from the profile
    alphabet, or from the sentence's own grapheme set when no alphabet is
    configured. Swap-right exchanges with the next grapheme and skips it;
    recase toggles the grapheme's case (no-op on caseless graphemes, the
    draws are still consumed). A delete that would remove the last surviving
    non-whitespace grapheme is spared.
    """
    if not text:
        raise ConfigError("cannot post-edit empty text")
    if not profile.bicameral and cfg.p_recase > 0:
        raise ConfigError("p_recase must be 0 for a non-bicameral profile")

    chars = graphemes(text)
    pool = _char_pool(profile, chars)
    remaining_solid = [0] * (len(chars) + 1)
    for i in range(len(chars) - 1, -1, -1):
        remaining_solid[i] = remaining_solid[i + 1] + (0 if chars[i].isspace() else 1)

    out: list[str] = []
    ops: list[AppliedOp] = []
    out_solid = 0
    i = 0
    n = len(chars)
    while i < n:
        g = chars[i]
        if g.isspace():
            out.append(g)
            i += 1
            continue
        if rng.to_unit() >= cfg.p_noise:
            out.append(g)
            out_solid += 1
            i += 1
            continue
        op = _OPS[categorical_index(rng.to_unit(), cfg.op_probs)]
        if op == OP_SUBSTITUTE:
            out.append(pool[rng.randrange(len(pool))])
            out_solid += 1
            ops.append(AppliedOp(i, OP_SUBSTITUTE))
            i += 1
        elif op == OP_INSERT:
            out.append(g)
            out.append(pool[rng.randrange(len(pool))])
            out_solid += 2
            ops.append(AppliedOp(i, OP_INSERT))
            i += 1
        elif op == OP_DELETE:
            if out_solid == 0 and remaining_solid[i + 1] == 0:
                out.append(g)
                out_solid += 1
                ops.append(AppliedOp(i, OP_DELETE_SPARED))
            else:
                ops.append(AppliedOp(i, OP_DELETE))
            i += 1
        elif op == OP_SWAP:
            if i == n - 1:
                out.append(g)
                out_solid += 1
                ops.append(AppliedOp(i, OP_SWAP_NOOP))
                i += 1
            else:
                neighbour = chars[i + 1]
                out.append(neighbour)
                out.append(g)
                out_solid += 1 + (0 if neighbour.isspace() else 1)
                ops.append(AppliedOp(i, OP_SWAP))
                i += 2
        else:  # recase
            toggled = g.swapcase()
            out.append(toggled)
            out_solid += 1
            ops.append(AppliedOp(i, OP_RECASE if toggled != g else OP_RECASE_NOOP))
            i += 1
    return CharNoiseResult("".join(out), ops)


def apply_char_noise(
    text: str, cfg: PostEditConfig, profile: LangProfile, rng: RngStream
) -> str:
    """Character-noised copy of the text (see corrupt_chars for semantics)."""
    return corrupt_chars(text, cfg, profile, rng).text
