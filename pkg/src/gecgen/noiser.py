"""Token-level corruption: select tokens and mask/insert/delete/swap them.

The output keeps the positions of all introduced mask sentinels plus a log
of what happened at each original position, so downstream stages (and the
calibration tests) can account for every draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigError
from .textcore import MASK, RngStream, TokenSeq, categorical_index

_PROB_TOL = 1e-9

OP_MASK = "mask"
OP_INSERT = "insert"
OP_DELETE = "delete"
OP_SWAP = "swap"
# Selected but degenerated to a no-op; excluded from calibration denominators.
OP_DELETE_SPARED = "delete_spared"
OP_SWAP_NOOP = "swap_noop"


class AppliedOp(NamedTuple):
    index: int  # position in the original sequence
    op: str


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class NoiseConfig:
    """Per-token selection probability and the four operation weights."""

    p_noise: float
    p_mask: float
    p_insert: float
    p_delete: float
    p_swap: float

    def __post_init__(self):
        _check_probability("p_noise", self.p_noise)
        total = 0.0
        for name in ("p_mask", "p_insert", "p_delete", "p_swap"):
            value = getattr(self, name)
            _check_probability(name, value)
            total += value
        if abs(total - 1.0) > _PROB_TOL:
            raise ConfigError(f"operation probabilities must sum to 1, got {total}")

    @property
    def op_probs(self) -> tuple[float, float, float, float]:
        return (self.p_mask, self.p_insert, self.p_delete, self.p_swap)


_OPS = (OP_MASK, OP_INSERT, OP_DELETE, OP_SWAP)


@dataclass
class CorruptedSeq:
    """A noised token sequence with its mask positions and provenance log."""

    tokens: TokenSeq
    mask_positions: list[int]
    ops_applied: list[AppliedOp] = field(default_factory=list)

    def __post_init__(self):
        masks = {i for i, tok in enumerate(self.tokens) if tok == MASK}
        if masks != set(self.mask_positions):
            raise ValueError(
                f"mask positions {sorted(self.mask_positions)} do not cover "
                f"sentinel occurrences {sorted(masks)}"
            )
        if not self.tokens:
            raise ValueError("corrupted sequence may not be empty")


def apply_token_noise(seq: TokenSeq, cfg: NoiseConfig, rng: RngStream) -> CorruptedSeq:
    """Corrupt a token sequence with Mask/Insert/Delete/Swap operations.

    Original positions are visited left to right. Each visited position
    consumes one selection draw; a selected position consumes one more draw
    to pick the operation (even when it degenerates to a no-op). A swap
    exchanges the token with its right neighbour and skips the neighbour
    entirely; a swap at the last position is a no-op. A delete that would
    leave the output empty is spared.
    """
    out: TokenSeq = []
    mask_positions: list[int] = []
    ops: list[AppliedOp] = []
    n = len(seq)
    i = 0
    while i < n:
        if rng.to_unit() >= cfg.p_noise:
            out.append(seq[i])
            i += 1
            continue
        op = _OPS[categorical_index(rng.to_unit(), cfg.op_probs)]
        if op == OP_MASK:
            out.append(MASK)
            mask_positions.append(len(out) - 1)
            ops.append(AppliedOp(i, OP_MASK))
            i += 1
        elif op == OP_INSERT:
            out.append(seq[i])
            out.append(MASK)
            mask_positions.append(len(out) - 1)
            ops.append(AppliedOp(i, OP_INSERT))
            i += 1
        elif op == OP_DELETE:
            if i == n - 1 and not out:
                out.append(seq[i])
                ops.append(AppliedOp(i, OP_DELETE_SPARED))
            else:
                ops.append(AppliedOp(i, OP_DELETE))
            i += 1
        else:  # swap
            if i == n - 1:
                out.append(seq[i])
                ops.append(AppliedOp(i, OP_SWAP_NOOP))
                i += 1
            else:
                out.append(seq[i + 1])
                out.append(seq[i])
                ops.append(AppliedOp(i, OP_SWAP))
                i += 2
    return CorruptedSeq(out, mask_positions, ops)


def expected_mask_fraction(cfg: NoiseConfig) -> float:
    """Expected sentinels introduced per selection opportunity."""
    return cfg.p_noise * (cfg.p_mask + cfg.p_insert)
