"""Rule-based corruption baseline over monolingual target sentences.

No predictor involved: tokens are substituted (optionally through a
file-supplied confusion set), inserted, deleted, swapped, or recased, with an
optional character-noise pass on the detokenized result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import ConfigError, ParseError
from .noiser import AppliedOp
from .postedit import PostEditConfig, apply_char_noise
from .textcore import (
    MASK,
    ErroneousPair,
    LangProfile,
    RngStream,
    TokenSeq,
    categorical_index,
    detokenize,
    tokenize,
)

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


class ConfusionSet:
    """Exact-match token -> alternatives map loaded from a TSV file."""

    def __init__(self, entries: Mapping[str, list[str]]):
        for key, alts in entries.items():
            if not alts:
                raise ConfigError(f"confusion entry {key!r} has no alternatives")
            if key in alts:
                raise ConfigError(f"confusion entry {key!r} lists itself")
        self.entries = dict(entries)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def alternatives(self, token: str) -> list[str]:
        return self.entries[token]

    @classmethod
    def from_tsv(cls, path: str) -> "ConfusionSet":
        """One line per key: ``key<TAB>alt1 alt2 ...`` (UTF-8)."""
        entries: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                key, sep, rest = line.partition("\t")
                if not sep or not key:
                    raise ParseError("expected 'key<TAB>alternatives'", lineno)
                alts = rest.split()
                if not alts:
                    raise ParseError(f"no alternatives for key {key!r}", lineno)
                entries[key] = alts
        return cls(entries)


@dataclass(frozen=True)
class RuleConfig:
    """Token-level rule corruption parameters plus optional char noise."""

    p_noise: float
    p_substitute: float
    p_insert: float
    p_delete: float
    p_swap: float
    p_recase: float
    p_confusion: float = 0.0
    char_noise: PostEditConfig | None = None

    def __post_init__(self):
        for name in (
            "p_noise", "p_substitute", "p_insert", "p_delete",
            "p_swap", "p_recase", "p_confusion",
        ):
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


def _substitute_token(
    token: str, seq: TokenSeq, cfg: RuleConfig, cs: ConfusionSet | None, rng: RngStream
) -> str:
    if cs is not None and token in cs and rng.to_unit() < cfg.p_confusion:
        alts = cs.alternatives(token)
        return alts[rng.randrange(len(alts))]
    return seq[rng.randrange(len(seq))]


def rule_corrupt(
    seq: TokenSeq,
    cfg: RuleConfig,
    cs: ConfusionSet | None,
    rng: RngStream,
    profile: LangProfile | None = None,
) -> TokenSeq:
    """Corrupt tokens by rule; same iteration and draw discipline as the noiser.

    Substitution consults the confusion set (when the token has an entry)
    with probability ``p_confusion``, otherwise falls back to a uniformly
    random token of the sentence. Insert duplicates a random sentence token
    after the position. Recase toggles the first character's case. The
    optional char-noise pass runs on the detokenized result and continues
    consuming the same stream.
    """
    if profile is None:
        profile = LangProfile()
    if cfg.p_recase > 0 and not profile.bicameral:
        raise ConfigError("p_recase must be 0 for a non-bicameral profile")

    out: TokenSeq = []
    ops: list[AppliedOp] = []
    n = len(seq)
    i = 0
    while i < n:
        if rng.to_unit() >= cfg.p_noise:
            out.append(seq[i])
            i += 1
            continue
        op = _OPS[categorical_index(rng.to_unit(), cfg.op_probs)]
        if op == OP_SUBSTITUTE:
            out.append(_substitute_token(seq[i], seq, cfg, cs, rng))
            ops.append(AppliedOp(i, OP_SUBSTITUTE))
            i += 1
        elif op == OP_INSERT:
            out.append(seq[i])
            out.append(seq[rng.randrange(n)])
            ops.append(AppliedOp(i, OP_INSERT))
            i += 1
        elif op == OP_DELETE:
            if i == n - 1 and not out:
                out.append(seq[i])
                ops.append(AppliedOp(i, OP_DELETE_SPARED))
            else:
                ops.append(AppliedOp(i, OP_DELETE))
            i += 1
        elif op == OP_SWAP:
            if i == n - 1:
                out.append(seq[i])
                ops.append(AppliedOp(i, OP_SWAP_NOOP))
                i += 1
            else:
                out.append(seq[i + 1])
                out.append(seq[i])
                ops.append(AppliedOp(i, OP_SWAP))
                i += 2
        else:  # recase
            token = seq[i]
            toggled = token[0].swapcase() + token[1:]
            out.append(toggled)
            ops.append(AppliedOp(i, OP_RECASE if toggled != token else OP_RECASE_NOOP))
            i += 1

    assert MASK not in out
    if cfg.char_noise is not None:
        text = apply_char_noise(detokenize(out, profile), cfg.char_noise, profile, rng)
        out = tokenize(text, profile)
    return out


def make_rule_pair(
    seq: TokenSeq,
    cfg: RuleConfig,
    cs: ConfusionSet | None,
    rng: RngStream,
    profile: LangProfile | None = None,
    record_id: int = 0,
) -> ErroneousPair:
    """Corrupt a sentence and pair it with the untouched original."""
    if profile is None:
        profile = LangProfile()
    corrupted = rule_corrupt(seq, cfg, cs, rng, profile)
    return ErroneousPair(
        source=detokenize(corrupted, profile),
        target=detokenize(seq, profile),
        record_id=record_id,
        provenance="rule",
    )
