"""Coarse, language-agnostic classification of extracted edits.

The taxonomy deliberately avoids POS or lemma resources: it distinguishes
only what can be read off the edit surface (punctuation, casing/whitespace,
near-miss spellings, token reordering, missing/unnecessary tokens).
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from enum import Enum
from typing import Iterable

from .errors import EmptyInput
from .m2score import Edit, extract_edits
from .textcore import ErroneousPair, LangProfile, TokenSeq, tokenize


class ErrorType(Enum):
    PUNCT = "PUNCT"
    ORTH = "ORTH"
    SPELL = "SPELL"
    WORDORDER = "WORDORDER"
    MISSING = "MISSING"
    UNNECESSARY = "UNNECESSARY"
    OTHER = "OTHER"

    def __str__(self) -> str:
        return self.value


def _punct_only(token: str) -> bool:
    return bool(token) and all(unicodedata.category(c).startswith("P") for c in token)


def _char_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cur[j] = min(
                prev[j - 1] + (0 if ca == cb else 1),
                prev[j] + 1,
                cur[j - 1] + 1,
            )
        prev = cur
    return prev[-1]


def classify_edit(edit: Edit, source: TokenSeq) -> ErrorType:
    """First matching rule wins; every edit gets exactly one type."""
    original = tuple(source[edit.start : edit.end])
    replacement = edit.replacement
    if not original:
        return ErrorType.MISSING
    if not replacement:
        return ErrorType.UNNECESSARY
    if all(_punct_only(t) for t in original) and all(_punct_only(t) for t in replacement):
        return ErrorType.PUNCT
    if "".join(original).casefold() == "".join(replacement).casefold():
        return ErrorType.ORTH
    if len(original) == 1 and len(replacement) == 1:
        a, b = original[0], replacement[0]
        distance = _char_distance(a, b) / max(len(a), len(b))
        if distance <= 0.5 and a[0].casefold() == b[0].casefold():
            return ErrorType.SPELL
    if len(original) >= 2 and sorted(original) == sorted(replacement):
        return ErrorType.WORDORDER
    return ErrorType.OTHER


def classify_pair(
    pair: ErroneousPair, profile: LangProfile | None = None
) -> list[ErrorType]:
    """Types of the corrections that turn the erroneous source into the target.

    Extraction runs with max_unchanged=0: for error analysis each minimal
    change is its own edit, rather than the scorer's default of merging
    changes across up to two unchanged tokens (which would lump unrelated
    errors into one span). Adjacent changed runs still form single edits,
    so reorderings classify as WORDORDER.
    """
    if profile is None:
        profile = LangProfile()
    erroneous = tokenize(pair.source, profile)
    corrected = tokenize(pair.target, profile)
    edits = extract_edits(erroneous, corrected, max_unchanged=0)
    return [classify_edit(e, erroneous) for e in edits]


def type_distribution(
    pairs: Iterable[ErroneousPair], profile: LangProfile | None = None
) -> dict[ErrorType, float]:
    """Normalized histogram of correction types over a dataset of pairs.

    Identity pairs contribute no edits; a dataset with no edits at all
    yields an empty histogram.
    """
    counts: Counter[ErrorType] = Counter()
    seen = 0
    for pair in pairs:
        seen += 1
        counts.update(classify_pair(pair, profile))
    if not seen:
        raise EmptyInput("no pairs to analyze")
    total = sum(counts.values())
    if not total:
        return {}
    return {etype: counts[etype] / total for etype in sorted(counts, key=lambda e: e.value)}
