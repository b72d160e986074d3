"""Max-Match evaluation: M2 parsing, edit extraction, and P/R/F-beta.

Edit extraction aligns source and hypothesis on the lattice of *all*
minimal-cost Levenshtein alignments, merges alignment segments into
candidate edits (at most ``max_unchanged`` unchanged tokens inside one
edit), and picks the edit decomposition that first maximizes the number of
edits exactly matching the reference, then uses as few edits as possible,
then is leftmost. Replaying the chosen edits on the source always
reproduces the hypothesis.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .errors import InputError, ParseError
from .textcore import TokenSeq

DEFAULT_BETA = 0.5
DEFAULT_MAX_UNCHANGED = 2


@dataclass(frozen=True)
class Edit:
    """Span replacement on the source: tokens[start:end] -> replacement.

    The optional type label is carried along but ignored by equality, so an
    extracted edit matches a reference edit on span and replacement alone.
    """

    start: int
    end: int
    replacement: tuple[str, ...]
    type: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.start < 0 or self.start > self.end:
            raise ValueError(f"bad edit span ({self.start}, {self.end})")
        if self.start == self.end and not self.replacement:
            raise ValueError("edit cannot be both empty-span and empty-replacement")

    def sort_key(self) -> tuple:
        return (self.start, self.end, self.replacement)


@dataclass
class M2Sentence:
    source: list[str]
    annotations: dict[int, list[Edit]]


@dataclass
class ScoreReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_beta: float


def precision_recall(tp: int, fp: int, fn: int) -> tuple[float, float]:
    """P and R with the usual scorer convention: empty denominators are 1.0."""
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    return p, r


def f_beta(p: float, r: float, beta: float = DEFAULT_BETA) -> float:
    """(1 + b^2) * P * R / (b^2 * P + R); zero when both P and R are zero."""
    denom = beta * beta * p + r
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * p * r / denom


def apply_edits(source: Sequence[str], edits: Sequence[Edit]) -> TokenSeq:
    """Replay edits (sorted by span, in order) on the source tokens."""
    out: list[str] = []
    cursor = 0
    for e in edits:
        if e.start < cursor:
            raise InputError(f"overlapping edit at {e.start} (cursor {cursor})")
        out.extend(source[cursor : e.start])
        out.extend(e.replacement)
        cursor = e.end
    out.extend(source[cursor:])
    return out


# ---------------------------------------------------------------------------
# M2 file parsing
# ---------------------------------------------------------------------------

def parse_m2(source: str | TextIO | Iterable[str]) -> list[M2Sentence]:
    """Parse an M2 file (path, file object, or iterable of lines).

    Blocks are separated by blank lines: one ``S`` token line, then zero or
    more ``A start end|||type|||replacement|||...|||annotator`` lines. The
    ``-1 -1|||noop`` convention registers an annotator with no edits.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as f:
            return _parse_m2_lines(f)
    return _parse_m2_lines(source)


def _parse_m2_lines(lines: Iterable[str]) -> list[M2Sentence]:
    sentences: list[M2Sentence] = []
    current: M2Sentence | None = None

    def flush():
        nonlocal current
        if current is not None:
            for edits in current.annotations.values():
                edits.sort(key=Edit.sort_key)
            sentences.append(current)
            current = None

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("S ") or line == "S":
            if current is not None:
                raise ParseError("unexpected second S line in block", lineno)
            tokens = line[2:].split()
            if not tokens:
                raise ParseError("empty source sentence", lineno)
            current = M2Sentence(source=tokens, annotations={})
        elif line.startswith("A "):
            if current is None:
                raise ParseError("A line before any S line", lineno)
            _parse_annotation(line[2:], current, lineno)
        else:
            raise ParseError(f"unrecognized line {line[:40]!r}", lineno)
    flush()
    return sentences


def _parse_annotation(payload: str, sentence: M2Sentence, lineno: int) -> None:
    fields = payload.split("|||")
    if len(fields) < 6:
        raise ParseError(f"expected 6 '|||' fields, got {len(fields)}", lineno)
    span, etype, replacement = fields[0], fields[1], fields[2]
    try:
        start_s, end_s = span.split()
        start, end = int(start_s), int(end_s)
        annotator = int(fields[5])
    except ValueError:
        raise ParseError(f"bad span or annotator id in {payload!r}", lineno) from None
    edits = sentence.annotations.setdefault(annotator, [])
    if etype == "noop" or (start == -1 and end == -1):
        return
    if not 0 <= start <= end <= len(sentence.source):
        raise ParseError(f"edit span ({start}, {end}) out of bounds", lineno)
    rep = tuple(replacement.split()) if replacement not in ("", "-NONE-") else ()
    if start == end and not rep:
        raise ParseError("empty edit (no span, no replacement)", lineno)
    edit = Edit(start, end, rep, type=etype)
    for other in edits:
        if edit.start < other.end and other.start < edit.end:
            raise ParseError("overlapping edits for one annotator", lineno)
    edits.append(edit)


# ---------------------------------------------------------------------------
# Edit extraction on the Levenshtein lattice
# ---------------------------------------------------------------------------

def _lev_matrix(a: Sequence[str], b: Sequence[str]) -> list[list[int]]:
    n, m = len(a), len(b)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)
    return dist


class _Lattice:
    """All minimal-cost alignments of (source, hypothesis) as a DAG.

    Nodes are DP cells (i, j) that lie on at least one optimal alignment;
    edges are the match/substitute/delete/insert moves consistent with the
    distance matrix.
    """

    def __init__(self, source: Sequence[str], hyp: Sequence[str]):
        self.source = source
        self.hyp = hyp
        n, m = len(source), len(hyp)
        fwd = _lev_matrix(source, hyp)
        back = _lev_matrix(source[::-1], hyp[::-1])
        total = fwd[n][m]
        self.valid = {
            (i, j)
            for i in range(n + 1)
            for j in range(m + 1)
            if fwd[i][j] + back[n - i][m - j] == total
        }
        self.fwd = fwd
        self.n, self.m = n, m

    def moves(self, i: int, j: int) -> list[tuple[int, int, bool]]:
        """Outgoing lattice edges from (i, j) as (i2, j2, is_match)."""
        out = []
        fwd, src, hyp = self.fwd, self.source, self.hyp
        here = fwd[i][j]
        if i < self.n and j < self.m and (i + 1, j + 1) in self.valid:
            step = fwd[i + 1][j + 1]
            if src[i] == hyp[j]:
                if step == here:
                    out.append((i + 1, j + 1, True))
            elif step == here + 1:
                out.append((i + 1, j + 1, False))
        if i < self.n and (i + 1, j) in self.valid and fwd[i + 1][j] == here + 1:
            out.append((i + 1, j, False))
        if j < self.m and (i, j + 1) in self.valid and fwd[i][j + 1] == here + 1:
            out.append((i, j + 1, False))
        return out

    def segments_from(self, start: tuple[int, int], max_unchanged: int):
        """Candidate edit segments beginning at ``start``.

        A segment is a lattice path containing at least one change move and
        at most ``max_unchanged`` match moves in total (unchanged tokens may
        sit anywhere in the edit, boundaries included). Yields
        (end_node, edit) pairs.
        """
        INF = max_unchanged + 1
        # best[node] = (fewest matches on any path, fewest matches on a
        # path that contains at least one change move).
        best: dict[tuple[int, int], tuple[int, int]] = {start: (0, INF)}
        queue = [start]
        head = 0
        while head < len(queue):
            node = queue[head]
            head += 1
            any_m, chg_m = best[node]
            for i2, j2, is_match in self.moves(*node):
                if is_match:
                    cand = (any_m + 1, min(chg_m + 1, INF))
                else:
                    cand = (any_m, min(chg_m, any_m))
                if cand[0] > max_unchanged:
                    continue
                nxt = (i2, j2)
                cur = best.get(nxt)
                merged = cand if cur is None else (min(cur[0], cand[0]), min(cur[1], cand[1]))
                if cur is None or merged != cur:
                    best[nxt] = merged
                    queue.append(nxt)
        i1, j1 = start
        for (i2, j2), (_, chg_m) in best.items():
            if (i2, j2) != start and chg_m <= max_unchanged:
                yield (i2, j2), Edit(i1, i2, tuple(self.hyp[j1:j2]))


class _Best:
    """Shortest-path DP value: scalar weight plus tie-break components.

    A reference-matching edit weighs ``1 - BIG`` and any other edit ``1``,
    with BIG larger than any possible edit count, so minimizing the total
    weight maximizes reference matches first and then minimizes the number
    of edits (the scalarization the original Max-Match scorer uses). Equal
    weights are broken toward smaller total edit size (no padding an edit
    with unchanged context when a tighter one exists), then the leftmost
    edit list.
    """

    __slots__ = ("weight", "size", "edits")

    def __init__(self, weight: int, size: int, edits: tuple[Edit, ...]):
        self.weight = weight
        self.size = size
        self.edits = edits

    def key(self) -> tuple:
        return (self.weight, self.size, tuple(e.sort_key() for e in self.edits))


def _edit_size(edit: Edit) -> int:
    return (edit.end - edit.start) + len(edit.replacement)


def extract_edits(
    source: Sequence[str],
    hypothesis: Sequence[str],
    gold: Sequence[Edit] = (),
    max_unchanged: int = DEFAULT_MAX_UNCHANGED,
) -> list[Edit]:
    """Extract the system edits turning source into hypothesis.

    Among all edit decompositions reachable on the optimal-alignment
    lattice, returns the one with the most edits exactly matching ``gold``,
    breaking ties toward fewer edits and then the leftmost edit list.
    """
    if list(source) == list(hypothesis):
        return []
    lattice = _Lattice(source, hypothesis)
    gold_keys = {(e.start, e.end, e.replacement) for e in gold}
    big = lattice.n + lattice.m + 1  # exceeds any possible edit count

    # Topological order over valid nodes: (i + j) ascending, then i.
    nodes = sorted(lattice.valid, key=lambda ij: (ij[0] + ij[1], ij[0]))
    segments: dict[tuple[int, int], list[tuple[tuple[int, int], Edit]]] = {}
    for node in nodes:
        for end, edit in lattice.segments_from(node, max_unchanged):
            segments.setdefault(end, []).append((node, edit))

    best: dict[tuple[int, int], _Best] = {(0, 0): _Best(0, 0, ())}

    def offer(node: tuple[int, int], cand: _Best) -> None:
        cur = best.get(node)
        if cur is None or cand.key() < cur.key():
            best[node] = cand

    for node in nodes:
        # Settle this node first (segment edges arrive from earlier nodes),
        # then propagate its value along free match edges.
        for start, edit in segments.get(node, ()):
            prev = best.get(start)
            if prev is None:
                continue
            matches_gold = (edit.start, edit.end, edit.replacement) in gold_keys
            weight = prev.weight + (1 - big if matches_gold else 1)
            offer(node, _Best(weight, prev.size + _edit_size(edit), prev.edits + (edit,)))
        cur = best.get(node)
        if cur is not None:
            for i2, j2, is_match in lattice.moves(*node):
                if is_match:
                    offer((i2, j2), cur)

    final = best.get((lattice.n, lattice.m))
    assert final is not None, "lattice end node must be reachable"
    return list(final.edits)


def edit_counts(
    extracted: Sequence[Edit], gold: Sequence[Edit]
) -> tuple[int, int, int]:
    """(tp, fp, fn) for one sentence, matching on span + replacement."""
    sys_counts = Counter((e.start, e.end, e.replacement) for e in extracted)
    gold_counts = Counter((e.start, e.end, e.replacement) for e in gold)
    tp = sum((sys_counts & gold_counts).values())
    return tp, len(extracted) - tp, len(gold) - tp


def evaluate_corpus(
    system_outputs: Sequence[TokenSeq],
    gold: Sequence[M2Sentence],
    beta: float = DEFAULT_BETA,
    max_unchanged: int = DEFAULT_MAX_UNCHANGED,
    lowercase: bool = False,
) -> ScoreReport:
    """Corpus-level Max-Match P/R/F-beta against multi-annotator references.

    For each sentence, the annotator whose counts maximize the running
    cumulative F-beta is chosen (sentences in corpus order, ties to the
    lowest annotator id), mirroring the usual scorer behaviour.
    """
    if len(system_outputs) != len(gold):
        raise InputError(
            f"{len(system_outputs)} outputs vs {len(gold)} reference sentences"
        )
    tp = fp = fn = 0
    for hyp_tokens, sentence in zip(system_outputs, gold):
        source = sentence.source
        hyp = list(hyp_tokens)
        annotations = sentence.annotations or {0: []}
        if lowercase:
            source = [t.lower() for t in source]
            hyp = [t.lower() for t in hyp]
        best_counts = None
        best_f = -1.0
        for annotator in sorted(annotations):
            edits = annotations[annotator]
            if lowercase:
                edits = [
                    Edit(e.start, e.end, tuple(t.lower() for t in e.replacement), e.type)
                    for e in edits
                ]
            extracted = extract_edits(source, hyp, edits, max_unchanged)
            tp_a, fp_a, fn_a = edit_counts(extracted, edits)
            p, r = precision_recall(tp + tp_a, fp + fp_a, fn + fn_a)
            f = f_beta(p, r, beta)
            if f > best_f:
                best_f = f
                best_counts = (tp_a, fp_a, fn_a)
        assert best_counts is not None
        tp += best_counts[0]
        fp += best_counts[1]
        fn += best_counts[2]
    p, r = precision_recall(tp, fp, fn)
    return ScoreReport(tp, fp, fn, p, r, f_beta(p, r, beta))
