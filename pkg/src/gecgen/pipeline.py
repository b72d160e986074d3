"""Corpus ingestion and the noise -> predict -> sample -> infill -> post-edit run.

Records are processed in fixed chunks keyed by record id, with all
randomness derived per (record, stage), so the emitted file is a pure
function of (corpus bytes, configs, seed) no matter how many workers run.
Output is UTF-8 TSV ``source<TAB>target<TAB>provenance``, one pair per
line, LF newlines.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import BackendUnavailable, CountError, GecGenError, InputError, ParseError
from .noiser import CorruptedSeq, NoiseConfig, apply_token_noise
from .postedit import PostEditConfig, corrupt_chars
from .predictor import (
    PredictionRequest,
    PredictorBackend,
    SamplingConfig,
    infill,
    sample_replacements,
)
from .rulegen import ConfusionSet, RuleConfig, rule_corrupt
from .textcore import (
    MASK,
    STAGE_MIX,
    STAGE_NOISER,
    STAGE_POSTEDIT,
    STAGE_RULE,
    STAGE_SAMPLER,
    ErroneousPair,
    LangProfile,
    derive_record_rng,
    detokenize,
    normalize_ws,
    tokenize,
)

log = logging.getLogger("gecgen.pipeline")

DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class FilterConfig:
    min_len: int = 1
    max_len: int = 128
    max_masks: int = 64
    min_ratio: float = 0.2
    max_ratio: float = 5.0


def apply_filters(
    en_count: int, target_count: int, mask_count: int | None, cfg: FilterConfig
) -> str | None:
    """Reason to drop the record, or None to keep it.

    ``mask_count`` may be None before noising (the mask rule is skipped).
    """
    if not cfg.min_len <= target_count <= cfg.max_len:
        return "length"
    ratio = en_count / target_count
    if not cfg.min_ratio <= ratio <= cfg.max_ratio:
        return "ratio"
    if mask_count is not None and mask_count > cfg.max_masks:
        return "masks"
    return None


@dataclass
class GenStats:
    records_read: int = 0
    records_emitted: int = 0
    records_filtered: int = 0
    filter_reasons: Counter = field(default_factory=Counter)
    op_counts: Counter = field(default_factory=Counter)
    masks_created: int = 0
    masks_filled: int = 0
    backend_retries: int = 0

    def check(self) -> None:
        assert self.records_read == self.records_emitted + self.records_filtered

    def merge(self, other: "GenStats") -> None:
        self.records_read += other.records_read
        self.records_emitted += other.records_emitted
        self.records_filtered += other.records_filtered
        self.filter_reasons.update(other.filter_reasons)
        self.op_counts.update(other.op_counts)
        self.masks_created += other.masks_created
        self.masks_filled += other.masks_filled

    @property
    def mask_fill_rate(self) -> float:
        return self.masks_filled / self.masks_created if self.masks_created else 1.0

    def as_dict(self) -> dict:
        return {
            "records_read": self.records_read,
            "records_emitted": self.records_emitted,
            "records_filtered": self.records_filtered,
            "filter_reasons": dict(self.filter_reasons),
            "op_counts": dict(self.op_counts),
            "masks_created": self.masks_created,
            "masks_filled": self.masks_filled,
            "mask_fill_rate": self.mask_fill_rate,
            "backend_retries": self.backend_retries,
        }


class GenerationAborted(GecGenError):
    """Backend gave up mid-run; everything before ``last_record_id`` is safe."""

    def __init__(self, message: str, last_record_id: int, stats: GenStats):
        super().__init__(message)
        self.last_record_id = last_record_id
        self.stats = stats


RawRecord = tuple[int, str, str, str | None]  # id, english, target, problem


class BitextCorpus:
    """Line-aligned bitext, either one TSV file or two parallel text files."""

    def __init__(self, kind: str, paths: tuple[Path, ...]):
        self.kind = kind
        self.paths = paths

    @classmethod
    def from_tsv(cls, path: str | Path) -> "BitextCorpus":
        return cls("tsv", (Path(path),))

    @classmethod
    def from_paired(cls, en_path: str | Path, target_path: str | Path) -> "BitextCorpus":
        return cls("paired", (Path(en_path), Path(target_path)))

    def __iter__(self) -> Iterator[RawRecord]:
        if self.kind == "tsv":
            yield from self._iter_tsv()
        else:
            yield from self._iter_paired()

    def _iter_tsv(self) -> Iterator[RawRecord]:
        with open(self.paths[0], encoding="utf-8") as f:
            for idx, line in enumerate(f):
                line = line.rstrip("\n")
                parts = line.split("\t")
                if len(parts) != 2:
                    yield idx, "", "", f"expected 2 tab-separated fields, got {len(parts)}"
                else:
                    yield idx, parts[0], parts[1], None

    def _iter_paired(self) -> Iterator[RawRecord]:
        with open(self.paths[0], encoding="utf-8") as f_en, open(
            self.paths[1], encoding="utf-8"
        ) as f_tgt:
            idx = 0
            while True:
                en = f_en.readline()
                tgt = f_tgt.readline()
                if not en and not tgt:
                    return
                if not en or not tgt:
                    raise InputError(
                        f"line counts differ between {self.paths[0]} and {self.paths[1]}"
                    )
                problem = None
                if "\t" in en or "\t" in tgt:
                    problem = "tab character inside text"
                yield idx, en.rstrip("\n"), tgt.rstrip("\n"), problem
                idx += 1


@dataclass
class _RunContext:
    profile: LangProfile
    noise: NoiseConfig
    sampling: SamplingConfig
    postedit: PostEditConfig
    backend: PredictorBackend
    filters: FilterConfig
    seed: int
    top_k: int


def _validate_record(record: RawRecord) -> tuple[str, str] | str:
    """Normalized (en, target) texts, or a reason string to skip the record."""
    _, en, target, problem = record
    if problem:
        return problem
    en, target = normalize_ws(en), normalize_ws(target)
    if not en or not target:
        return "empty text"
    if MASK in en.split() or MASK in target.split():
        return "reserved mask sentinel in input"
    return en, target


def _process_chunk(
    records: list[RawRecord], ctx: _RunContext
) -> tuple[list[ErroneousPair], GenStats]:
    stats = GenStats()
    staged: list[tuple[int, str, CorruptedSeq, list[str]]] = []
    requests: list[PredictionRequest] = []

    for record in records:
        stats.records_read += 1
        rec_id = record[0]
        checked = _validate_record(record)
        if isinstance(checked, str):
            stats.records_filtered += 1
            stats.filter_reasons["malformed"] += 1
            log.warning("record %d skipped: %s", rec_id, checked)
            continue
        en, target = checked
        target_tokens = tokenize(target, ctx.profile)
        reason = apply_filters(len(en.split()), len(target_tokens), None, ctx.filters)
        if reason:
            stats.records_filtered += 1
            stats.filter_reasons[reason] += 1
            continue
        corrupted = apply_token_noise(
            target_tokens, ctx.noise, derive_record_rng(ctx.seed, rec_id, STAGE_NOISER)
        )
        reason = apply_filters(
            len(en.split()), len(target_tokens), len(corrupted.mask_positions), ctx.filters
        )
        if reason:
            stats.records_filtered += 1
            stats.filter_reasons[reason] += 1
            continue
        stats.op_counts.update(op for _, op in corrupted.ops_applied)
        stats.masks_created += len(corrupted.mask_positions)
        staged.append((rec_id, en, corrupted, target_tokens))
        if corrupted.mask_positions:
            requests.append(
                PredictionRequest(
                    id=str(rec_id),
                    source_en=en,
                    target_tokens=tuple(corrupted.tokens),
                    top_k=ctx.top_k,
                )
            )

    predictions = dict(
        zip((r.id for r in requests), ctx.backend.predict(requests) if requests else [])
    )

    pairs: list[ErroneousPair] = []
    for rec_id, en, corrupted, target_tokens in staged:
        if corrupted.mask_positions:
            preds = predictions[str(rec_id)]
            samples = sample_replacements(
                preds, ctx.sampling, derive_record_rng(ctx.seed, rec_id, STAGE_SAMPLER)
            )
            erroneous_tokens = infill(corrupted, samples)
            stats.masks_filled += len(samples)
        else:
            erroneous_tokens = list(corrupted.tokens)
        text = detokenize(erroneous_tokens, ctx.profile)
        noised = corrupt_chars(
            text,
            ctx.postedit,
            ctx.profile,
            derive_record_rng(ctx.seed, rec_id, STAGE_POSTEDIT),
        )
        stats.op_counts.update(f"char_{op}" for _, op in noised.ops_applied)
        pair = ErroneousPair(
            source=noised.text,
            target=detokenize(target_tokens, ctx.profile),
            record_id=rec_id,
            provenance="nat",
        )
        assert MASK not in pair.source.split() and pair.source
        stats.records_emitted += 1
        pairs.append(pair)
    return pairs, stats


def _chunked(records: Iterable[RawRecord], size: int) -> Iterator[list[RawRecord]]:
    chunk: list[RawRecord] = []
    for record in records:
        chunk.append(record)
        if len(chunk) >= size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def generate_dataset(
    corpus: BitextCorpus,
    *,
    profile: LangProfile,
    noise: NoiseConfig,
    sampling: SamplingConfig,
    postedit: PostEditConfig,
    backend: PredictorBackend,
    filters: FilterConfig | None = None,
    seed: int = 0,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> tuple[Iterator[ErroneousPair], GenStats]:
    """Run the full corruption pipeline over a bitext corpus.

    Returns a pair iterator (ascending record id) and the stats object,
    which is complete once the iterator is exhausted. Worker count affects
    throughput only, never content or order.
    """
    filters = filters or FilterConfig()
    ctx = _RunContext(
        profile=profile,
        noise=noise,
        sampling=sampling,
        postedit=postedit,
        backend=backend,
        filters=filters,
        seed=seed,
        top_k=sampling.top_k,
    )
    stats = GenStats()

    def run() -> Iterator[ErroneousPair]:
        chunks = _chunked(iter(corpus), batch_size)
        window = max(2, workers * 2)
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            in_flight: dict[int, Future] = {}
            done_chunks: dict[int, tuple[list[ErroneousPair], GenStats]] = {}
            next_submit = 0
            next_yield = 0
            exhausted = False
            try:
                while True:
                    while not exhausted and len(in_flight) < window:
                        chunk = next(chunks, None)
                        if chunk is None:
                            exhausted = True
                            break
                        in_flight[next_submit] = pool.submit(_process_chunk, chunk, ctx)
                        next_submit += 1
                    if next_yield in done_chunks:
                        pairs, chunk_stats = done_chunks.pop(next_yield)
                        stats.merge(chunk_stats)
                        next_yield += 1
                        yield from pairs
                        continue
                    if next_yield in in_flight:
                        future = in_flight.pop(next_yield)
                        done_chunks[next_yield] = future.result()
                        continue
                    if not in_flight and exhausted:
                        break
                    if in_flight:
                        done, _ = wait(list(in_flight.values()), return_when=FIRST_COMPLETED)
                        for idx in [i for i, f in in_flight.items() if f in done]:
                            done_chunks[idx] = in_flight.pop(idx).result()
            except BackendUnavailable as exc:
                for future in in_flight.values():
                    future.cancel()
                retries = getattr(ctx.backend, "retry_count", 0)
                stats.backend_retries = retries
                raise GenerationAborted(str(exc), _last_record_id(stats), stats) from exc
            stats.backend_retries = getattr(ctx.backend, "retry_count", 0)
            stats.check()

    return run(), stats


def _last_record_id(stats: GenStats) -> int:
    return stats.records_read - 1


def generate_rule_dataset(
    lines: Iterable[str],
    cfg: RuleConfig,
    confusion: ConfusionSet | None,
    profile: LangProfile,
    seed: int = 0,
) -> tuple[Iterator[ErroneousPair], GenStats]:
    """Rule-corrupt a monolingual corpus (one sentence per line)."""
    stats = GenStats()

    def run() -> Iterator[ErroneousPair]:
        for rec_id, raw in enumerate(lines):
            stats.records_read += 1
            text = normalize_ws(raw)
            if not text or MASK in text.split():
                stats.records_filtered += 1
                stats.filter_reasons["malformed"] += 1
                continue
            seq = tokenize(text, profile)
            rng = derive_record_rng(seed, rec_id, STAGE_RULE)
            corrupted = rule_corrupt(seq, cfg, confusion, rng, profile)
            stats.records_emitted += 1
            yield ErroneousPair(
                source=detokenize(corrupted, profile),
                target=detokenize(seq, profile),
                record_id=rec_id,
                provenance="rule",
            )
        stats.check()

    return run(), stats


# ---------------------------------------------------------------------------
# Pair file IO and dataset mixing
# ---------------------------------------------------------------------------

def pair_to_line(pair: ErroneousPair) -> str:
    for text in (pair.source, pair.target):
        if "\t" in text or "\n" in text:
            raise InputError("tab or newline inside pair text")
    return f"{pair.source}\t{pair.target}\t{pair.provenance}\n"


def parse_pair_line(line: str, lineno: int = 0) -> ErroneousPair:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
    return ErroneousPair(parts[0], parts[1], record_id=lineno - 1, provenance=parts[2])


def write_pairs(path: str | Path, pairs: Iterable[ErroneousPair]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for pair in pairs:
            f.write(pair_to_line(pair))
            count += 1
    return count


def read_pairs(path: str | Path) -> Iterator[ErroneousPair]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            yield parse_pair_line(line, lineno)


def _reservoir(pairs: Iterator[ErroneousPair], n: int, rng) -> list[ErroneousPair]:
    sample: list[ErroneousPair] = []
    seen = 0
    for pair in pairs:
        seen += 1
        if len(sample) < n:
            sample.append(pair)
        else:
            j = rng.randrange(seen)
            if j < n:
                sample[j] = pair
    if seen < n:
        raise CountError(f"requested {n} records but file has only {seen}")
    return sample


def mix_datasets(
    path_a: str | Path,
    path_b: str | Path,
    n_a: int,
    n_b: int,
    seed: int,
    out_path: str | Path,
) -> int:
    """Sample n_a + n_b pairs from two files, shuffle, and write them out."""
    rng = derive_record_rng(seed, 0, STAGE_MIX)
    sampled = _reservoir(read_pairs(path_a), n_a, rng)
    sampled += _reservoir(read_pairs(path_b), n_b, rng)
    rng.shuffle(sampled)
    return write_pairs(out_path, sampled)


# ---------------------------------------------------------------------------
# File-level driver used by the CLI
# ---------------------------------------------------------------------------

def run_generation(
    corpus: BitextCorpus,
    out_path: str | Path,
    **kwargs,
) -> GenStats:
    """Generate to a TSV file; on backend exhaustion, leave a resume manifest."""
    out_path = Path(out_path)
    pairs, stats = generate_dataset(corpus, **kwargs)
    written = 0
    last_id = -1
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            for pair in pairs:
                f.write(pair_to_line(pair))
                written += 1
                last_id = pair.record_id
    except GenerationAborted as exc:
        manifest = {
            "output": str(out_path),
            "pairs_written": written,
            "last_completed_record_id": last_id,
            "reason": str(exc),
        }
        manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
        manifest_path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
        log.error("generation aborted after record %d: %s", last_id, exc)
        raise
    write_stats(out_path, stats)
    return stats


def write_stats(out_path: str | Path, stats: GenStats) -> Path:
    out_path = Path(out_path)
    stats_path = out_path.with_suffix(out_path.suffix + ".stats.json")
    stats_path.write_text(
        json.dumps(stats.as_dict(), indent=1, sort_keys=True), encoding="utf-8"
    )
    return stats_path
