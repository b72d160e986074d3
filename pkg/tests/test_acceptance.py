"""Acceptance suite: one test per acceptance criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion.
"""

import time
from pathlib import Path

import pytest

from corpusgen import bitext_rows, monolingual_lines, unigram_counts
from gecgen.errortypes import ErrorType, type_distribution
from gecgen.m2score import Edit, apply_edits, edit_counts, extract_edits, f_beta
from gecgen.noiser import (
    OP_DELETE_SPARED,
    OP_INSERT,
    OP_MASK,
    OP_SWAP,
    OP_SWAP_NOOP,
    NoiseConfig,
    apply_token_noise,
    expected_mask_fraction,
)
from gecgen.pipeline import (
    BitextCorpus,
    generate_dataset,
    generate_rule_dataset,
    run_generation,
)
from gecgen.postedit import PostEditConfig
from gecgen.predictor import EchoBackend, LexiconBackend, RemoteBackend, SamplingConfig
from gecgen.rulegen import RuleConfig
from gecgen.stubserver import StubServer
from gecgen.textcore import MASK, LangProfile, RngStream, derive_record_rng
from m2_oracle import oracle_counts

DATA = Path(__file__).parent / "data"
WS = LangProfile()

GERMAN_NOISE = NoiseConfig(p_noise=0.3, p_mask=0.65, p_insert=0.15, p_delete=0.15, p_swap=0.05)
GERMAN_POST = PostEditConfig(0.02, 0.25, 0.25, 0.2, 0.2, 0.1)
NO_POST = PostEditConfig(0.0, 0.25, 0.25, 0.2, 0.2, 0.1)


def report(name: str) -> None:
    print(f"\n[ACCEPTANCE] {name}: PASS", flush=True)


@pytest.fixture(scope="module")
def stub_server():
    with StubServer(LexiconBackend(unigram_counts())) as server:
        yield server


class TestAcceptance:
    def test_f_beta_regression(self):
        """Six published (P, R) -> F0.5 triples reproduce within +-0.01."""
        start = time.perf_counter()
        triples = [
            (44.27, 26.76, 39.15),
            (41.66, 25.81, 37.10),
            (45.95, 27.94, 40.70),
            (73.86, 60.74, 70.80),
            (57.96, 23.51, 44.82),
            (61.40, 27.47, 49.24),
        ]
        for p, r, want in triples:
            got = round(f_beta(p / 100, r / 100, 0.5) * 100, 2)
            assert abs(got - want) <= 0.01, (p, r, got, want)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        report(f"f_beta regression ({len(triples)} triples, {elapsed * 1000:.0f} ms)")

    def test_maxmatch_oracle_equivalence(self):
        """200 random small instances: extractor counts == brute-force oracle."""
        start = time.perf_counter()
        rng = RngStream(321)
        vocab = ["a", "b", "c", "d", "e"]

        def rand_tokens(max_len, min_len=0):
            n = min_len + rng.randrange(max_len - min_len + 1)
            return tuple(vocab[rng.randrange(len(vocab))] for _ in range(n))

        def rand_gold(source):
            gold, pos = [], 0
            while pos <= len(source):
                if rng.randrange(3) == 0:
                    s = pos
                    e = min(len(source), s + rng.randrange(3))
                    rep = rand_tokens(2)
                    if (s == e and not rep) or rep == source[s:e]:
                        pos += 1
                        continue
                    gold.append((s, e, rep))
                    pos = e + (1 if e == s else 0)
                else:
                    pos += 1
            return gold

        for _ in range(200):
            source = rand_tokens(6, 1)
            hyp = rand_tokens(6, 0)
            gold = rand_gold(source)
            gold_edits = [Edit(s, e, r) for s, e, r in gold]
            extracted = extract_edits(list(source), list(hyp), gold_edits)
            assert edit_counts(extracted, gold_edits) == oracle_counts(source, hyp, gold)
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        report(f"Max-Match oracle equivalence (200 instances, {elapsed:.1f} s)")

    def test_replay_invariant_fuzz(self):
        """10,000 random pairs: extracted edits replay to the hypothesis."""
        rng = RngStream(654)
        vocab = ["a", "b", "c", "d", "e", "f", "g"]
        for _ in range(10_000):
            n_src = 1 + rng.randrange(10)
            n_hyp = rng.randrange(11)
            source = [vocab[rng.randrange(len(vocab))] for _ in range(n_src)]
            hyp = [vocab[rng.randrange(len(vocab))] for _ in range(n_hyp)]
            edits = extract_edits(source, hyp)
            assert apply_edits(source, edits) == hyp
        report("replay invariant fuzz (10,000 pairs)")

    def test_noiser_statistical_calibration(self):
        """German config over 200k tokens: rates within 3 SE; mask fraction ~0.24."""
        from collections import Counter

        assert expected_mask_fraction(GERMAN_NOISE) == pytest.approx(0.24)
        counts, interior = Counter(), Counter()
        produced = 0
        record = 0
        while produced < 200_000:
            length = 5 + (record % 21)
            seq = [f"w{(record * 31 + k) % 97}" for k in range(length)]
            out = apply_token_noise(seq, GERMAN_NOISE, derive_record_rng(2024, record, 0))
            for idx, op in out.ops_applied:
                counts[op] += 1
                if idx < length - 1:
                    interior[op] += 1
            produced += length
            record += 1

        draws = produced - counts[OP_SWAP]
        selected = sum(counts.values())

        def within(observed, expected, n):
            se = (expected * (1 - expected) / n) ** 0.5
            return abs(observed - expected) <= 3 * se

        assert within(selected / draws, GERMAN_NOISE.p_noise, draws)
        assert interior[OP_SWAP_NOOP] == 0 and interior[OP_DELETE_SPARED] == 0
        effective = sum(interior.values())
        for op, expected in [
            (OP_MASK, GERMAN_NOISE.p_mask),
            (OP_INSERT, GERMAN_NOISE.p_insert),
            ("delete", GERMAN_NOISE.p_delete),
            (OP_SWAP, GERMAN_NOISE.p_swap),
        ]:
            assert within(interior[op] / effective, expected, effective), op
        masks = counts[OP_MASK] + counts[OP_INSERT]
        assert within(masks / draws, 0.24, draws)
        report(f"noiser calibration ({produced} tokens, mask fraction {masks / draws:.4f})")

    def test_end_to_end_determinism(self, stub_server, tmp_path):
        """Seed 42 over 1000 pairs: workers 1/4/8 byte-identical and == golden."""
        golden = (DATA / "e2e_golden.tsv").read_bytes()
        for workers in (1, 4, 8):
            out = tmp_path / f"run_w{workers}.tsv"
            remote = RemoteBackend(stub_server.url, batch_size=32)
            run_generation(
                BitextCorpus.from_tsv(DATA / "e2e_corpus.tsv"),
                out,
                profile=WS,
                noise=GERMAN_NOISE,
                sampling=SamplingConfig(top_k=16, temperature=1.0),
                postedit=GERMAN_POST,
                backend=remote,
                seed=42,
                workers=workers,
                batch_size=32,
            )
            assert out.read_bytes() == golden, f"workers={workers} diverged from golden"
        report("end-to-end determinism (workers 1/4/8, golden match)")

    def test_identity_paths(self, tmp_path):
        """No noise anywhere -> source == target; echo+mask-only+T=0 likewise."""
        rows = bitext_rows(200, seed=77)
        corpus_path = tmp_path / "ident.tsv"
        corpus_path.write_text(
            "".join(f"{en}\t{tgt}\n" for en, tgt in rows), encoding="utf-8"
        )
        quiet = NoiseConfig(p_noise=0.0, p_mask=1.0, p_insert=0.0, p_delete=0.0, p_swap=0.0)
        pairs, _ = generate_dataset(
            BitextCorpus.from_tsv(corpus_path),
            profile=WS,
            noise=quiet,
            sampling=SamplingConfig(),
            postedit=NO_POST,
            backend=LexiconBackend(unigram_counts()),
            seed=1,
        )
        for pair in pairs:
            assert pair.source == pair.target

        oracle = {str(i): tgt.split() for i, (_, tgt) in enumerate(rows)}
        mask_only = NoiseConfig(p_noise=0.5, p_mask=1.0, p_insert=0.0, p_delete=0.0, p_swap=0.0)
        pairs, stats = generate_dataset(
            BitextCorpus.from_tsv(corpus_path),
            profile=WS,
            noise=mask_only,
            sampling=SamplingConfig(temperature=0.0),
            postedit=NO_POST,
            backend=EchoBackend(oracle),
            seed=2,
        )
        for pair in pairs:
            assert pair.source == pair.target
        assert stats.masks_created > 0  # masking did happen; echo restored it
        report("identity paths (quiet config and echo reconstruction)")

    def test_distribution_contrast(self):
        """Rule vs NAT-stub pairs on 10k sentences: different modal error types."""
        lines = monolingual_lines(10_000, seed=99)

        # casing-heavy rules with a light spelling pass: the classic
        # orthography/spelling profile of rule-based corruption
        rule_cfg = RuleConfig(
            p_noise=0.25,
            p_substitute=0.1,
            p_insert=0.05,
            p_delete=0.05,
            p_swap=0.1,
            p_recase=0.7,
            char_noise=PostEditConfig(0.03, 0.25, 0.25, 0.2, 0.2, 0.1),
        )
        rule_pairs, _ = generate_rule_dataset(lines, rule_cfg, None, WS, seed=5)
        rule_hist = type_distribution(rule_pairs, WS)

        corpus_rows = [(f"context {i}", line) for i, line in enumerate(lines)]
        corpus = [(i, en, tgt, None) for i, (en, tgt) in enumerate(corpus_rows)]

        class ListCorpus:
            def __iter__(self):
                return iter(corpus)

        nat_pairs, _ = generate_dataset(
            ListCorpus(),
            profile=WS,
            noise=GERMAN_NOISE,
            sampling=SamplingConfig(top_k=16, temperature=1.0),
            postedit=NO_POST,
            backend=LexiconBackend(unigram_counts()),
            seed=6,
            workers=4,
        )
        nat_hist = type_distribution(nat_pairs, WS)

        modal_rule = max(rule_hist, key=rule_hist.get)
        modal_nat = max(nat_hist, key=nat_hist.get)
        assert modal_rule != modal_nat, (rule_hist, nat_hist)
        # the rule generator's output leans on casing/spelling errors
        orth_spell_rule = rule_hist.get(ErrorType.ORTH, 0) + rule_hist.get(ErrorType.SPELL, 0)
        orth_spell_nat = nat_hist.get(ErrorType.ORTH, 0) + nat_hist.get(ErrorType.SPELL, 0)
        assert orth_spell_rule > orth_spell_nat
        report(
            f"distribution contrast (rule modal {modal_rule}, nat modal {modal_nat})"
        )

    def test_throughput(self, stub_server, tmp_path):
        """>= 20,000 pairs/minute through the full pipeline with the stub."""
        out = tmp_path / "throughput.tsv"
        remote = RemoteBackend(stub_server.url, batch_size=32)
        start = time.perf_counter()
        stats = run_generation(
            BitextCorpus.from_tsv(DATA / "e2e_corpus.tsv"),
            out,
            profile=WS,
            noise=GERMAN_NOISE,
            sampling=SamplingConfig(top_k=16, temperature=1.0),
            postedit=GERMAN_POST,
            backend=remote,
            seed=43,
            workers=4,
            batch_size=32,
        )
        elapsed = time.perf_counter() - start
        rate = stats.records_emitted / elapsed * 60
        assert rate >= 20_000, f"{rate:.0f} pairs/minute"
        report(f"throughput ({rate:,.0f} pairs/minute)")
