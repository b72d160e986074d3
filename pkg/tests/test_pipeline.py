import json

import pytest

from gecgen.errors import CountError, InputError
from gecgen.noiser import NoiseConfig
from gecgen.pipeline import (
    BitextCorpus,
    FilterConfig,
    GenerationAborted,
    apply_filters,
    generate_dataset,
    generate_rule_dataset,
    mix_datasets,
    pair_to_line,
    parse_pair_line,
    read_pairs,
    run_generation,
    write_pairs,
)
from gecgen.postedit import PostEditConfig
from gecgen.predictor import EchoBackend, LexiconBackend, SamplingConfig
from gecgen.rulegen import RuleConfig
from gecgen.textcore import MASK, ErroneousPair, LangProfile

WS = LangProfile()

QUIET_NOISE = NoiseConfig(p_noise=0.0, p_mask=1.0, p_insert=0.0, p_delete=0.0, p_swap=0.0)
MASK_ONLY = NoiseConfig(p_noise=0.5, p_mask=1.0, p_insert=0.0, p_delete=0.0, p_swap=0.0)
GERMAN = NoiseConfig(p_noise=0.3, p_mask=0.65, p_insert=0.15, p_delete=0.15, p_swap=0.05)
QUIET_POST = PostEditConfig(0.0, 0.25, 0.25, 0.2, 0.2, 0.1)
LIGHT_POST = PostEditConfig(0.02, 0.25, 0.25, 0.2, 0.2, 0.1)


def write_corpus(tmp_path, rows, name="bitext.tsv"):
    path = tmp_path / name
    path.write_text("".join(f"{en}\t{tgt}\n" for en, tgt in rows), encoding="utf-8")
    return path


def lexicon():
    return LexiconBackend({f"w{i}": 100 - i for i in range(30)})


class TestApplyFilters:
    CFG = FilterConfig()

    def test_long_target_dropped(self):
        assert apply_filters(100, 200, None, self.CFG) == "length"

    def test_one_token_target_kept(self):
        assert apply_filters(1, 1, None, self.CFG) is None

    def test_ratio_six_dropped(self):
        assert apply_filters(60, 10, None, self.CFG) == "ratio"

    def test_mask_budget(self):
        assert apply_filters(10, 10, 65, self.CFG) == "masks"
        assert apply_filters(10, 10, 64, self.CFG) is None


class TestBitextCorpus:
    def test_tsv_records(self, tmp_path):
        path = write_corpus(tmp_path, [("hello", "hallo"), ("world", "welt")])
        records = list(BitextCorpus.from_tsv(path))
        assert records == [(0, "hello", "hallo", None), (1, "world", "welt", None)]

    def test_tsv_wrong_field_count_flagged(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("only-one-field\n", encoding="utf-8")
        ((_, _, _, problem),) = list(BitextCorpus.from_tsv(path))
        assert problem is not None

    def test_paired_files(self, tmp_path):
        en = tmp_path / "c.en"
        de = tmp_path / "c.de"
        en.write_text("hello\nworld\n", encoding="utf-8")
        de.write_text("hallo\nwelt\n", encoding="utf-8")
        records = list(BitextCorpus.from_paired(en, de))
        assert [r[2] for r in records] == ["hallo", "welt"]

    def test_paired_line_count_mismatch(self, tmp_path):
        en = tmp_path / "c.en"
        de = tmp_path / "c.de"
        en.write_text("hello\nworld\n", encoding="utf-8")
        de.write_text("hallo\n", encoding="utf-8")
        with pytest.raises(InputError):
            list(BitextCorpus.from_paired(en, de))


def run_pipeline(corpus, backend, noise=QUIET_NOISE, postedit=QUIET_POST, **kw):
    pairs, stats = generate_dataset(
        corpus,
        profile=WS,
        noise=noise,
        sampling=kw.pop("sampling", SamplingConfig(top_k=4, temperature=1.0)),
        postedit=postedit,
        backend=backend,
        **kw,
    )
    return list(pairs), stats


class TestGenerateDataset:
    def test_identity_path(self, tmp_path):
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, [("the cat", "die Katze")]))
        pairs, stats = run_pipeline(corpus, lexicon())
        assert len(pairs) == 1
        assert pairs[0].source == pairs[0].target == "die Katze"
        assert pairs[0].provenance == "nat"
        assert stats.records_read == stats.records_emitted == 1

    def test_echo_oracle_reconstructs_original(self, tmp_path):
        rows = [("one two three", "eins zwei drei"), ("four five", "vier fünf")]
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, rows))
        oracle = {str(i): row[1].split() for i, row in enumerate(rows)}
        pairs, _ = run_pipeline(
            corpus,
            EchoBackend(oracle),
            noise=MASK_ONLY,
            sampling=SamplingConfig(top_k=4, temperature=0.0),
        )
        for p in pairs:
            assert p.source == p.target

    def test_masked_records_get_filled(self, tmp_path):
        rows = [(f"sentence number {i}", f"satz nummer {i} hier") for i in range(20)]
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, rows))
        pairs, stats = run_pipeline(corpus, lexicon(), noise=GERMAN, postedit=LIGHT_POST, seed=3)
        assert stats.records_emitted == 20
        assert stats.masks_created == stats.masks_filled
        for p in pairs:
            assert MASK not in p.source.split()
            assert p.source

    def test_worker_count_does_not_change_output(self, tmp_path):
        rows = [(f"english side {i} words", f"ziel satz {i} mit worten") for i in range(50)]
        corpus_path = write_corpus(tmp_path, rows)
        outputs = []
        for workers in (1, 4):
            pairs, _ = run_pipeline(
                BitextCorpus.from_tsv(corpus_path),
                lexicon(),
                noise=GERMAN,
                postedit=LIGHT_POST,
                seed=42,
                workers=workers,
                batch_size=8,
            )
            outputs.append([pair_to_line(p) for p in pairs])
        assert outputs[0] == outputs[1]

    def test_batch_size_does_not_change_output(self, tmp_path):
        rows = [(f"english side {i}", f"ziel satz {i}") for i in range(30)]
        corpus_path = write_corpus(tmp_path, rows)
        runs = []
        for batch in (4, 32):
            pairs, _ = run_pipeline(
                BitextCorpus.from_tsv(corpus_path),
                lexicon(),
                noise=GERMAN,
                postedit=LIGHT_POST,
                seed=9,
                batch_size=batch,
            )
            runs.append([pair_to_line(p) for p in pairs])
        assert runs[0] == runs[1]

    def test_malformed_and_filtered_accounting(self, tmp_path):
        long_target = " ".join(["wort"] * 200)
        rows = [
            ("good", "gut"),
            ("", ""),  # empty -> malformed
            ("bad mask", f"foo {MASK} bar"),  # sentinel -> malformed
            ("toolong", long_target),  # length filter
            ("ratio bad " + "x " * 58, "kurz"),  # ratio filter (59/1 > 5)
        ]
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, rows))
        pairs, stats = run_pipeline(corpus, lexicon())
        assert stats.records_read == 5
        assert stats.records_emitted == 1
        assert stats.records_filtered == 4
        assert stats.filter_reasons["malformed"] == 2
        assert stats.filter_reasons["length"] == 1
        assert stats.filter_reasons["ratio"] == 1
        stats.check()

    def test_ascending_record_order(self, tmp_path):
        rows = [(f"e {i}", f"z {i}") for i in range(40)]
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, rows))
        pairs, _ = run_pipeline(corpus, lexicon(), workers=4, batch_size=4)
        assert [p.record_id for p in pairs] == sorted(p.record_id for p in pairs)

    def test_char_mode_end_to_end(self, tmp_path):
        profile = LangProfile(token_mode="char", bicameral=False)
        rows = [
            ("the cat sleeps", "猫在睡觉"),
            ("good morning", "早上好"),
        ]
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, rows))
        backend = LexiconBackend({"猫": 5, "好": 4, "早": 3, "睡": 2})
        chinese_noise = NoiseConfig(p_noise=0.5, p_mask=0.7, p_insert=0.1, p_delete=0.1, p_swap=0.1)
        chinese_post = PostEditConfig(0.05, 0.3, 0.2, 0.3, 0.2, 0.0)
        pairs, stats = generate_dataset(
            corpus,
            profile=profile,
            noise=chinese_noise,
            sampling=SamplingConfig(top_k=4, temperature=1.0),
            postedit=chinese_post,
            backend=backend,
            seed=11,
        )
        pairs = list(pairs)
        assert len(pairs) == 2
        assert pairs[0].target == "猫在睡觉"  # no separators in char mode
        for p in pairs:
            assert " " not in p.target and MASK not in p.source


class FailingBackend:
    def predict(self, requests_):
        from gecgen.errors import BackendUnavailable

        raise BackendUnavailable("synthetic outage")


class TestAbortManifest:
    def test_manifest_written_on_backend_failure(self, tmp_path):
        rows = [(f"e {i}", f"zeile nummer {i}") for i in range(10)]
        corpus = BitextCorpus.from_tsv(write_corpus(tmp_path, rows))
        out = tmp_path / "pairs.tsv"
        with pytest.raises(GenerationAborted):
            run_generation(
                corpus,
                out,
                profile=WS,
                noise=MASK_ONLY,
                sampling=SamplingConfig(),
                postedit=QUIET_POST,
                backend=FailingBackend(),
                seed=1,
            )
        manifest = json.loads((out.parent / "pairs.tsv.manifest.json").read_text())
        assert manifest["pairs_written"] == 0
        assert manifest["last_completed_record_id"] == -1


class TestPairIO:
    def test_round_trip(self, tmp_path):
        pairs = [
            ErroneousPair("ein satz", "ein Satz", 0, "nat"),
            ErroneousPair("zwei sätze", "zwei Sätze", 1, "rule"),
        ]
        path = tmp_path / "pairs.tsv"
        assert write_pairs(path, pairs) == 2
        back = list(read_pairs(path))
        assert [(p.source, p.target, p.provenance) for p in back] == [
            (p.source, p.target, p.provenance) for p in pairs
        ]

    def test_tab_in_text_rejected(self):
        with pytest.raises(InputError):
            pair_to_line(ErroneousPair("a\tb", "c", 0, "nat"))

    def test_malformed_line_raises_with_lineno(self):
        from gecgen.errors import ParseError

        with pytest.raises(ParseError):
            parse_pair_line("only two\tfields", 3)


class TestMix:
    def fill(self, tmp_path, name, n, prov):
        pairs = [ErroneousPair(f"src {i} {prov}", f"tgt {i}", i, prov) for i in range(n)]
        path = tmp_path / name
        write_pairs(path, pairs)
        return path

    def test_all_of_a_none_of_b_is_permutation(self, tmp_path):
        a = self.fill(tmp_path, "a.tsv", 20, "nat")
        b = self.fill(tmp_path, "b.tsv", 5, "rule")
        out = tmp_path / "mix.tsv"
        mix_datasets(a, b, 20, 0, seed=1, out_path=out)
        sources = sorted(p.source for p in read_pairs(out))
        assert sources == sorted(p.source for p in read_pairs(a))

    def test_singletons_both_present(self, tmp_path):
        a = self.fill(tmp_path, "a.tsv", 1, "nat")
        b = self.fill(tmp_path, "b.tsv", 1, "rule")
        out = tmp_path / "mix.tsv"
        mix_datasets(a, b, 1, 1, seed=0, out_path=out)
        assert {p.provenance for p in read_pairs(out)} == {"nat", "rule"}

    def test_deterministic(self, tmp_path):
        a = self.fill(tmp_path, "a.tsv", 50, "nat")
        b = self.fill(tmp_path, "b.tsv", 50, "rule")
        out1, out2 = tmp_path / "m1.tsv", tmp_path / "m2.tsv"
        mix_datasets(a, b, 30, 30, seed=7, out_path=out1)
        mix_datasets(a, b, 30, 30, seed=7, out_path=out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_insufficient_records(self, tmp_path):
        a = self.fill(tmp_path, "a.tsv", 3, "nat")
        b = self.fill(tmp_path, "b.tsv", 3, "rule")
        with pytest.raises(CountError):
            mix_datasets(a, b, 10, 1, seed=0, out_path=tmp_path / "m.tsv")

    def test_provenance_preserved(self, tmp_path):
        a = self.fill(tmp_path, "a.tsv", 10, "nat")
        b = self.fill(tmp_path, "b.tsv", 10, "rule")
        out = tmp_path / "mix.tsv"
        mix_datasets(a, b, 5, 5, seed=3, out_path=out)
        provs = [p.provenance for p in read_pairs(out)]
        assert provs.count("nat") == 5 and provs.count("rule") == 5


class TestGenerateRuleDataset:
    CFG = RuleConfig(
        p_noise=0.4,
        p_substitute=0.3,
        p_insert=0.2,
        p_delete=0.2,
        p_swap=0.2,
        p_recase=0.1,
    )

    def test_pairs_and_stats(self):
        lines = [f"zeile nummer {i} text" for i in range(25)]
        pairs, stats = generate_rule_dataset(lines, self.CFG, None, WS, seed=5)
        pairs = list(pairs)
        assert len(pairs) == 25
        assert stats.records_emitted == 25
        assert all(p.provenance == "rule" for p in pairs)

    def test_deterministic_under_seed(self):
        lines = [f"zeile {i}" for i in range(10)]
        a, _ = generate_rule_dataset(lines, self.CFG, None, WS, seed=8)
        b, _ = generate_rule_dataset(lines, self.CFG, None, WS, seed=8)
        assert [p.source for p in a] == [p.source for p in b]
