"""Command-line entry point: generate, rule-corrupt, mix, score, types, stub-serve."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, GecGenError
from .errortypes import type_distribution
from .m2score import evaluate_corpus, parse_m2
from .pipeline import (
    generate_rule_dataset,
    mix_datasets,
    read_pairs,
    run_generation,
    write_pairs,
    write_stats,
)
from .predictor import RemoteBackend
from .rulegen import ConfusionSet
from .stubserver import StubServer, build_backend
from .textcore import LangProfile


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gecgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="run the bitext corruption pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--backend-url", default=None)
    p.add_argument("--batch-size", type=int, default=None)

    p = sub.add_parser("rule-corrupt", help="rule-corrupt a monolingual corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True, help="one target-language sentence per line")
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("mix", help="sample and shuffle two pair files together")
    p.add_argument("--a", required=True, dest="file_a")
    p.add_argument("--b", required=True, dest="file_b")
    p.add_argument("--take-a", required=True, type=int)
    p.add_argument("--take-b", required=True, type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("score", help="Max-Match P/R/F against an M2 reference")
    p.add_argument("--hyp", required=True, help="corrected system output, one per line")
    p.add_argument("--gold", required=True, help="M2 reference file")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--max-unchanged", type=int, default=2)

    p = sub.add_parser("types", help="error-type distribution of a pair file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--token-mode", choices=["whitespace", "char"], default="whitespace")

    p = sub.add_parser("stub-serve", help="serve a deterministic stub backend")
    p.add_argument("--mode", choices=["lexicon", "echo"], default="lexicon")
    p.add_argument("--unigrams", default=None, help="TSV of token<TAB>count")
    p.add_argument("--oracle", default=None, help="TSV of id<TAB>token token ...")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8756)
    return parser


def _cmd_generate(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    if cfg.corpus is None:
        raise ConfigError("config has no [corpus] section")
    if cfg.noise is None or cfg.postedit is None:
        raise ConfigError("generate needs [noise] and [postedit] sections")
    url = args.backend_url or cfg.backend_url
    if not url:
        raise ConfigError("no backend url (config [backend].url or --backend-url)")
    output = args.output or cfg.output
    if not output:
        raise ConfigError("no output path (config [run].output or --output)")
    backend = RemoteBackend(
        url,
        batch_size=args.batch_size or cfg.batch_size,
        retries=cfg.retries,
    )
    if not backend.healthy():
        raise GecGenError(f"backend at {url} is not healthy")
    stats = run_generation(
        cfg.corpus,
        output,
        profile=cfg.profile,
        noise=cfg.noise,
        sampling=cfg.sampling,
        postedit=cfg.postedit,
        backend=backend,
        filters=cfg.filters,
        seed=args.seed if args.seed is not None else cfg.seed,
        workers=args.workers if args.workers is not None else cfg.workers,
        batch_size=args.batch_size or cfg.batch_size,
    )
    print(
        f"wrote {stats.records_emitted} pairs to {output} "
        f"({stats.records_filtered} filtered, fill rate {stats.mask_fill_rate:.3f})"
    )
    return 0


def _cmd_rule_corrupt(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    if cfg.rule is None:
        raise ConfigError("config has no [rule] section")
    output = args.output or cfg.output
    if not output:
        raise ConfigError("no output path (config [run].output or --output)")
    confusion = ConfusionSet.from_tsv(cfg.confusion_file) if cfg.confusion_file else None
    with open(args.input, encoding="utf-8") as f:
        pairs, stats = generate_rule_dataset(
            f,
            cfg.rule,
            confusion,
            cfg.profile,
            seed=args.seed if args.seed is not None else cfg.seed,
        )
        count = write_pairs(output, pairs)
    write_stats(output, stats)
    print(f"wrote {count} rule-corrupted pairs to {output}")
    return 0


def _cmd_mix(args) -> int:
    count = mix_datasets(
        args.file_a, args.file_b, args.take_a, args.take_b, args.seed, args.output
    )
    print(f"wrote {count} mixed pairs to {args.output}")
    return 0


def _cmd_score(args) -> int:
    gold = parse_m2(args.gold)
    with open(args.hyp, encoding="utf-8") as f:
        outputs = [line.rstrip("\n").split() for line in f]
    report = evaluate_corpus(
        outputs,
        gold,
        beta=args.beta,
        max_unchanged=args.max_unchanged,
        lowercase=args.lowercase,
    )
    print(f"{report.precision * 100:.2f} {report.recall * 100:.2f} {report.f_beta * 100:.2f}")
    return 0


def _cmd_types(args) -> int:
    profile = LangProfile(token_mode=args.token_mode)
    histogram = type_distribution(read_pairs(args.pairs), profile)
    rows = sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0].value))
    if args.top is not None:
        rows = rows[: args.top]
    for etype, ratio in rows:
        print(f"{etype} {ratio:.4f}")
    return 0


def _cmd_stub_serve(args) -> int:
    backend = build_backend(args.mode, unigram_file=args.unigrams, oracle_file=args.oracle)
    server = StubServer(backend, host=args.host, port=args.port)
    print(f"listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "rule-corrupt": _cmd_rule_corrupt,
    "mix": _cmd_mix,
    "score": _cmd_score,
    "types": _cmd_types,
    "stub-serve": _cmd_stub_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GecGenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
