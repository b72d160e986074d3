"""TOML run configuration.

Schema (all sections optional unless a subcommand needs them)::

    [language]
    token_mode = "whitespace"   # or "char"
    bicameral  = true
    # alphabet = "abcdefghijklmnopqrstuvwxyz"

    [corpus]
    format = "tsv"              # "tsv": one file "english<TAB>target"
    path   = "bitext.tsv"       # "paired": english/target line-aligned files
    # english = "corpus.en"
    # target  = "corpus.xx"

    [noise]
    p_noise = 0.3
    p_mask = 0.65
    p_insert = 0.15
    p_delete = 0.15
    p_swap = 0.05

    [sampling]
    top_k = 16
    temperature = 1.0

    [postedit]
    p_noise = 0.02
    p_substitute = 0.25
    p_insert = 0.25
    p_delete = 0.2
    p_swap = 0.2
    p_recase = 0.1

    [rule]
    p_noise = 0.3
    p_substitute = 0.3
    p_insert = 0.2
    p_delete = 0.2
    p_swap = 0.2
    p_recase = 0.1
    p_confusion = 0.5
    # confusion_file = "confusions.tsv"
    # [rule.char_noise]         # optional char pass, postedit schema

    [filters]
    min_len = 1
    max_len = 128
    max_masks = 64
    min_ratio = 0.2
    max_ratio = 5.0

    [backend]
    url = "http://127.0.0.1:8756"
    batch_size = 32
    retries = 5

    [run]
    seed = 0
    workers = 1
    output = "pairs.tsv"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .noiser import NoiseConfig
from .pipeline import BitextCorpus, FilterConfig
from .postedit import PostEditConfig
from .predictor import SamplingConfig
from .rulegen import RuleConfig
from .textcore import LangProfile


@dataclass
class RunConfig:
    profile: LangProfile
    noise: NoiseConfig | None
    sampling: SamplingConfig
    postedit: PostEditConfig | None
    rule: RuleConfig | None
    confusion_file: str | None
    filters: FilterConfig
    corpus: BitextCorpus | None
    backend_url: str | None
    batch_size: int
    retries: int
    seed: int
    workers: int
    output: str | None


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(value)


def _build(cls, table: dict, context: str):
    try:
        return cls(**table)
    except TypeError as exc:
        raise ConfigError(f"[{context}] {exc}") from None


def _build_corpus(table: dict, base: Path) -> BitextCorpus | None:
    if not table:
        return None
    fmt = table.get("format", "tsv")
    if fmt == "tsv":
        if "path" not in table:
            raise ConfigError("[corpus] tsv format needs 'path'")
        return BitextCorpus.from_tsv(base / table["path"])
    if fmt == "paired":
        if "english" not in table or "target" not in table:
            raise ConfigError("[corpus] paired format needs 'english' and 'target'")
        return BitextCorpus.from_paired(base / table["english"], base / table["target"])
    raise ConfigError(f"[corpus] unknown format {fmt!r}")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent

    profile = _build(LangProfile, _section(data, "language"), "language")
    noise_table = _section(data, "noise")
    noise = _build(NoiseConfig, noise_table, "noise") if noise_table else None
    sampling = _build(SamplingConfig, _section(data, "sampling"), "sampling")
    postedit_table = _section(data, "postedit")
    postedit = _build(PostEditConfig, postedit_table, "postedit") if postedit_table else None

    rule_table = _section(data, "rule")
    confusion_file = None
    rule = None
    if rule_table:
        confusion_file = rule_table.pop("confusion_file", None)
        if confusion_file is not None:
            confusion_file = str(base / confusion_file)
        char_table = rule_table.pop("char_noise", None)
        char_noise = (
            _build(PostEditConfig, dict(char_table), "rule.char_noise")
            if char_table
            else None
        )
        rule = _build(RuleConfig, {**rule_table, "char_noise": char_noise}, "rule")

    backend_table = _section(data, "backend")
    run_table = _section(data, "run")
    output = run_table.get("output")
    return RunConfig(
        profile=profile,
        noise=noise,
        sampling=sampling,
        postedit=postedit,
        rule=rule,
        confusion_file=confusion_file,
        filters=_build(FilterConfig, _section(data, "filters"), "filters"),
        corpus=_build_corpus(_section(data, "corpus"), base),
        backend_url=backend_table.get("url"),
        batch_size=int(backend_table.get("batch_size", 32)),
        retries=int(backend_table.get("retries", 5)),
        seed=int(run_table.get("seed", 0)),
        workers=int(run_table.get("workers", 1)),
        output=str(base / output) if output else None,
    )
