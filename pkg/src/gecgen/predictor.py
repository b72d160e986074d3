"""Masked-infill prediction contract, sampling, and infilling.

A backend answers "what goes at each masked position" with a top-k
distribution; sampling then draws an erroneous-but-plausible replacement per
mask, and infill writes the samples back into the corrupted sequence. Three
backends ship here: an echo oracle for tests, a context-free unigram lexicon,
and an HTTP client for the wire protocol (see ``stubserver`` for the matching
reference server).
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .errors import BackendUnavailable, ConfigError, ProtocolViolation
from .noiser import CorruptedSeq
from .textcore import MASK, RngStream, TokenSeq, categorical_index

DEFAULT_TOP_K = 16
DEFAULT_TEMPERATURE = 1.0

Candidate = tuple[str, float]


@dataclass(frozen=True)
class PredictionRequest:
    """One sentence to infill: English context plus the corrupted target."""

    id: str
    source_en: str
    target_tokens: tuple[str, ...]
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if self.top_k < 1:
            raise ProtocolViolation("top_k must be >= 1")
        if not self.mask_positions:
            raise ProtocolViolation("request contains no mask sentinel")

    @property
    def mask_positions(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.target_tokens) if t == MASK)


@dataclass(frozen=True)
class MaskPrediction:
    """Top-k candidate distribution for one masked position."""

    position: int
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class SamplingConfig:
    top_k: int = DEFAULT_TOP_K
    temperature: float = DEFAULT_TEMPERATURE  # 0 means argmax

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("sampling top_k must be >= 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")


def normalize_candidates(raw: Iterable[Candidate]) -> tuple[Candidate, ...]:
    """Drop sentinel/empty candidates, renormalize, sort by prob desc.

    Ties are broken by token string so candidate order is reproducible.
    """
    kept = [(tok, w) for tok, w in raw if tok and tok != MASK and w > 0]
    if not kept:
        raise ProtocolViolation("no usable candidates after filtering")
    total = sum(w for _, w in kept)
    kept = [(tok, w / total) for tok, w in kept]
    kept.sort(key=lambda c: (-c[1], c[0]))
    return tuple(kept)


class PredictorBackend(Protocol):
    """Answers a batch of requests with one prediction list per request."""

    def predict(
        self, requests_: Sequence[PredictionRequest]
    ) -> list[list[MaskPrediction]]: ...


def _validate_predictions(
    req: PredictionRequest, preds: list[MaskPrediction]
) -> list[MaskPrediction]:
    got = tuple(p.position for p in preds)
    if got != req.mask_positions:
        raise ProtocolViolation(
            f"request {req.id}: predicted positions {got} != mask positions "
            f"{req.mask_positions}"
        )
    for p in preds:
        if not p.candidates:
            raise ProtocolViolation(f"request {req.id}: empty candidate list")
    return preds


def predict_masks(
    req: PredictionRequest, backend: PredictorBackend
) -> list[MaskPrediction]:
    """Predict every masked position of a single request, in position order."""
    return _validate_predictions(req, backend.predict([req])[0])


class EchoBackend:
    """Test oracle: answers each mask with a preconfigured token at prob 1.

    ``oracle`` maps request id to either a full token sequence (indexed by
    mask position) or an explicit position->token mapping.
    """

    def __init__(self, oracle: Mapping[str, Sequence[str] | Mapping[int, str]]):
        self.oracle = oracle

    def _token_for(self, req_id: str, position: int) -> str:
        try:
            spec = self.oracle[req_id]
            token = spec[position]
        except (KeyError, IndexError):
            raise ProtocolViolation(
                f"echo oracle has no token for request {req_id!r} position {position}"
            ) from None
        return token

    def predict(self, requests_: Sequence[PredictionRequest]) -> list[list[MaskPrediction]]:
        out = []
        for req in requests_:
            preds = [
                MaskPrediction(pos, normalize_candidates([(self._token_for(req.id, pos), 1.0)]))
                for pos in req.mask_positions
            ]
            out.append(_validate_predictions(req, preds))
        return out


class LexiconBackend:
    """Context-free backend: every mask gets the corpus unigram top-k."""

    def __init__(self, counts: Mapping[str, int | float]):
        cleaned = {
            tok: c for tok, c in counts.items() if tok and tok != MASK and c > 0
        }
        if not cleaned:
            raise ConfigError("lexicon has no usable entries")
        # Most frequent first; ties resolved by token for determinism.
        self.entries = sorted(cleaned.items(), key=lambda kv: (-kv[1], kv[0]))

    @classmethod
    def from_unigram_file(cls, path: str) -> "LexiconBackend":
        """Load "token<TAB>count" lines (UTF-8)."""
        counts: dict[str, float] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                token, _, count = line.partition("\t")
                counts[token] = counts.get(token, 0.0) + float(count or 1)
        return cls(counts)

    def _top(self, k: int) -> tuple[Candidate, ...]:
        head = self.entries[: min(k, len(self.entries))]
        return normalize_candidates([(tok, float(c)) for tok, c in head])

    def predict(self, requests_: Sequence[PredictionRequest]) -> list[list[MaskPrediction]]:
        out = []
        for req in requests_:
            cands = self._top(req.top_k)
            preds = [MaskPrediction(pos, cands) for pos in req.mask_positions]
            out.append(_validate_predictions(req, preds))
        return out


class RemoteBackend:
    """HTTP client for the predictor wire protocol.

    Batches up to ``batch_size`` requests per POST, resolves responses by id
    so per-request order is preserved, converts logprobs to filtered,
    renormalized probabilities, and retries transport failures with
    exponential backoff before giving up.
    """

    def __init__(
        self,
        base_url: str,
        batch_size: int = 32,
        retries: int = 5,
        backoff: float = 0.05,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.batch_size = max(1, batch_size)
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._local = threading.local()  # one Session per worker thread
        self._retry_lock = threading.Lock()
        self.retry_count = 0

    @property
    def session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def healthy(self) -> bool:
        try:
            resp = self.session.get(f"{self.base_url}/healthz", timeout=self.timeout)
            return resp.status_code == 200 and resp.json().get("status") == "ok"
        except (requests.RequestException, ValueError):
            return False

    def _count_retry(self) -> None:
        with self._retry_lock:
            self.retry_count += 1

    def _post_with_retry(self, payload: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._count_retry()
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    f"{self.base_url}/v1/predict", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = BackendUnavailable(f"server returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProtocolViolation(
                    f"predict returned {resp.status_code}: {resp.text[:200]}"
                )
            return resp.json()
        raise BackendUnavailable(
            f"predict failed after {self.retries} retries: {last_exc}"
        )

    def _decode_item(self, req: PredictionRequest, item: dict) -> list[MaskPrediction]:
        preds = []
        for entry in item["predictions"]:
            raw = entry.get("candidates", [])
            logprobs = [c["logprob"] for c in raw]
            if logprobs:
                peak = max(logprobs)
                weights = [
                    (c["token"], math.exp(lp - peak)) for c, lp in zip(raw, logprobs)
                ]
            else:
                weights = []
            preds.append(MaskPrediction(entry["position"], normalize_candidates(weights)))
        preds.sort(key=lambda p: p.position)
        return _validate_predictions(req, preds)

    def predict(self, requests_: Sequence[PredictionRequest]) -> list[list[MaskPrediction]]:
        results: dict[str, list[MaskPrediction]] = {}
        by_id = {req.id: req for req in requests_}
        if len(by_id) != len(requests_):
            raise ProtocolViolation("duplicate request ids in one batch")
        pending = list(requests_)
        for start in range(0, len(pending), self.batch_size):
            chunk = pending[start : start + self.batch_size]
            payload = {
                "items": [
                    {
                        "id": req.id,
                        "source": req.source_en,
                        "target_tokens": list(req.target_tokens),
                        "mask_token": MASK,
                        "top_k": req.top_k,
                    }
                    for req in chunk
                ]
            }
            body = self._post_with_retry(payload)
            items = body.get("items", [])
            if {it.get("id") for it in items} != {req.id for req in chunk}:
                raise ProtocolViolation("response ids do not match request ids")
            for item in items:
                req = by_id[item["id"]]
                results[req.id] = self._decode_item(req, item)
        return [results[req.id] for req in requests_]


def sample_replacements(
    preds: Sequence[MaskPrediction], cfg: SamplingConfig, rng: RngStream
) -> list[tuple[int, str]]:
    """Draw one replacement token per mask from its top-k distribution.

    Temperature 0 picks the argmax (ties to the lexicographically smallest
    token); otherwise weights are prob^(1/T), renormalized, and sampled with
    a single unit draw against the cumulative distribution.
    """
    if not preds:
        raise ProtocolViolation("no predictions to sample from")
    out: list[tuple[int, str]] = []
    for pred in sorted(preds, key=lambda p: p.position):
        cands = pred.candidates[: min(cfg.top_k, len(pred.candidates))]
        if not cands:
            raise ProtocolViolation(f"position {pred.position}: no candidates")
        weights = None
        if cfg.temperature > 0:
            weights = [p ** (1.0 / cfg.temperature) for _, p in cands]
            if sum(weights) == 0.0:
                weights = None  # everything underflowed; fall back to argmax
        if weights is None:
            best_p = max(p for _, p in cands)
            token = min(tok for tok, p in cands if p == best_p)
        else:
            total = sum(weights)
            probs = [w / total for w in weights]
            token = cands[categorical_index(rng.to_unit(), probs)][0]
        out.append((pred.position, token))
    return out


def infill(corrupted: CorruptedSeq, samples: Sequence[tuple[int, str]]) -> TokenSeq:
    """Replace every mask sentinel with its sampled token."""
    sample_map = dict(samples)
    if len(sample_map) != len(samples) or set(sample_map) != set(corrupted.mask_positions):
        raise ProtocolViolation(
            f"samples cover positions {sorted(s for s, _ in samples)}, "
            f"expected {sorted(corrupted.mask_positions)}"
        )
    tokens = list(corrupted.tokens)
    for pos, token in sample_map.items():
        tokens[pos] = token
    if MASK in tokens:
        raise ProtocolViolation("sampled token equals the mask sentinel")
    return tokens
