"""Wire-protocol conformance checks, shared by the stub and the model server.

Each check speaks plain HTTP against a base URL and returns a result row;
``run_conformance`` collects them so test suites for either server can
assert on the same contract: health endpoint, mask-position coverage,
normalized candidate distributions, batching equivalence, request ordering,
and error codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import requests

from .textcore import MASK

_TIMEOUT = 120.0


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _item(id_: str, source: str, tokens: list[str], top_k: int = 8) -> dict:
    return {
        "id": id_,
        "source": source,
        "target_tokens": tokens,
        "mask_token": MASK,
        "top_k": top_k,
    }


def _post(base_url: str, payload) -> requests.Response:
    return requests.post(f"{base_url}/v1/predict", json=payload, timeout=_TIMEOUT)


def _mask_positions(tokens: list[str]) -> list[int]:
    return [i for i, t in enumerate(tokens) if t == MASK]


def _client_probs(candidates: list[dict]) -> list[tuple[str, float]]:
    logprobs = [c["logprob"] for c in candidates]
    peak = max(logprobs)
    weights = [(c["token"], math.exp(lp - peak)) for c, lp in zip(candidates, logprobs)]
    kept = [(tok, w) for tok, w in weights if tok and tok != MASK]
    total = sum(w for _, w in kept)
    return [(tok, w / total) for tok, w in kept]


# Sample sentences the checks run with; the English side gives bilingual
# context, the target side carries the sentinels.
_SENT = ("I went to school yesterday .", ["I", MASK, "to", "school", MASK, "."])


def check_health(base_url: str) -> CheckResult:
    try:
        resp = requests.get(f"{base_url}/healthz", timeout=_TIMEOUT)
    except requests.RequestException as exc:
        return CheckResult("health", False, str(exc))
    ok = resp.status_code == 200 and resp.json().get("status") == "ok"
    return CheckResult("health", ok, f"status={resp.status_code}")


def check_position_coverage(base_url: str) -> CheckResult:
    source, tokens = _SENT
    resp = _post(base_url, {"items": [_item("c1", source, tokens)]})
    if resp.status_code != 200:
        return CheckResult("position_coverage", False, f"status={resp.status_code}")
    preds = resp.json()["items"][0]["predictions"]
    got = [p["position"] for p in preds]
    want = _mask_positions(tokens)
    ok = got == want and all(p["candidates"] for p in preds)
    return CheckResult("position_coverage", ok, f"got={got} want={want}")


def check_normalization(base_url: str) -> CheckResult:
    source, tokens = _SENT
    resp = _post(base_url, {"items": [_item("c2", source, tokens)]})
    if resp.status_code != 200:
        return CheckResult("normalization", False, f"status={resp.status_code}")
    for pred in resp.json()["items"][0]["predictions"]:
        logprobs = [c["logprob"] for c in pred["candidates"]]
        if logprobs != sorted(logprobs, reverse=True):
            return CheckResult("normalization", False, "candidates not sorted by logprob")
        total = sum(p for _, p in _client_probs(pred["candidates"]))
        if abs(total - 1.0) > 1e-6:
            return CheckResult("normalization", False, f"probs sum to {total}")
    return CheckResult("normalization", True)


def check_batching_equivalence(base_url: str, prob_tol: float = 1e-4) -> CheckResult:
    source, tokens = _SENT
    other = ["She", MASK, "happy", "."]
    solo = _post(base_url, {"items": [_item("b1", source, tokens)]})
    batch = _post(
        base_url,
        {
            "items": [
                _item("b0", "She is happy .", other),
                _item("b1", source, tokens),
                _item("b2", "He reads books .", ["He", MASK, "books", "."]),
            ]
        },
    )
    if solo.status_code != 200 or batch.status_code != 200:
        return CheckResult(
            "batching_equivalence", False,
            f"status solo={solo.status_code} batch={batch.status_code}",
        )
    solo_preds = solo.json()["items"][0]["predictions"]
    batch_items = {it["id"]: it for it in batch.json()["items"]}
    batch_preds = batch_items["b1"]["predictions"]
    if [p["position"] for p in solo_preds] != [p["position"] for p in batch_preds]:
        return CheckResult("batching_equivalence", False, "positions differ")
    for a, b in zip(solo_preds, batch_preds):
        if [c["token"] for c in a["candidates"]] != [c["token"] for c in b["candidates"]]:
            return CheckResult("batching_equivalence", False, "candidate tokens differ")
        for ca, cb in zip(a["candidates"], b["candidates"]):
            if abs(math.exp(ca["logprob"]) - math.exp(cb["logprob"])) > prob_tol:
                return CheckResult("batching_equivalence", False, "candidate probs differ")
    return CheckResult("batching_equivalence", True)


def check_ordering(base_url: str) -> CheckResult:
    items = [
        _item("z-last", "One two .", ["One", MASK, "."]),
        _item("a-first", "Three four .", ["Three", MASK, "."]),
    ]
    resp = _post(base_url, {"items": items})
    if resp.status_code != 200:
        return CheckResult("ordering", False, f"status={resp.status_code}")
    ids = [it["id"] for it in resp.json()["items"]]
    return CheckResult("ordering", set(ids) == {"z-last", "a-first"}, f"ids={ids}")


def check_zero_mask_rejected(base_url: str) -> CheckResult:
    resp = _post(base_url, {"items": [_item("n1", "No masks .", ["No", "masks", "."])]})
    return CheckResult(
        "zero_mask_rejected", resp.status_code == 400, f"status={resp.status_code}"
    )


def check_bad_json_rejected(base_url: str) -> CheckResult:
    resp = requests.post(
        f"{base_url}/v1/predict",
        data=b"{not json",
        headers={"Content-Type": "application/json"},
        timeout=_TIMEOUT,
    )
    return CheckResult(
        "bad_json_rejected", resp.status_code == 400, f"status={resp.status_code}"
    )


def check_budget_overflow(base_url: str, tokens_over_budget: int) -> CheckResult:
    """Oversized request must get a 413, never a silent truncation."""
    tokens = ["word"] * tokens_over_budget + [MASK]
    resp = _post(base_url, {"items": [_item("big", "Too long .", tokens)]})
    return CheckResult(
        "budget_overflow", resp.status_code == 413, f"status={resp.status_code}"
    )


CORE_CHECKS: tuple[Callable[[str], CheckResult], ...] = (
    check_health,
    check_position_coverage,
    check_normalization,
    check_batching_equivalence,
    check_ordering,
    check_zero_mask_rejected,
    check_bad_json_rejected,
)


def run_conformance(
    base_url: str, budget_overflow_tokens: int | None = None
) -> list[CheckResult]:
    results = [check(base_url) for check in CORE_CHECKS]
    if budget_overflow_tokens is not None:
        results.append(check_budget_overflow(base_url, budget_overflow_tokens))
    return results


def format_results(results: list[CheckResult]) -> str:
    return "\n".join(
        f"{'PASS' if r.ok else 'FAIL'} {r.name}" + (f" ({r.detail})" if r.detail else "")
        for r in results
    )
