"""Masked-LM inference: encode requests, one parallel forward pass, top-k.

The input layout per item is ``<s> source </s> target </s>`` where every
request token of the target is subword-encoded independently and a masked
request token contributes exactly one model mask position. Candidates are
single subwords decoded back to text; probabilities are full-vocabulary
log-softmax values, so the client's truncate-and-renormalize step behaves
the same as against the stub backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

from .config import ServerConfig


class RequestError(Exception):
    """Protocol-invalid item (HTTP 400)."""


class BudgetExceeded(Exception):
    """Encoded request longer than the configured subword budget (HTTP 413)."""

    def __init__(self, length: int, budget: int):
        super().__init__(f"request encodes to {length} subwords, budget is {budget}")
        self.length = length
        self.budget = budget


@dataclass(frozen=True)
class ItemRequest:
    id: str
    source: str
    target_tokens: tuple[str, ...]
    mask_token: str
    top_k: int


@dataclass(frozen=True)
class MaskCandidates:
    position: int  # index into the request's target_tokens
    candidates: tuple[tuple[str, float], ...]  # (token, logprob), logprob desc


class MaskedLMEngine:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModelForMaskedLM.from_pretrained(config.model)
        self.model.eval()
        self.device = torch.device(config.device)
        self.model.to(self.device)

        tok = self.tokenizer
        self._bos = tok.cls_token_id if tok.cls_token_id is not None else tok.bos_token_id
        self._sep = tok.sep_token_id if tok.sep_token_id is not None else tok.eos_token_id
        self._mask_id = tok.mask_token_id
        self._pad_id = tok.pad_token_id if tok.pad_token_id is not None else 0
        if None in (self._bos, self._sep, self._mask_id):
            raise ValueError(f"model {config.model} lacks cls/sep/mask special tokens")
        # never propose special tokens as infill candidates
        self._banned = torch.tensor(sorted(set(tok.all_special_ids)), dtype=torch.long)

    def _encode_item(self, item: ItemRequest) -> tuple[list[int], list[tuple[int, int]]]:
        """Input ids plus (target position, sequence slot) for every mask."""
        if not item.mask_token:
            raise RequestError(f"item {item.id}: empty mask_token")
        if item.top_k < 1:
            raise RequestError(f"item {item.id}: top_k must be >= 1")
        ids: list[int] = [self._bos]
        ids.extend(self.tokenizer.encode(item.source, add_special_tokens=False))
        ids.append(self._sep)
        slots: list[tuple[int, int]] = []
        for position, token in enumerate(item.target_tokens):
            if token == item.mask_token:
                slots.append((position, len(ids)))
                ids.append(self._mask_id)
            else:
                pieces = self.tokenizer.encode(token, add_special_tokens=False)
                ids.extend(pieces or [self.tokenizer.unk_token_id])
        ids.append(self._sep)
        if not slots:
            raise RequestError(f"item {item.id}: no mask token in target_tokens")
        if len(ids) > self.config.max_seq_len:
            raise BudgetExceeded(len(ids), self.config.max_seq_len)
        return ids, slots

    @torch.no_grad()
    def _forward_topk(
        self, encoded: list[tuple[list[int], list[tuple[int, int]], int]]
    ) -> list[list[MaskCandidates]]:
        width = max(len(ids) for ids, _, _ in encoded)
        batch = torch.full((len(encoded), width), self._pad_id, dtype=torch.long)
        attention = torch.zeros((len(encoded), width), dtype=torch.long)
        for row, (ids, _, _) in enumerate(encoded):
            batch[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            attention[row, : len(ids)] = 1
        logits = self.model(
            input_ids=batch.to(self.device), attention_mask=attention.to(self.device)
        ).logits
        logits[:, :, self._banned] = float("-inf")
        logprobs = torch.log_softmax(logits, dim=-1)

        out: list[list[MaskCandidates]] = []
        for row, (_, slots, top_k) in enumerate(encoded):
            preds = []
            for position, slot in slots:
                k = min(top_k, logprobs.shape[-1] - len(self._banned))
                values, indices = torch.topk(logprobs[row, slot], k)
                candidates = tuple(
                    (self.tokenizer.decode([tid]).strip(), float(lp))
                    for lp, tid in zip(values.tolist(), indices.tolist())
                )
                preds.append(MaskCandidates(position, candidates))
            out.append(preds)
        return out

    def predict(self, items: Sequence[ItemRequest]) -> list[list[MaskCandidates]]:
        """One parallel prediction pass per item, in request order."""
        encoded = [(*self._encode_item(item), item.top_k) for item in items]
        results: list[list[MaskCandidates]] = []
        step = max(1, self.config.max_batch_size)
        for start in range(0, len(encoded), step):
            results.extend(self._forward_topk(encoded[start : start + step]))
        return results
