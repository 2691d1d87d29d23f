"""The autoregressive decoding loop with retrieval-grounded logit shaping.

Per emitted token: embed the tail of the token history, retrieve and
aggregate grounded logits, run one forward pass of the base model, blend
additively (model + alpha * aggregated) and pick the argmax. Exactly one
logit-model forward pass per emitted token.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backends import BackendPair
from .errors import BackendError, DecodeError
from .retrieval import RetrievalResult, retrieve_and_aggregate
from .store import GroundingSpace


@dataclass(frozen=True)
class DecodeConfig:
    """All knobs of a decode session."""

    chunk_size: int = 8
    top_n: int = 10
    gamma: float = 0.01
    alpha: float = 0.5
    max_new_tokens: int = 64
    stop_token_ids: frozenset = frozenset()

    def __post_init__(self):
        if self.chunk_size < 1:
            raise DecodeError("chunk_size must be >= 1")
        if self.top_n < 1:
            raise DecodeError("top_n must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise DecodeError("gamma must be in [0, 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise DecodeError("alpha must be in [0, 1]")
        if self.max_new_tokens < 1:
            raise DecodeError("max_new_tokens must be >= 1")
        object.__setattr__(self, "stop_token_ids",
                           frozenset(self.stop_token_ids))

    def to_dict(self) -> dict:
        return {
            "chunk_size": self.chunk_size,
            "top_n": self.top_n,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "max_new_tokens": self.max_new_tokens,
            "stop_token_ids": sorted(self.stop_token_ids),
        }


@dataclass(frozen=True)
class StepRecord:
    """What happened at one decoding step."""

    step: int
    context_text: str
    retrieval: Optional[RetrievalResult]
    model_argmax: int
    final_argmax: int
    chosen_token: int

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "context_text": self.context_text,
            "retrieval": self.retrieval.to_dict() if self.retrieval else None,
            "model_argmax": self.model_argmax,
            "final_argmax": self.final_argmax,
            "chosen_token": self.chosen_token,
        }


@dataclass
class DecodeTrace:
    """Per-step records of a decode session, one per emitted token."""

    config: DecodeConfig
    steps: list[StepRecord] = field(default_factory=list)


def current_context_embedding(token_history: Sequence[int], chunk_size: int,
                              backends: BackendPair) -> np.ndarray:
    """Embed the detokenized last min(chunk_size, len) tokens of the history."""
    if len(token_history) == 0:
        raise DecodeError("token history is empty; nothing to embed")
    window = list(token_history[-chunk_size:])
    try:
        text = backends.logit_model.detokenize(window)
        return backends.embedder.embed([text])[0]
    except BackendError as exc:
        raise DecodeError(f"embedding backend failed: {exc}") from exc


def integrate_logits(model_logits, agg_logits, alpha: float) -> np.ndarray:
    """Additive blend: model logits + alpha * aggregated logits."""
    model_logits = np.asarray(model_logits, dtype=np.float64)
    agg_logits = np.asarray(agg_logits, dtype=np.float64)
    if model_logits.shape != agg_logits.shape:
        raise DecodeError(
            f"logit length mismatch: {model_logits.shape} vs {agg_logits.shape}")
    if not (np.all(np.isfinite(model_logits))
            and np.all(np.isfinite(agg_logits))):
        raise DecodeError("logits must be finite")
    return model_logits + alpha * agg_logits


def select_token(final_logits) -> int:
    """Greedy selection: smallest index attaining the maximum logit.

    Identical to the argmax of the softmax distribution, which is monotone.
    """
    final_logits = np.asarray(final_logits, dtype=np.float64)
    if final_logits.size == 0 or not np.all(np.isfinite(final_logits)):
        raise DecodeError("final logits must be non-empty and finite")
    return int(np.argmax(final_logits))


def _check_ids(space: GroundingSpace, backends: BackendPair):
    if backends.logit_model.model_id != space.model_id:
        raise DecodeError(
            f"model_id mismatch: backend {backends.logit_model.model_id!r} "
            f"vs space {space.model_id!r} (logits live in different vocabularies)")
    if backends.embedder.embedder_id != space.embedder_id:
        raise DecodeError(
            f"embedder_id mismatch: backend {backends.embedder.embedder_id!r} "
            f"vs space {space.embedder_id!r}")


def decode(prompt: str, space: GroundingSpace, config: DecodeConfig,
           backends: BackendPair) -> tuple[list[int], DecodeTrace]:
    """Run retrieval-grounded greedy decoding; returns (new token ids, trace).

    With alpha = 0 the blend leaves the model logits untouched, so the output
    reduces token-for-token to plain greedy decoding.
    """
    _check_ids(space, backends)
    model = backends.logit_model
    try:
        history = list(model.tokenize(prompt))
    except BackendError as exc:
        raise DecodeError(f"tokenizer failed on prompt: {exc}") from exc
    if not history:
        raise DecodeError("prompt tokenized to nothing")

    trace = DecodeTrace(config=config)
    generated: list[int] = []
    for step in range(1, config.max_new_tokens + 1):
        try:
            query = current_context_embedding(history, config.chunk_size,
                                              backends)
            retrieval = retrieve_and_aggregate(space, query, config.top_n,
                                               config.gamma)
            model_logits = np.asarray(model.next_logits(history),
                                      dtype=np.float64)
        except BackendError as exc:
            raise DecodeError(
                f"backend failure at step {step}: {exc}") from exc
        final = integrate_logits(model_logits,
                                 retrieval.aggregated_logits, config.alpha)
        token = select_token(final)
        trace.steps.append(StepRecord(
            step=step,
            context_text=model.detokenize(history[-config.chunk_size:]),
            retrieval=retrieval,
            model_argmax=select_token(model_logits),
            final_argmax=token,
            chosen_token=token,
        ))
        generated.append(token)
        history.append(token)
        if token in config.stop_token_ids:
            break
    return generated, trace


def greedy_decode(prompt: str, config: DecodeConfig,
                  backends: BackendPair) -> tuple[list[int], DecodeTrace]:
    """Plain greedy loop with no retrieval at all (the alpha = 0 baseline)."""
    model = backends.logit_model
    try:
        history = list(model.tokenize(prompt))
    except BackendError as exc:
        raise DecodeError(f"tokenizer failed on prompt: {exc}") from exc
    if not history:
        raise DecodeError("prompt tokenized to nothing")

    trace = DecodeTrace(config=config)
    generated: list[int] = []
    for step in range(1, config.max_new_tokens + 1):
        try:
            model_logits = np.asarray(model.next_logits(history),
                                      dtype=np.float64)
        except BackendError as exc:
            raise DecodeError(
                f"backend failure at step {step}: {exc}") from exc
        token = select_token(model_logits)
        trace.steps.append(StepRecord(
            step=step,
            context_text=model.detokenize(history[-config.chunk_size:]),
            retrieval=None,
            model_argmax=token,
            final_argmax=token,
            chosen_token=token,
        ))
        generated.append(token)
        history.append(token)
        if token in config.stop_token_ids:
            break
    return generated, trace
