"""Exact cosine retrieval over a grounding space and weighted logit aggregation.

Pipeline per query: brute-force top-N cosine scan -> softmax over the
similarities -> threshold filter (weights >= gamma, never empty) ->
convex combination of the surviving entries' stored logit vectors.
All similarity arithmetic is carried out in float64 regardless of storage
precision so results match an independent full-sort oracle exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RetrievalError
from .store import GroundingSpace


@dataclass(frozen=True)
class RetrievalResult:
    """Every intermediate of one retrieval step, kept for inspection.

    ``selected`` holds 0-based positions into ``indices``/``weights`` (the
    retrieved list), not raw entry indices.
    """

    indices: np.ndarray
    similarities: np.ndarray
    weights: np.ndarray
    selected: np.ndarray
    aggregated_logits: np.ndarray

    def to_dict(self) -> dict:
        return {
            "indices": self.indices.tolist(),
            "similarities": self.similarities.tolist(),
            "weights": self.weights.tolist(),
            "selected": self.selected.tolist(),
            "aggregated_logits": self.aggregated_logits.tolist(),
        }


def cosine(a, b) -> float:
    """Cosine similarity (a.b)/(|a||b|); undefined for zero-norm inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise RetrievalError(
            f"cosine requires equal-length vectors, got {a.shape} and {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise RetrievalError("cosine similarity undefined for zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def top_n(space: GroundingSpace, query, n: int):
    """Exact top-N scan: the min(n, |space|) most cosine-similar entries.

    Returns (indices, similarities) with similarities non-increasing.
    Similarity ties are broken by lower entry index for determinism.
    """
    if len(space) == 0:
        raise RetrievalError("cannot retrieve from an empty space")
    if n < 1:
        raise RetrievalError("n must be >= 1")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (space.d,):
        raise RetrievalError(
            f"query has shape {query.shape}, expected ({space.d},)")
    qnorm = np.linalg.norm(query)
    if qnorm == 0.0:
        raise RetrievalError("cosine similarity undefined for zero-norm query")

    norms = space.key_norms()
    if np.any(norms == 0.0):
        raise RetrievalError("space contains a zero-norm embedding")
    sims = (space.keys_f64() @ query) / (norms * qnorm)

    k = min(n, len(space))
    # Stable sort on (-sim, index): ties resolve to the lower entry index.
    order = np.argsort(-sims, kind="stable")[:k]
    return order.astype(np.int64), sims[order]


def softmax_weights(similarities) -> np.ndarray:
    """Softmax over the retrieved similarities; sums to 1, order-preserving."""
    sims = np.asarray(similarities, dtype=np.float64)
    if sims.size == 0:
        raise RetrievalError("softmax_weights requires a non-empty input")
    if not np.all(np.isfinite(sims)):
        raise RetrievalError("softmax_weights requires finite inputs")
    shifted = np.exp(sims - sims.max())
    return shifted / shifted.sum()


def threshold_filter(weights, gamma: float) -> np.ndarray:
    """Positions with weight >= gamma (inclusive); falls back to the argmax.

    The fallback keeps the selected set non-empty when gamma exceeds every
    weight, so a decode session degrades gracefully instead of failing.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if not 0.0 <= gamma < 1.0:
        raise RetrievalError(f"gamma must be in [0, 1), got {gamma}")
    selected = np.flatnonzero(weights >= gamma)
    if selected.size == 0:
        selected = np.array([int(np.argmax(weights))])
    return selected.astype(np.int64)


def aggregate_logits(space: GroundingSpace, indices, weights,
                     selected) -> np.ndarray:
    """Convex combination of the selected entries' stored logits.

    Weights are renormalized over the selected subset, so the result lies
    between the per-component min and max of the participating vectors.
    """
    selected = np.asarray(selected, dtype=np.int64)
    if selected.size == 0:
        raise RetrievalError("selected set must be non-empty")
    weights = np.asarray(weights, dtype=np.float64)
    entry_ids = np.asarray(indices, dtype=np.int64)[selected]
    w = weights[selected]
    w = w / w.sum()
    logits = space.logits[entry_ids].astype(np.float64, copy=False)
    return w @ logits


def retrieve_and_aggregate(space: GroundingSpace, query_embedding,
                           n: int, gamma: float) -> RetrievalResult:
    """Full retrieval stage for one decoding step, intermediates included."""
    indices, sims = top_n(space, query_embedding, n)
    weights = softmax_weights(sims)
    selected = threshold_filter(weights, gamma)
    agg = aggregate_logits(space, indices, weights, selected)
    return RetrievalResult(
        indices=indices,
        similarities=sims,
        weights=weights,
        selected=selected,
        aggregated_logits=agg,
    )
