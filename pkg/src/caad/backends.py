"""Embedding and logit-model backends.

The engine never runs neural inference in-process. It binds to two opaque
capabilities:

* an *embedder*: text -> fixed-dimension vector,
* a *logit model*: tokenize / detokenize / next-token logits.

Two toy implementations (hashed character n-grams, a Laplace-smoothed bigram
LM) make the whole pipeline verifiable at desk scale with bit-deterministic
outputs. Remote clients speak a small JSON-over-HTTP protocol so real models
can be served out of process.
"""
from __future__ import annotations

import hashlib
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .errors import BackendError

DEFAULT_TIMEOUT_S = 30.0


@runtime_checkable
class Embedder(Protocol):
    embedder_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


@runtime_checkable
class LogitModel(Protocol):
    model_id: str
    vocab_size: int

    def tokenize(self, text: str) -> list[int]: ...
    def detokenize(self, token_ids: Sequence[int]) -> str: ...
    def next_logits(self, token_ids: Sequence[int]) -> np.ndarray: ...


class HashedNgramEmbedder:
    """Deterministic bag-of-character-n-grams embedder.

    Each n-gram is hashed (keyed BLAKE2b, so the seed changes the layout)
    into one of ``dim`` buckets; the count vector is L2-normalized. Counts
    are non-negative, so the norm of any non-empty text is strictly positive.
    """

    def __init__(self, dim: int = 64, ngram: int = 3, seed: int = 0):
        if dim < 1 or ngram < 1:
            raise BackendError("dim and ngram must be >= 1")
        self.dim = dim
        self.ngram = ngram
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)
        self.embedder_id = f"toy-ngram{ngram}-d{dim}-s{seed}"

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(
            gram.encode("utf-8"), key=self._key, digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed_one(self, text: str) -> np.ndarray:
        if not text:
            raise BackendError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        n = self.ngram
        if len(text) < n:
            vec[self._bucket(text)] += 1.0
        else:
            for i in range(len(text) - n + 1):
                vec[self._bucket(text[i:i + n])] += 1.0
        vec /= np.linalg.norm(vec)
        return vec.astype(np.float32)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed_one(t) for t in texts]


class BigramLogitModel:
    """Whitespace-token bigram LM with Laplace smoothing.

    The smallest model in which the previous token genuinely changes the
    next-token distribution, which is what end-to-end tests of the decoding
    loop need. Rows of ``next_logits`` are exact log-probabilities:
    log(count(prev, .) + k) - log(sum(count(prev, .) + k)).
    """

    BOS = 0
    EOS = 1
    UNK = 2
    _SPECIALS = ("<bos>", "<eos>", "<unk>")

    def __init__(self, corpus_texts: Sequence[str], smoothing: float = 1.0):
        if smoothing <= 0:
            raise BackendError("smoothing must be positive")
        words = sorted({w for text in corpus_texts for w in text.split()})
        self._id_to_word = list(self._SPECIALS) + words
        self._word_to_id = {w: i for i, w in enumerate(self._id_to_word)}
        self.vocab_size = len(self._id_to_word)
        self.smoothing = float(smoothing)

        counts = np.zeros((self.vocab_size, self.vocab_size), dtype=np.float64)
        for text in corpus_texts:
            ids = [self.BOS] + [self._word_to_id[w] for w in text.split()]
            ids.append(self.EOS)
            for prev, cur in zip(ids, ids[1:]):
                counts[prev, cur] += 1.0
        self._counts = counts

        smoothed = counts + self.smoothing
        self._log_rows = np.log(smoothed) - np.log(
            smoothed.sum(axis=1, keepdims=True))

        fingerprint = hashlib.sha256()
        fingerprint.update(repr(self.smoothing).encode())
        fingerprint.update("\x00".join(self._id_to_word).encode("utf-8"))
        fingerprint.update(counts.tobytes())
        self.model_id = f"toy-bigram-{fingerprint.hexdigest()[:12]}"

    def tokenize(self, text: str) -> list[int]:
        return [self._word_to_id.get(w, self.UNK) for w in text.split()]

    def detokenize(self, token_ids: Sequence[int]) -> str:
        words = []
        for tid in token_ids:
            if not 0 <= tid < self.vocab_size:
                raise BackendError(f"token id {tid} out of range")
            words.append(self._id_to_word[tid])
        return " ".join(words)

    def next_logits(self, token_ids: Sequence[int]) -> np.ndarray:
        if len(token_ids) == 0:
            raise BackendError("next_logits requires a non-empty prefix")
        prev = token_ids[-1]
        if not 0 <= prev < self.vocab_size:
            raise BackendError(f"token id {prev} out of range")
        return self._log_rows[prev].copy()


def _request_json(method, url, payload=None, timeout=DEFAULT_TIMEOUT_S):
    try:
        if method == "GET":
            resp = requests.get(url, timeout=timeout)
        else:
            resp = requests.post(url, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise BackendError(f"transport failure for {url}: {exc}",
                           retryable=True) from exc
    if resp.status_code != 200:
        detail = ""
        try:
            detail = resp.json().get("error", "")
        except ValueError:
            pass
        raise BackendError(
            f"{url} returned HTTP {resp.status_code}: {detail}")
    try:
        return resp.json()
    except ValueError as exc:
        raise BackendError(f"non-JSON response from {url}") from exc


def _check_finite_vector(values, expected_len, what):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or (expected_len is not None and arr.size != expected_len):
        raise BackendError(
            f"{what} has shape {arr.shape}, expected ({expected_len},)")
    if not np.all(np.isfinite(arr)):
        raise BackendError(f"{what} contains non-finite values")
    return arr


class RemoteEmbedder:
    """HTTP client for the embedding side of the wire protocol.

    Performs a handshake against ``/v1/info`` on construction; every
    response vector is validated against the declared dimension.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        info = _request_json("GET", f"{self.endpoint}/v1/info",
                             timeout=timeout)
        try:
            self.embedder_id = str(info["embedder_id"])
            self.dim = int(info["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(
                f"malformed /v1/info from {self.endpoint}: {info!r}") from exc
        if not self.embedder_id or self.dim < 1:
            raise BackendError(f"invalid handshake from {self.endpoint}")

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        if not texts or any(not t for t in texts):
            raise BackendError("embed requires non-empty texts")
        body = _request_json("POST", f"{self.endpoint}/v1/embed",
                             {"texts": texts}, timeout=self.timeout)
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise BackendError(
                f"/v1/embed returned {len(vectors) if isinstance(vectors, list) else '?'}"
                f" vectors for {len(texts)} texts")
        return [
            _check_finite_vector(v, self.dim, "embedding").astype(np.float32)
            for v in vectors
        ]


class RemoteLogitModel:
    """HTTP client for the tokenizer/logit side of the wire protocol."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        info = _request_json("GET", f"{self.endpoint}/v1/info",
                             timeout=timeout)
        try:
            self.model_id = str(info["model_id"])
            self.vocab_size = int(info["vocab_size"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(
                f"malformed /v1/info from {self.endpoint}: {info!r}") from exc
        if not self.model_id or self.vocab_size < 1:
            raise BackendError(f"invalid handshake from {self.endpoint}")

    def tokenize(self, text: str) -> list[int]:
        body = _request_json("POST", f"{self.endpoint}/v1/tokenize",
                             {"text": text}, timeout=self.timeout)
        ids = body.get("token_ids")
        if not isinstance(ids, list) or not all(
                isinstance(i, int) for i in ids):
            raise BackendError(f"malformed /v1/tokenize response: {body!r}")
        return ids

    def detokenize(self, token_ids: Sequence[int]) -> str:
        body = _request_json("POST", f"{self.endpoint}/v1/detokenize",
                             {"token_ids": list(map(int, token_ids))},
                             timeout=self.timeout)
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendError(f"malformed /v1/detokenize response: {body!r}")
        return text

    def next_logits(self, token_ids: Sequence[int]) -> np.ndarray:
        if len(token_ids) == 0:
            raise BackendError("next_logits requires a non-empty prefix")
        body = _request_json("POST", f"{self.endpoint}/v1/logits",
                             {"token_ids": list(map(int, token_ids))},
                             timeout=self.timeout)
        return _check_finite_vector(
            body.get("logits"), self.vocab_size, "logits")


class BackendPair:
    """The embedder + logit model a build or decode session binds to."""

    def __init__(self, embedder: Embedder, logit_model: LogitModel):
        self.embedder = embedder
        self.logit_model = logit_model

    @classmethod
    def toy(cls, corpus_texts: Sequence[str], dim: int = 64,
            ngram: int = 3, seed: int = 0,
            smoothing: float = 1.0) -> "BackendPair":
        return cls(HashedNgramEmbedder(dim=dim, ngram=ngram, seed=seed),
                   BigramLogitModel(corpus_texts, smoothing=smoothing))

    @classmethod
    def remote(cls, embed_endpoint: str, model_endpoint: str,
               timeout: float = DEFAULT_TIMEOUT_S) -> "BackendPair":
        return cls(RemoteEmbedder(embed_endpoint, timeout=timeout),
                   RemoteLogitModel(model_endpoint, timeout=timeout))


# JSON Schemas for the wire protocol; a conforming service's responses must
# validate against these.
WIRE_SCHEMAS = {
    "info": {
        "type": "object",
        "properties": {
            "embedder_id": {"type": "string", "minLength": 1},
            "model_id": {"type": "string", "minLength": 1},
            "dim": {"type": "integer", "minimum": 1},
            "vocab_size": {"type": "integer", "minimum": 1},
        },
        "anyOf": [
            {"required": ["embedder_id", "dim"]},
            {"required": ["model_id", "vocab_size"]},
        ],
    },
    "embed": {
        "type": "object",
        "required": ["vectors"],
        "properties": {
            "vectors": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "number"}},
            },
        },
    },
    "tokenize": {
        "type": "object",
        "required": ["token_ids"],
        "properties": {
            "token_ids": {"type": "array", "items": {"type": "integer"}},
        },
    },
    "detokenize": {
        "type": "object",
        "required": ["text"],
        "properties": {"text": {"type": "string"}},
    },
    "logits": {
        "type": "object",
        "required": ["logits"],
        "properties": {
            "logits": {"type": "array", "items": {"type": "number"}},
        },
    },
    "error": {
        "type": "object",
        "required": ["error"],
        "properties": {"error": {"type": "string"}},
    },
}
