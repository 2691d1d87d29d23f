"""Grounding space data model and its on-disk binary format.

A grounding space is an immutable, ordered collection of
(context embedding, next-token logits) pairs harvested from verified-correct
answers. Retrieval scans it exactly (no ANN index), so the on-disk layout is
a fixed-stride record array that can be scanned straight out of a buffer.

File layout (all little-endian):

    8 bytes   magic ``CAADSPC1``
    4 bytes   u32 header length
    N bytes   UTF-8 JSON header (dims, ids, dtype, per-entry provenance)
    records   entry_count * (d * f32 + V * {f32|f16})
    4 bytes   u32 CRC32 of the record region
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BuildError, FormatError

MAGIC = b"CAADSPC1"
FORMAT_VERSION = 1

_LOGIT_DTYPES = {"float32": np.float32, "float16": np.float16}


@dataclass(frozen=True)
class GroundingEntry:
    """One (context embedding, next-token logits) pair.

    ``source_id`` is the corpus sample the entry came from and ``step_index``
    the 1-based answer position it targets; neither influences retrieval,
    they exist for inspection only.
    """

    embedding: np.ndarray
    logits: np.ndarray
    source_id: int = 0
    step_index: int = 0


class GroundingSpaceBuilder:
    """Accumulates entries, then seals them into an immutable GroundingSpace.

    The builder is single-owner: it validates dimensions and finiteness on
    every append and refuses further mutation once sealed.
    """

    def __init__(self, d, vocab_size, chunk_size, embedder_id, model_id,
                 logit_dtype="float32"):
        if d < 1 or vocab_size < 1 or chunk_size < 1:
            raise BuildError("d, vocab_size and chunk_size must all be >= 1")
        if not embedder_id or not model_id:
            raise BuildError("embedder_id and model_id must be non-empty")
        if logit_dtype not in _LOGIT_DTYPES:
            raise BuildError(f"unsupported logit_dtype {logit_dtype!r}")
        self.d = d
        self.vocab_size = vocab_size
        self.chunk_size = chunk_size
        self.embedder_id = embedder_id
        self.model_id = model_id
        self.logit_dtype = logit_dtype
        self._embeddings = []
        self._logits = []
        self._source_ids = []
        self._step_indices = []
        self._sealed = False

    def __len__(self):
        return len(self._embeddings)

    def append(self, entry: GroundingEntry) -> "GroundingSpaceBuilder":
        if self._sealed:
            raise BuildError("builder already sealed")
        emb = np.asarray(entry.embedding, dtype=np.float32)
        logits = np.asarray(entry.logits, dtype=_LOGIT_DTYPES[self.logit_dtype])
        if emb.shape != (self.d,):
            raise BuildError(
                f"embedding has shape {emb.shape}, expected ({self.d},)")
        if logits.shape != (self.vocab_size,):
            raise BuildError(
                f"logits have shape {logits.shape}, expected ({self.vocab_size},)")
        if not np.all(np.isfinite(emb)) or not np.all(np.isfinite(logits)):
            raise BuildError("entry contains non-finite components")
        self._embeddings.append(emb)
        self._logits.append(logits)
        self._source_ids.append(int(entry.source_id))
        self._step_indices.append(int(entry.step_index))
        return self

    def seal(self) -> "GroundingSpace":
        if self._sealed:
            raise BuildError("builder already sealed")
        self._sealed = True
        n = len(self._embeddings)
        embeddings = (np.stack(self._embeddings) if n
                      else np.empty((0, self.d), dtype=np.float32))
        logits = (np.stack(self._logits) if n
                  else np.empty((0, self.vocab_size),
                                dtype=_LOGIT_DTYPES[self.logit_dtype]))
        return GroundingSpace(
            embeddings=embeddings,
            logits=logits,
            source_ids=np.asarray(self._source_ids, dtype=np.int64),
            step_indices=np.asarray(self._step_indices, dtype=np.int64),
            chunk_size=self.chunk_size,
            embedder_id=self.embedder_id,
            model_id=self.model_id,
            logit_dtype=self.logit_dtype,
        )


class GroundingSpace:
    """Sealed, read-only grounding space.

    Embeddings are stored exactly as the embedder emitted them (float32, not
    re-normalized); cosine similarity normalizes at query time. Logit vectors
    are dense, full vocabulary width.
    """

    def __init__(self, embeddings, logits, source_ids, step_indices,
                 chunk_size, embedder_id, model_id, logit_dtype):
        if logit_dtype not in _LOGIT_DTYPES:
            raise BuildError(f"unsupported logit_dtype {logit_dtype!r}")
        if not embedder_id or not model_id:
            raise BuildError("embedder_id and model_id must be non-empty")
        self.embeddings = np.ascontiguousarray(embeddings, dtype=np.float32)
        self.logits = np.ascontiguousarray(
            logits, dtype=_LOGIT_DTYPES[logit_dtype])
        self.source_ids = np.asarray(source_ids, dtype=np.int64)
        self.step_indices = np.asarray(step_indices, dtype=np.int64)
        if self.embeddings.ndim != 2 or self.logits.ndim != 2:
            raise BuildError("embeddings and logits must be 2-D arrays")
        if len(self.embeddings) != len(self.logits):
            raise BuildError("embedding/logit counts differ")
        self.chunk_size = int(chunk_size)
        self.embedder_id = embedder_id
        self.model_id = model_id
        self.logit_dtype = logit_dtype
        # Sealed spaces are shareable across threads: freeze the buffers.
        for arr in (self.embeddings, self.logits, self.source_ids,
                    self.step_indices):
            arr.setflags(write=False)
        self._keys_f64 = None
        self._key_norms = None

    def keys_f64(self):
        """Float64 view of the embeddings, cached; similarity math runs in
        double precision regardless of storage precision."""
        if self._keys_f64 is None:
            keys = self.embeddings.astype(np.float64)
            keys.setflags(write=False)
            self._keys_f64 = keys
        return self._keys_f64

    def key_norms(self):
        if self._key_norms is None:
            norms = np.linalg.norm(self.keys_f64(), axis=1)
            norms.setflags(write=False)
            self._key_norms = norms
        return self._key_norms

    def __len__(self):
        return len(self.embeddings)

    @property
    def d(self):
        return self.embeddings.shape[1]

    @property
    def vocab_size(self):
        return self.logits.shape[1]

    def entry(self, i: int) -> GroundingEntry:
        return GroundingEntry(
            embedding=self.embeddings[i],
            logits=self.logits[i],
            source_id=int(self.source_ids[i]),
            step_index=int(self.step_indices[i]),
        )

    def __eq__(self, other):
        if not isinstance(other, GroundingSpace):
            return NotImplemented
        return (
            self.chunk_size == other.chunk_size
            and self.embedder_id == other.embedder_id
            and self.model_id == other.model_id
            and self.logit_dtype == other.logit_dtype
            and self.embeddings.tobytes() == other.embeddings.tobytes()
            and self.logits.tobytes() == other.logits.tobytes()
            and np.array_equal(self.source_ids, other.source_ids)
            and np.array_equal(self.step_indices, other.step_indices)
        )

    def nbytes(self):
        return (self.embeddings.nbytes + self.logits.nbytes
                + self.source_ids.nbytes + self.step_indices.nbytes)

    def describe(self) -> dict:
        """JSON-safe summary: counts, dims, ids and embedding statistics."""
        n = len(self)
        if n:
            mean = self.embeddings.mean(axis=0, dtype=np.float64)
            std = self.embeddings.std(axis=0, dtype=np.float64)
        else:
            mean = np.zeros(self.d)
            std = np.zeros(self.d)
        return {
            "entry_count": n,
            "d": self.d,
            "vocab_size": self.vocab_size,
            "chunk_size": self.chunk_size,
            "embedder_id": self.embedder_id,
            "model_id": self.model_id,
            "logit_dtype": self.logit_dtype,
            "size_bytes": self.nbytes(),
            "embedding_mean": mean.tolist(),
            "embedding_std": std.tolist(),
        }


def save(space: GroundingSpace, path) -> None:
    """Write a sealed space to ``path`` in the binary format above."""
    header = {
        "format_version": FORMAT_VERSION,
        "entry_count": len(space),
        "d": space.d,
        "vocab_size": space.vocab_size,
        "chunk_size": space.chunk_size,
        "embedder_id": space.embedder_id,
        "model_id": space.model_id,
        "logit_dtype": space.logit_dtype,
        "checksum": "crc32",
        "source_ids": space.source_ids.tolist(),
        "step_indices": space.step_indices.tolist(),
    }
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    logit_itemsize = np.dtype(_LOGIT_DTYPES[space.logit_dtype]).itemsize
    stride = space.d * 4 + space.vocab_size * logit_itemsize
    records = bytearray(len(space) * stride)
    view = memoryview(records)
    emb_bytes = space.d * 4
    for i in range(len(space)):
        off = i * stride
        view[off:off + emb_bytes] = space.embeddings[i].tobytes()
        view[off + emb_bytes:off + stride] = space.logits[i].tobytes()

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header_bytes).to_bytes(4, "little"))
        f.write(header_bytes)
        f.write(records)
        f.write(zlib.crc32(records).to_bytes(4, "little"))


def load(path) -> GroundingSpace:
    """Read a space back; any structural defect raises FormatError."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4:
        raise FormatError("file too short for magic/header")
    if data[:len(MAGIC)] != MAGIC:
        raise FormatError(f"bad magic {data[:len(MAGIC)]!r}")
    header_len = int.from_bytes(data[8:12], "little")
    header_end = 12 + header_len
    if len(data) < header_end:
        raise FormatError("truncated header")
    try:
        header = json.loads(data[12:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"unsupported format version {header.get('format_version')!r}")
    if header.get("checksum") != "crc32":
        raise FormatError(
            f"unknown checksum algorithm {header.get('checksum')!r}")
    try:
        n = header["entry_count"]
        d = header["d"]
        vocab_size = header["vocab_size"]
        logit_dtype = header["logit_dtype"]
        source_ids = header["source_ids"]
        step_indices = header["step_indices"]
    except KeyError as exc:
        raise FormatError(f"header missing field {exc}") from exc
    if logit_dtype not in _LOGIT_DTYPES:
        raise FormatError(f"unsupported logit_dtype {logit_dtype!r}")
    if len(source_ids) != n or len(step_indices) != n:
        raise FormatError("provenance arrays do not match entry_count")

    logit_np = _LOGIT_DTYPES[logit_dtype]
    stride = d * 4 + vocab_size * np.dtype(logit_np).itemsize
    record_end = header_end + n * stride
    if len(data) < record_end + 4:
        raise FormatError("truncated record region")
    records = data[header_end:record_end]
    crc_stored = int.from_bytes(data[record_end:record_end + 4], "little")
    if zlib.crc32(records) != crc_stored:
        raise FormatError("record checksum mismatch")

    raw = np.frombuffer(records, dtype=np.uint8).reshape(n, stride) if n else \
        np.empty((0, stride), dtype=np.uint8)
    emb_bytes = d * 4
    embeddings = raw[:, :emb_bytes].copy().view(np.float32).reshape(n, d)
    logits = raw[:, emb_bytes:].copy().view(logit_np).reshape(n, vocab_size)
    if not (np.all(np.isfinite(embeddings))
            and np.all(np.isfinite(logits.astype(np.float32)))):
        raise FormatError("file contains non-finite components")

    return GroundingSpace(
        embeddings=embeddings,
        logits=logits,
        source_ids=source_ids,
        step_indices=step_indices,
        chunk_size=header["chunk_size"],
        embedder_id=header["embedder_id"],
        model_id=header["model_id"],
        logit_dtype=logit_dtype,
    )
