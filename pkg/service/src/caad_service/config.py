"""Service configuration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

DEFAULT_EMBEDDING_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


@dataclass(frozen=True)
class ServiceConfig:
    """Which models to serve and how.

    Either model may be omitted, in which case the corresponding endpoints
    return HTTP 400 and ``/v1/info`` omits that side's fields. Names may be
    hub identifiers or local paths.
    """

    embedding_model: Optional[str] = DEFAULT_EMBEDDING_MODEL
    causal_lm: Optional[str] = None
    host: str = "127.0.0.1"
    port: int = 8080
    max_batch_size: int = 64
    device: str = "cpu"

    def __post_init__(self):
        if self.embedding_model is None and self.causal_lm is None:
            raise ValueError("at least one model must be configured")
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
