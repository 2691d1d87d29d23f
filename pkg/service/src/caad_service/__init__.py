"""Reference HTTP backend serving embeddings and next-token logits."""
from .app import create_app
from .config import ServiceConfig

__all__ = ["create_app", "ServiceConfig"]
