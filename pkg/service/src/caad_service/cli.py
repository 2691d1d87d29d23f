"""Launch the backend service from the command line."""
from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import create_app
from .config import DEFAULT_EMBEDDING_MODEL, ServiceConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caad-service",
        description="Serve sentence embeddings and causal-LM next-token "
                    "logits over the caad wire protocol.")
    parser.add_argument("--embedding-model", default=DEFAULT_EMBEDDING_MODEL,
                        help="sentence-transformers model name or path "
                             "('none' to disable)")
    parser.add_argument("--causal-lm", default=None,
                        help="causal LM name or path ('none' to disable)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--max-batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def none_if_disabled(name):
        return None if name in (None, "none", "") else name

    try:
        config = ServiceConfig(
            embedding_model=none_if_disabled(args.embedding_model),
            causal_lm=none_if_disabled(args.causal_lm),
            host=args.host,
            port=args.port,
            max_batch_size=args.max_batch_size,
            device=args.device,
        )
        app = create_app(config)
    except Exception as exc:  # model load failures abort startup
        print(f"error: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
