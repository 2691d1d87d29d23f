"""FastAPI application implementing the engine's backend wire protocol.

Endpoints (JSON over HTTP, UTF-8):

    GET  /v1/health      {"ok": true}
    GET  /v1/info        ids plus embedding dim / vocab size
    POST /v1/embed       {"texts": [str]} -> {"vectors": [[float]]}
    POST /v1/tokenize    {"text": str} -> {"token_ids": [int]}
    POST /v1/detokenize  {"token_ids": [int]} -> {"text": str}
    POST /v1/logits      {"token_ids": [int]} -> {"logits": [float]}

``/v1/logits`` returns the *pre-softmax* scores at the last position; the
engine's aggregation and blending operate on logits, never probabilities.
All failures are reported as {"error": str} with HTTP 400/500.
"""
from __future__ import annotations

import threading

import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ServiceConfig


class EmbedRequest(BaseModel):
    texts: list[str]


class TokenizeRequest(BaseModel):
    text: str


class TokenIdsRequest(BaseModel):
    token_ids: list[int]


class RequestError(Exception):
    def __init__(self, message, status=400):
        super().__init__(message)
        self.status = status


class ModelHost:
    """Loads the configured models once and serves them deterministically.

    Inference runs in eval mode under no_grad; calls into the causal LM are
    serialized with a lock so concurrent requests never interleave inside
    one forward pass.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.device = torch.device(config.device)
        self._lm_lock = threading.Lock()

        self.embedder = None
        self.embedding_dim = None
        if config.embedding_model:
            from sentence_transformers import SentenceTransformer
            self.embedder = SentenceTransformer(
                config.embedding_model, device=config.device)
            self.embedder.eval()
            dim_getter = getattr(self.embedder, "get_embedding_dimension",
                                 None) or \
                self.embedder.get_sentence_embedding_dimension
            self.embedding_dim = int(dim_getter())

        self.lm = None
        self.tokenizer = None
        self.vocab_size = None
        if config.causal_lm:
            from transformers import AutoModelForCausalLM, AutoTokenizer
            self.tokenizer = AutoTokenizer.from_pretrained(config.causal_lm)
            self.lm = AutoModelForCausalLM.from_pretrained(
                config.causal_lm).to(self.device)
            self.lm.eval()
            # Logit width is what the model emits, which can exceed the
            # tokenizer's vocabulary (padded embedding matrices).
            self.vocab_size = int(self.lm.config.vocab_size)

    def info(self) -> dict:
        payload = {}
        if self.embedder is not None:
            payload["embedder_id"] = str(self.config.embedding_model)
            payload["dim"] = self.embedding_dim
        if self.lm is not None:
            payload["model_id"] = str(self.config.causal_lm)
            payload["vocab_size"] = self.vocab_size
        return payload

    def embed(self, texts: list[str]) -> list[list[float]]:
        if self.embedder is None:
            raise RequestError("no embedding model is loaded")
        if not texts:
            raise RequestError("texts must be non-empty")
        if any(not t for t in texts):
            raise RequestError("texts must not contain empty strings")
        if len(texts) > self.config.max_batch_size:
            raise RequestError(
                f"batch of {len(texts)} exceeds max_batch_size "
                f"{self.config.max_batch_size}")
        with torch.no_grad():
            vectors = self.embedder.encode(
                texts, convert_to_numpy=True, show_progress_bar=False,
                batch_size=self.config.max_batch_size)
        return [[float(x) for x in row] for row in vectors]

    def _require_lm(self):
        if self.lm is None:
            raise RequestError("no causal LM is loaded")

    def tokenize(self, text: str) -> list[int]:
        self._require_lm()
        return list(self.tokenizer.encode(text, add_special_tokens=False))

    def detokenize(self, token_ids: list[int]) -> str:
        self._require_lm()
        self._check_ids(token_ids)
        return self.tokenizer.decode(token_ids, skip_special_tokens=False)

    def logits(self, token_ids: list[int]) -> list[float]:
        self._require_lm()
        if not token_ids:
            raise RequestError("token_ids must be non-empty")
        self._check_ids(token_ids)
        with self._lm_lock, torch.no_grad():
            input_ids = torch.tensor([token_ids], dtype=torch.long,
                                     device=self.device)
            out = self.lm(input_ids).logits[0, -1]
        values = out.double().cpu()
        if not torch.isfinite(values).all():
            raise RequestError("model produced non-finite logits", status=500)
        return [float(x) for x in values]

    def _check_ids(self, token_ids):
        limit = self.vocab_size
        if any(t < 0 or t >= limit for t in token_ids):
            raise RequestError(f"token id out of range [0, {limit})")


def create_app(config: ServiceConfig) -> FastAPI:
    host = ModelHost(config)
    app = FastAPI(title="caad backend service")
    app.state.host = host

    @app.exception_handler(RequestError)
    async def _request_error(request: Request, exc: RequestError):
        return JSONResponse(status_code=exc.status,
                            content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request,
                                exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"ok": True}

    @app.get("/v1/info")
    def info():
        return host.info()

    @app.post("/v1/embed")
    def embed(req: EmbedRequest):
        return {"vectors": host.embed(req.texts)}

    @app.post("/v1/tokenize")
    def tokenize(req: TokenizeRequest):
        return {"token_ids": host.tokenize(req.text)}

    @app.post("/v1/detokenize")
    def detokenize(req: TokenIdsRequest):
        return {"text": host.detokenize(req.token_ids)}

    @app.post("/v1/logits")
    def logits(req: TokenIdsRequest):
        return {"logits": host.logits(req.token_ids)}

    return app
