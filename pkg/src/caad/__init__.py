"""Context-aware adaptive decoding: retrieval-grounded logit shaping.

Build a grounding space of (context embedding, next-token logits) pairs from
verified question/answer data, then steer greedy decoding by retrieving
similar contexts at each step and additively blending their aggregated
logits into the base model's.
"""
from .backends import (BackendPair, BigramLogitModel, HashedNgramEmbedder,
                       RemoteEmbedder, RemoteLogitModel, WIRE_SCHEMAS)
from .builder import (CorpusSample, build_grounding_space, load_corpus_jsonl,
                      plan_chunks)
from .decoder import (DecodeConfig, DecodeTrace, decode, greedy_decode,
                      integrate_logits, select_token)
from .errors import (BackendError, BuildError, CaadError, DecodeError,
                     FormatError, RetrievalError)
from .estimator import GroundedGenerator
from .retrieval import (RetrievalResult, aggregate_logits, cosine,
                        retrieve_and_aggregate, softmax_weights,
                        threshold_filter, top_n)
from .store import (GroundingEntry, GroundingSpace, GroundingSpaceBuilder,
                    load, save)

__version__ = "0.1.0"

__all__ = [
    "BackendPair", "BigramLogitModel", "HashedNgramEmbedder",
    "RemoteEmbedder", "RemoteLogitModel", "WIRE_SCHEMAS",
    "CorpusSample", "build_grounding_space", "load_corpus_jsonl",
    "plan_chunks",
    "DecodeConfig", "DecodeTrace", "decode", "greedy_decode",
    "integrate_logits", "select_token",
    "BackendError", "BuildError", "CaadError", "DecodeError",
    "FormatError", "RetrievalError",
    "GroundedGenerator",
    "RetrievalResult", "aggregate_logits", "cosine",
    "retrieve_and_aggregate", "softmax_weights", "threshold_filter", "top_n",
    "GroundingEntry", "GroundingSpace", "GroundingSpaceBuilder",
    "load", "save",
]
