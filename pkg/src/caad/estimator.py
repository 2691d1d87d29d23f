"""Scikit-learn style wrapper around the build + decode pipeline.

``fit`` constructs the grounding space from (question, answer) pairs and
``predict`` generates an answer per question, so the generator composes with
sklearn tooling (``get_params``/``set_params``, ``clone``, pipelines that
pass text through).
"""
from __future__ import annotations

from sklearn.base import BaseEstimator

from .backends import BackendPair
from .builder import (DEFAULT_PROMPT_TEMPLATE, CorpusSample,
                      build_grounding_space)
from .decoder import DecodeConfig, decode
from .errors import BuildError


def _as_samples(X):
    samples = []
    for i, item in enumerate(X):
        if isinstance(item, CorpusSample):
            samples.append(item)
        elif isinstance(item, dict):
            try:
                samples.append(CorpusSample(question=item["question"],
                                            answer=item["answer"]))
            except KeyError as exc:
                raise ValueError(
                    f"sample {i} lacks a {exc} field") from exc
        elif isinstance(item, (tuple, list)) and len(item) == 2:
            samples.append(CorpusSample(question=item[0], answer=item[1]))
        else:
            raise ValueError(
                f"sample {i} must be a CorpusSample, dict or (question, answer) pair")
    return samples


class GroundedGenerator(BaseEstimator):
    """Retrieval-grounded greedy text generator.

    Parameters mirror the decode knobs: ``chunk_size`` context tokens per
    window, ``top_n`` retrieved neighbors, ``gamma`` softmax-weight threshold,
    ``alpha`` blend strength (0 = plain greedy decoding). ``backends`` is a
    BackendPair; when None, toy backends are built from the training answers
    at fit time so the estimator is self-contained.
    """

    def __init__(self, chunk_size=8, top_n=10, gamma=0.01, alpha=0.5,
                 max_new_tokens=64, backends=None,
                 prompt_template=DEFAULT_PROMPT_TEMPLATE):
        self.chunk_size = chunk_size
        self.top_n = top_n
        self.gamma = gamma
        self.alpha = alpha
        self.max_new_tokens = max_new_tokens
        self.backends = backends
        self.prompt_template = prompt_template

    def fit(self, X, y=None):
        """Build the grounding space from (question, answer) samples."""
        samples = _as_samples(X)
        if not samples:
            raise BuildError("empty corpus")
        if self.backends is None:
            texts = [
                f"{self.prompt_template.format(question=s.question)} {s.answer}"
                for s in samples
            ]
            self.backends_ = BackendPair.toy(texts)
        else:
            self.backends_ = self.backends
        self.space_ = build_grounding_space(
            samples, self.backends_, chunk_size=self.chunk_size,
            prompt_template=self.prompt_template)
        return self

    def _decode_config(self):
        stop = set()
        model = self.backends_.logit_model
        # The toy LM has an explicit end-of-sequence token; honor it.
        if hasattr(model, "EOS"):
            stop.add(model.EOS)
        return DecodeConfig(
            chunk_size=self.chunk_size,
            top_n=self.top_n,
            gamma=self.gamma,
            alpha=self.alpha,
            max_new_tokens=self.max_new_tokens,
            stop_token_ids=frozenset(stop),
        )

    def predict(self, X):
        """Generate one answer per question in ``X``."""
        if not hasattr(self, "space_"):
            raise RuntimeError("fit must be called before predict")
        config = self._decode_config()
        model = self.backends_.logit_model
        outputs = []
        for question in X:
            prompt = self.prompt_template.format(question=question)
            tokens, _ = decode(prompt, self.space_, config, self.backends_)
            tokens = [t for t in tokens if t not in config.stop_token_ids]
            outputs.append(model.detokenize(tokens))
        return outputs
