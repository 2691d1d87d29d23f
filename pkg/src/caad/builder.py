"""Grounding-space construction from an annotated question/answer corpus.

For each sample the answer is tokenized with the logit model's tokenizer and
a window of the last ``chunk_size`` tokens is slid across it. Each window is
detokenized and embedded (windows are LLM tokens but the embedder consumes
text); the paired value is the logit model's next-token distribution for the
full prefix the model would see at generation time: the wrapped question
prompt plus the answer tokens before the target step.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .backends import BackendPair
from .errors import BackendError, BuildError
from .store import GroundingEntry, GroundingSpace, GroundingSpaceBuilder

# Question wrapper used to condition the logit model, matching the short-answer
# QA style of the corpora this targets. Overridable per corpus.
DEFAULT_PROMPT_TEMPLATE = (
    "Answer the following question with one or two sentences. "
    "Question: {question} Answer:"
)


@dataclass(frozen=True)
class CorpusSample:
    """A question paired with its verified correct answer."""

    question: str
    answer: str


@dataclass(frozen=True)
class Chunk:
    """One planned window: answer tokens [context_start, context_end) feed the
    embedder; ``target_step`` is the 1-based answer position being predicted."""

    context_start: int
    context_end: int
    target_step: int


def plan_chunks(num_tokens: int, chunk_size: int) -> list[Chunk]:
    """Slide a ``chunk_size`` window across an answer of ``num_tokens`` tokens.

    Produces one chunk per target step i = 2..T; the context is the last
    min(chunk_size, i-1) tokens before i. Step 1 has no context and is
    skipped, so an answer must have at least two tokens.
    """
    if chunk_size < 1:
        raise BuildError("chunk_size must be >= 1")
    if num_tokens < 2:
        raise BuildError(
            f"answer has {num_tokens} token(s); need at least 2 to form a context")
    chunks = []
    for step in range(2, num_tokens + 1):
        end = step - 1  # 0-based: tokens [start, end) precede position i
        start = max(0, end - chunk_size)
        chunks.append(Chunk(context_start=start, context_end=end,
                            target_step=step))
    return chunks


def build_grounding_space(corpus, backends: BackendPair, chunk_size: int = 8,
                          logit_dtype: str = "float32",
                          prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
                          ) -> GroundingSpace:
    """Build a sealed grounding space from ``corpus`` (list of CorpusSample).

    Entries are emitted in (sample, step) order, so rebuilding with the same
    deterministic backends reproduces the space byte for byte.
    """
    corpus = list(corpus)
    if not corpus:
        raise BuildError("empty corpus")
    embedder = backends.embedder
    model = backends.logit_model

    space_builder = GroundingSpaceBuilder(
        d=embedder.dim,
        vocab_size=model.vocab_size,
        chunk_size=chunk_size,
        embedder_id=embedder.embedder_id,
        model_id=model.model_id,
        logit_dtype=logit_dtype,
    )

    for sample_idx, sample in enumerate(corpus):
        try:
            prompt_ids = model.tokenize(
                prompt_template.format(question=sample.question))
            answer_ids = model.tokenize(sample.answer)
            if len(answer_ids) < 2:
                raise BuildError(
                    f"sample {sample_idx}: answer too short after tokenization")
            chunks = plan_chunks(len(answer_ids), chunk_size)
            contexts = [
                model.detokenize(answer_ids[c.context_start:c.context_end])
                for c in chunks
            ]
            embeddings = embedder.embed(contexts)
            for chunk, embedding in zip(chunks, embeddings):
                prefix = prompt_ids + answer_ids[:chunk.target_step - 1]
                logits = model.next_logits(prefix)
                space_builder.append(GroundingEntry(
                    embedding=embedding,
                    logits=logits,
                    source_id=sample_idx,
                    step_index=chunk.target_step,
                ))
        except BackendError as exc:
            raise BuildError(f"backend failure on sample {sample_idx}: {exc}"
                             ) from exc

    return space_builder.seal()


def load_corpus_jsonl(path) -> list[CorpusSample]:
    """Read a JSON-lines corpus: one {"question": ..., "answer": ...} per line."""
    samples = []
    with open(Path(path), "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BuildError(f"line {lineno}: invalid JSON: {exc}") from exc
            if (not isinstance(obj, dict)
                    or not isinstance(obj.get("question"), str)
                    or not isinstance(obj.get("answer"), str)):
                raise BuildError(
                    f"line {lineno}: expected string fields 'question' and 'answer'")
            samples.append(CorpusSample(question=obj["question"],
                                        answer=obj["answer"]))
    if not samples:
        raise BuildError("empty corpus")
    return samples
