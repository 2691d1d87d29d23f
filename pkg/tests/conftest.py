import numpy as np
import pytest

from caad import BackendPair, CorpusSample
from caad.builder import DEFAULT_PROMPT_TEMPLATE
from caad.store import GroundingEntry, GroundingSpaceBuilder

TOY_CORPUS = [
    CorpusSample("what does the cat do",
                 "the cat sat on the mat and the cat slept on the mat"),
    CorpusSample("where does the dog sleep",
                 "the dog slept on the rug near the door"),
    CorpusSample("who chased the mouse",
                 "the cat chased the mouse across the kitchen floor"),
    CorpusSample("what did the bird eat",
                 "the bird ate the seeds and the bird sang in the tree"),
]


def toy_seed_texts(samples):
    return [f"{DEFAULT_PROMPT_TEMPLATE.format(question=s.question)} {s.answer}"
            for s in samples]


@pytest.fixture(scope="session")
def toy_corpus():
    return list(TOY_CORPUS)


@pytest.fixture(scope="session")
def toy_backends(toy_corpus):
    return BackendPair.toy(toy_seed_texts(toy_corpus))


def random_space(rng, n, d, vocab_size, logit_dtype="float32"):
    """Build a sealed space of random unit-ish embeddings and random logits."""
    builder = GroundingSpaceBuilder(
        d=d, vocab_size=vocab_size, chunk_size=8,
        embedder_id="test-embedder", model_id="test-model",
        logit_dtype=logit_dtype)
    for i in range(n):
        builder.append(GroundingEntry(
            embedding=rng.standard_normal(d),
            logits=rng.standard_normal(vocab_size) * 3.0,
            source_id=i, step_index=i + 2))
    return builder.seal()
