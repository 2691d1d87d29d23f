"""Builds tiny local models once per session so no network is needed."""
import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import pytest
import torch
from fastapi.testclient import TestClient
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (BertConfig, BertModel, GPT2Config, GPT2LMHeadModel,
                          PreTrainedTokenizerFast)

from caad_service import ServiceConfig, create_app

VOCAB_WORDS = [
    "<unk>", "<pad>", "<eos>", "Answer:", "Question:", "the", "cat", "dog",
    "sat", "slept", "on", "mat", "rug", "hello", "world", "what", "does",
    "do", "a", "an", "and",
]


def make_word_tokenizer(**special):
    vocab = {w: i for i, w in enumerate(VOCAB_WORDS)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    return PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="<unk>",
                                   pad_token="<pad>", **special)


@pytest.fixture(scope="session")
def tiny_lm_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny-lm")
    tokenizer = make_word_tokenizer(eos_token="<eos>")
    config = GPT2Config(
        vocab_size=len(VOCAB_WORDS), n_layer=2, n_head=2, n_embd=32,
        n_positions=128, bos_token_id=None,
        eos_token_id=tokenizer.eos_token_id)
    torch.manual_seed(1234)
    GPT2LMHeadModel(config).save_pretrained(path)
    tokenizer.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def tiny_embedder_path(tmp_path_factory):
    from sentence_transformers import SentenceTransformer
    try:
        from sentence_transformers.sentence_transformer.modules import (
            Pooling, Transformer)
    except ImportError:
        from sentence_transformers.models import Pooling, Transformer

    bert_path = tmp_path_factory.mktemp("tiny-bert")
    config = BertConfig(
        vocab_size=len(VOCAB_WORDS), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64,
        max_position_embeddings=128)
    torch.manual_seed(5678)
    BertModel(config).save_pretrained(bert_path)
    make_word_tokenizer().save_pretrained(bert_path)

    transformer = Transformer(str(bert_path), max_seq_length=64)
    pooling = Pooling(32)
    st_path = tmp_path_factory.mktemp("tiny-st")
    SentenceTransformer(modules=[transformer, pooling]).save(str(st_path))
    return str(st_path)


@pytest.fixture(scope="session")
def service_config(tiny_embedder_path, tiny_lm_path):
    return ServiceConfig(embedding_model=tiny_embedder_path,
                         causal_lm=tiny_lm_path, max_batch_size=8)


@pytest.fixture(scope="session")
def app(service_config):
    return create_app(service_config)


@pytest.fixture(scope="session")
def client(app):
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c
