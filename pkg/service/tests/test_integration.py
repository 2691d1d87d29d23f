"""End-to-end: the engine drives the service over real HTTP."""
import threading
import time

import pytest
import requests
import uvicorn

from caad import (BackendPair, CorpusSample, DecodeConfig, RemoteEmbedder,
                  RemoteLogitModel, build_grounding_space, decode,
                  greedy_decode)


@pytest.fixture(scope="module")
def server_url(app):
    config = uvicorn.Config(app, host="127.0.0.1", port=0,
                            log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    url = None
    while time.time() < deadline:
        servers = getattr(server, "servers", [])
        if server.started and servers:
            sock = servers[0].sockets[0]
            url = f"http://127.0.0.1:{sock.getsockname()[1]}"
            break
        time.sleep(0.05)
    assert url, "server failed to start"
    yield url
    server.should_exit = True
    thread.join(timeout=10)


def test_health_over_http(server_url):
    assert requests.get(f"{server_url}/v1/health",
                        timeout=10).json() == {"ok": True}


def test_remote_backends_handshake(server_url):
    embedder = RemoteEmbedder(server_url)
    model = RemoteLogitModel(server_url)
    assert embedder.dim >= 1
    assert model.vocab_size >= 1
    ids = model.tokenize("the cat sat")
    assert model.detokenize(ids) == "the cat sat"
    assert len(model.next_logits(ids)) == model.vocab_size


def test_build_and_decode_through_the_wire(server_url):
    backends = BackendPair.remote(server_url, server_url)
    corpus = [
        CorpusSample("what does the cat do", "the cat sat on the mat"),
        CorpusSample("what does the dog do", "the dog slept on the rug"),
    ]
    space = build_grounding_space(corpus, backends, chunk_size=4)
    assert len(space) == 5 + 5  # (6-1) per answer
    assert space.embedder_id == backends.embedder.embedder_id

    config = DecodeConfig(chunk_size=4, top_n=5, max_new_tokens=4)
    tokens, trace = decode("the cat", space, config, backends)
    assert len(tokens) == len(trace.steps) == 4

    baseline = DecodeConfig(chunk_size=4, top_n=5, alpha=0.0,
                            max_new_tokens=4)
    caad_tokens, _ = decode("the cat", space, baseline, backends)
    greedy_tokens, _ = greedy_decode("the cat", baseline, backends)
    assert caad_tokens == greedy_tokens
