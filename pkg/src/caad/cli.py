"""Command-line interface: build spaces, decode, compare against greedy,
inspect space files and benchmark retrieval latency."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import store
from .backends import BackendPair
from .builder import (DEFAULT_PROMPT_TEMPLATE, build_grounding_space,
                      load_corpus_jsonl)
from .decoder import DecodeConfig, decode, greedy_decode
from .errors import CaadError
from .retrieval import retrieve_and_aggregate

LATENCY_BUDGET_MS = 100.0


def _add_backend_flags(p):
    p.add_argument("--toy-backends", action="store_true",
                   help="use deterministic toy backends seeded from --corpus")
    p.add_argument("--embed-endpoint",
                   default=os.environ.get("CAAD_EMBED_ENDPOINT"))
    p.add_argument("--model-endpoint",
                   default=os.environ.get("CAAD_MODEL_ENDPOINT"))


def _add_decode_flags(p):
    p.add_argument("--chunk-size", type=int, default=8)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--max-tokens", type=int, default=64)


def _toy_seed_texts(samples):
    # Seed with prompt + answer joined, so the bigram stats cover the
    # prompt-to-answer transition the decoder will actually traverse.
    return [f"{DEFAULT_PROMPT_TEMPLATE.format(question=s.question)} {s.answer}"
            for s in samples]


def _resolve_backends(args):
    if args.toy_backends:
        if not getattr(args, "corpus", None):
            raise CaadError(
                "--toy-backends requires --corpus to seed the toy vocabulary")
        samples = load_corpus_jsonl(args.corpus)
        return BackendPair.toy(_toy_seed_texts(samples)), samples
    if not (args.embed_endpoint and args.model_endpoint):
        raise CaadError(
            "need either --toy-backends or both --embed-endpoint and "
            "--model-endpoint (env: CAAD_EMBED_ENDPOINT, CAAD_MODEL_ENDPOINT)")
    samples = (load_corpus_jsonl(args.corpus)
               if getattr(args, "corpus", None) else None)
    return BackendPair.remote(args.embed_endpoint, args.model_endpoint), samples


def _emit(args, payload, text_lines):
    if args.format == "json":
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        for line in text_lines:
            print(line)


def _decode_config(args, backends):
    stop = set()
    if hasattr(backends.logit_model, "EOS"):
        stop.add(backends.logit_model.EOS)
    return DecodeConfig(
        chunk_size=args.chunk_size,
        top_n=args.top_n,
        gamma=args.gamma,
        alpha=args.alpha,
        max_new_tokens=args.max_tokens,
        stop_token_ids=frozenset(stop),
    )


def _strip_stops(tokens, config):
    return [t for t in tokens if t not in config.stop_token_ids]


def cmd_build(args) -> int:
    backends, samples = _resolve_backends(args)
    if samples is None:
        samples = load_corpus_jsonl(args.corpus)
    t0 = time.perf_counter()
    space = build_grounding_space(samples, backends,
                                  chunk_size=args.chunk_size,
                                  logit_dtype=args.logit_dtype)
    store.save(space, args.out)
    elapsed = time.perf_counter() - t0
    payload = {
        "entry_count": len(space),
        "d": space.d,
        "vocab_size": space.vocab_size,
        "chunk_size": space.chunk_size,
        "out": str(args.out),
        "elapsed_s": round(elapsed, 3),
    }
    _emit(args, payload, [
        f"built {len(space)} entries (d={space.d}, V={space.vocab_size}) "
        f"-> {args.out} in {elapsed:.2f}s"])
    return 0


def cmd_decode(args) -> int:
    space = store.load(args.space)
    backends, _ = _resolve_backends(args)
    config = _decode_config(args, backends)
    if args.greedy:
        tokens, trace = greedy_decode(args.prompt, config, backends)
    else:
        tokens, trace = decode(args.prompt, space, config, backends)
    text = backends.logit_model.detokenize(_strip_stops(tokens, config))
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as f:
            f.write(json.dumps({"config": config.to_dict()}) + "\n")
            for step in trace.steps:
                f.write(json.dumps(step.to_dict()) + "\n")
    _emit(args, {"text": text, "token_count": len(tokens),
                 "config": config.to_dict()}, [text])
    return 0


def cmd_compare(args) -> int:
    space = store.load(args.space)
    backends, _ = _resolve_backends(args)
    config = _decode_config(args, backends)
    with open(args.prompts_file, "r", encoding="utf-8") as f:
        prompts = [line.rstrip("\n") for line in f if line.strip()]
    if not prompts:
        raise CaadError("empty prompt file")
    results = []
    for prompt in prompts:
        greedy_tokens, _ = greedy_decode(prompt, config, backends)
        caad_tokens, _ = decode(prompt, space, config, backends)
        divergence = -1
        for i in range(max(len(greedy_tokens), len(caad_tokens))):
            a = greedy_tokens[i] if i < len(greedy_tokens) else None
            b = caad_tokens[i] if i < len(caad_tokens) else None
            if a != b:
                divergence = i
                break
        detok = backends.logit_model.detokenize
        results.append({
            "prompt": prompt,
            "greedy": detok(_strip_stops(greedy_tokens, config)),
            "caad": detok(_strip_stops(caad_tokens, config)),
            "divergence_step": divergence,
        })
    lines = []
    for r in results:
        lines.append(f"prompt:     {r['prompt']}")
        lines.append(f"  greedy:   {r['greedy']}")
        lines.append(f"  grounded: {r['caad']}")
        lines.append(f"  diverges at token: {r['divergence_step']}")
    _emit(args, {"results": results}, lines)
    return 0


def cmd_bench(args) -> int:
    space = store.load(args.space)
    if args.trials < 1:
        raise CaadError("trials must be >= 1")
    rng = np.random.default_rng(args.seed)
    queries = rng.standard_normal((args.trials, space.d))
    latencies = np.empty(args.trials)
    for i in range(args.trials):
        t0 = time.perf_counter()
        retrieve_and_aggregate(space, queries[i], args.top_n, args.gamma)
        latencies[i] = time.perf_counter() - t0
    p50 = float(np.percentile(latencies, 50) * 1000)
    p95 = float(np.percentile(latencies, 95) * 1000)
    payload = {
        "entry_count": len(space),
        "d": space.d,
        "trials": args.trials,
        "p50_ms": round(p50, 3),
        "p95_ms": round(p95, 3),
        "budget_ms": LATENCY_BUDGET_MS,
        "within_budget": p50 <= LATENCY_BUDGET_MS,
        "space_bytes": space.nbytes(),
    }
    _emit(args, payload, [
        f"{len(space)} entries, d={space.d}: p50={p50:.3f}ms p95={p95:.3f}ms "
        f"({'PASS' if payload['within_budget'] else 'FAIL'} vs "
        f"{LATENCY_BUDGET_MS:.0f}ms budget)"])
    return 0


def cmd_inspect(args) -> int:
    space = store.load(args.space)
    payload = space.describe()
    _emit(args, payload, [json.dumps(payload, indent=2)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caad",
        description="Retrieval-grounded decoding: build grounding spaces and "
                    "generate with logit shaping.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a grounding space from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--chunk-size", type=int, default=8)
    p.add_argument("--logit-dtype", choices=["float32", "float16"],
                   default="float32")
    _add_backend_flags(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("decode", help="generate a continuation for a prompt")
    p.add_argument("--space", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--corpus", help="toy-backend seed corpus")
    p.add_argument("--greedy", action="store_true",
                   help="plain greedy decoding, retrieval skipped entirely")
    p.add_argument("--trace-out", help="write a JSON-lines step trace here")
    _add_decode_flags(p)
    _add_backend_flags(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("compare",
                       help="greedy vs grounded decoding, side by side")
    p.add_argument("--space", required=True)
    p.add_argument("--prompts-file", required=True)
    p.add_argument("--corpus", help="toy-backend seed corpus")
    _add_decode_flags(p)
    _add_backend_flags(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench",
                       help="retrieval+aggregation latency over a space")
    p.add_argument("--space", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="summarize a space file as JSON")
    p.add_argument("--space", required=True)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CaadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
