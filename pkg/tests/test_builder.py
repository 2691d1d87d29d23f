import json

import numpy as np
import pytest

from caad import CorpusSample, build_grounding_space, plan_chunks
from caad.builder import DEFAULT_PROMPT_TEMPLATE, load_corpus_jsonl
from caad.errors import BuildError
from caad.store import save


class TestPlanChunks:
    def test_twelve_tokens_window_eight(self):
        chunks = plan_chunks(12, 8)
        assert len(chunks) == 11
        by_step = {c.target_step: c for c in chunks}
        # step 12: context is tokens 4..11 (1-based), i.e. slice [3:11]
        assert (by_step[12].context_start, by_step[12].context_end) == (3, 11)
        # step 3: context is tokens 1..2
        assert (by_step[3].context_start, by_step[3].context_end) == (0, 2)

    def test_minimal_answer(self):
        chunks = plan_chunks(2, 8)
        assert len(chunks) == 1
        c = chunks[0]
        assert (c.context_start, c.context_end, c.target_step) == (0, 1, 2)

    def test_window_one(self):
        chunks = plan_chunks(5, 1)
        assert len(chunks) == 4
        for c in chunks:
            assert c.context_end - c.context_start == 1
            assert c.context_end == c.target_step - 1

    def test_too_short(self):
        with pytest.raises(BuildError):
            plan_chunks(1, 8)

    def test_every_context_ends_at_target(self):
        for t in (2, 5, 9, 30):
            for m in (1, 3, 8):
                for c in plan_chunks(t, m):
                    assert c.context_end == c.target_step - 1
                    assert c.context_end - c.context_start == min(
                        m, c.target_step - 1)


class TestBuildGroundingSpace:
    def test_entry_count_is_sum_of_lengths_minus_one(self, toy_corpus,
                                                     toy_backends):
        space = build_grounding_space(toy_corpus, toy_backends, chunk_size=8)
        model = toy_backends.logit_model
        expected = sum(len(model.tokenize(s.answer)) - 1 for s in toy_corpus)
        assert len(space) == expected

    def test_entries_in_corpus_then_step_order(self, toy_corpus, toy_backends):
        space = build_grounding_space(toy_corpus, toy_backends, chunk_size=8)
        order = list(zip(space.source_ids.tolist(),
                         space.step_indices.tolist()))
        assert order == sorted(order)

    def test_two_short_samples(self, toy_backends):
        corpus = [CorpusSample("q one", "the cat sat"),
                  CorpusSample("q two", "the dog slept")]
        space = build_grounding_space(corpus, toy_backends, chunk_size=8)
        assert len(space) == 4  # (3-1) + (3-1)

    def test_rebuild_is_byte_identical(self, toy_corpus, toy_backends,
                                       tmp_path):
        p1, p2 = tmp_path / "a.caad", tmp_path / "b.caad"
        save(build_grounding_space(toy_corpus, toy_backends), p1)
        save(build_grounding_space(toy_corpus, toy_backends), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_stored_logits_replay(self, toy_corpus, toy_backends):
        """Replaying the reconstructed prefix reproduces each stored vector."""
        space = build_grounding_space(toy_corpus, toy_backends, chunk_size=8)
        model = toy_backends.logit_model
        rng = np.random.default_rng(7)
        for i in rng.choice(len(space), size=10, replace=False):
            entry = space.entry(int(i))
            sample = toy_corpus[entry.source_id]
            prompt_ids = model.tokenize(
                DEFAULT_PROMPT_TEMPLATE.format(question=sample.question))
            answer_ids = model.tokenize(sample.answer)
            prefix = prompt_ids + answer_ids[:entry.step_index - 1]
            expected = model.next_logits(prefix).astype(np.float32)
            np.testing.assert_array_equal(entry.logits, expected)

    def test_stored_embeddings_replay(self, toy_corpus, toy_backends):
        space = build_grounding_space(toy_corpus, toy_backends, chunk_size=8)
        model = toy_backends.logit_model
        entry = space.entry(len(space) - 1)
        sample = toy_corpus[entry.source_id]
        answer_ids = model.tokenize(sample.answer)
        start = max(0, entry.step_index - 1 - 8)
        text = model.detokenize(answer_ids[start:entry.step_index - 1])
        expected = toy_backends.embedder.embed([text])[0]
        np.testing.assert_array_equal(entry.embedding, expected)

    def test_empty_corpus(self, toy_backends):
        with pytest.raises(BuildError):
            build_grounding_space([], toy_backends)

    def test_single_token_answer(self, toy_backends):
        with pytest.raises(BuildError):
            build_grounding_space([CorpusSample("q", "cat")], toy_backends)


class TestCorpusJsonl:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        rows = [{"question": "q1", "answer": "a b c"},
                {"question": "q2", "answer": "d e"}]
        path.write_text("\n".join(json.dumps(r) for r in rows),
                        encoding="utf-8")
        samples = load_corpus_jsonl(path)
        assert [s.question for s in samples] == ["q1", "q2"]

    def test_bad_line_reports_number(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"question": "q", "answer": "a b"}\nnot json\n',
                        encoding="utf-8")
        with pytest.raises(BuildError, match="line 2"):
            load_corpus_jsonl(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"question": "q"}\n', encoding="utf-8")
        with pytest.raises(BuildError, match="line 1"):
            load_corpus_jsonl(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(BuildError, match="empty corpus"):
            load_corpus_jsonl(path)
