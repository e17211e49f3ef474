import json
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from emotod.data import (
    CUE_TOKENS,
    Corpus,
    CorpusFormatError,
    DialogueSample,
    SlotSchema,
    SynthConfig,
    Turn,
    generate_synthetic,
    load_corpus,
    save_corpus,
    split_corpus,
    strip_annotations,
)
from emotod.taxonomy import EmotionLabel


def small_corpus():
    return generate_synthetic(SynthConfig(seed=1, dialogues=5))


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        corpus = small_corpus()
        path = tmp_path / "c.jsonl"
        save_corpus(corpus, path)
        loaded = load_corpus(path)
        assert loaded.schema == corpus.schema
        assert len(loaded) == len(corpus)
        for a, b in zip(corpus.samples, loaded.samples):
            assert a.dialogue_id == b.dialogue_id and a.domain == b.domain
            for ta, tb in zip(a.turns, b.turns):
                assert (ta.speaker, ta.text, ta.state, ta.label, ta.rating) == (
                    tb.speaker,
                    tb.text,
                    tb.state,
                    tb.label,
                    tb.rating,
                )
        # second round trip is byte-identical
        p2 = tmp_path / "c2.jsonl"
        save_corpus(loaded, p2)
        assert path.read_bytes() == p2.read_bytes()

    def test_two_dialogue_file(self, tmp_path):
        corpus = generate_synthetic(SynthConfig(seed=2, dialogues=2))
        path = tmp_path / "two.jsonl"
        save_corpus(corpus, path)
        assert len(load_corpus(path)) == 2


def write_lines(tmp_path, lines):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


HEADER = json.dumps(
    {"record": "header", "format": "emotod-corpus", "version": 1, "slots": ["area"], "first_speaker": "user"}
)


class TestValidation:
    def test_bad_label_names_line_and_choices(self, tmp_path):
        rec = {"record": "dialogue", "id": "d", "domain": "x", "turns": [{"speaker": "user", "text": "hi", "label": "happy"}]}
        path = write_lines(tmp_path, [HEADER, json.dumps(rec)])
        with pytest.raises(CorpusFormatError, match="line 2") as err:
            load_corpus(path)
        assert "abusive" in str(err.value) and "neutral" in str(err.value)

    def test_unknown_slot_names_slot(self, tmp_path):
        rec = {"record": "dialogue", "id": "d", "domain": "x", "turns": [{"speaker": "user", "text": "hi", "state": {"food": "thai"}}]}
        path = write_lines(tmp_path, [HEADER, json.dumps(rec)])
        with pytest.raises(CorpusFormatError, match="food"):
            load_corpus(path)

    def test_invalid_json_carries_line(self, tmp_path):
        path = write_lines(tmp_path, [HEADER, "{not json"])
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_corpus(path)

    def test_alternation_enforced(self, tmp_path):
        rec = {
            "record": "dialogue",
            "id": "d",
            "domain": "x",
            "turns": [{"speaker": "user", "text": "a"}, {"speaker": "user", "text": "b"}],
        }
        path = write_lines(tmp_path, [HEADER, json.dumps(rec)])
        with pytest.raises(CorpusFormatError, match="alternate"):
            load_corpus(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(CorpusFormatError, match="header"):
            load_corpus(path)

    def test_bad_rating(self, tmp_path):
        rec = {"record": "dialogue", "id": "d", "domain": "x", "turns": [{"speaker": "user", "text": "a", "rating": 9}]}
        path = write_lines(tmp_path, [HEADER, json.dumps(rec)])
        with pytest.raises(CorpusFormatError, match="rating"):
            load_corpus(path)

    def test_schema_validation(self):
        with pytest.raises(ValueError, match="duplicate"):
            SlotSchema(("a", "a"))
        with pytest.raises(ValueError, match="at least one"):
            SlotSchema(())


class TestGenerator:
    def test_seed_determinism(self, tmp_path):
        a = generate_synthetic(SynthConfig(seed=9, dialogues=20))
        b = generate_synthetic(SynthConfig(seed=9, dialogues=20))
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(a, pa)
        save_corpus(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_full_cue_strength_means_every_turn_cued(self):
        corpus = generate_synthetic(SynthConfig(seed=3, dialogues=40, cue_strength=1.0))
        for sample in corpus.samples:
            for i in sample.user_turns():
                turn = sample.turns[i]
                tokens = set(turn.text.split())
                assert tokens & set(CUE_TOKENS[turn.label]), turn.text

    def test_label_marginals_near_proportions(self):
        config = SynthConfig(seed=23, dialogues=1500)
        corpus = generate_synthetic(config)
        labels = [s.turns[i].label for s in corpus.samples for i in s.user_turns()]
        n = len(labels)
        assert n >= 10000
        counts = Counter(labels)
        neutral_share = counts[EmotionLabel.NEUTRAL] / n
        assert abs(neutral_share - 0.701) < 0.02
        expected = config.normalized_proportions * n
        observed = np.array([counts[label] for label in EmotionLabel], dtype=float)
        chi = stats.chisquare(observed, expected)
        assert chi.pvalue > 0.001

    def test_state_signal_unfill_only_at_dissatisfied(self):
        corpus = generate_synthetic(SynthConfig(seed=4, dialogues=60, state_signal=True))
        for sample in corpus.samples:
            prev: dict = {}
            for i in sample.user_turns():
                turn = sample.turns[i]
                lost = set(prev) - set(turn.state)
                if lost:
                    assert turn.label is EmotionLabel.DISSATISFIED
                if turn.label is EmotionLabel.DISSATISFIED and prev:
                    assert len(lost) == 1
                prev = turn.state

    def test_satisfied_fills_when_possible(self):
        corpus = generate_synthetic(SynthConfig(seed=8, dialogues=60, state_signal=True))
        for sample in corpus.samples:
            prev: dict = {}
            for i in sample.user_turns():
                turn = sample.turns[i]
                if turn.label is EmotionLabel.SATISFIED and len(prev) < corpus.schema.size:
                    assert len(turn.state) == len(prev) + 1
                prev = turn.state

    def test_alternation_and_ratings(self):
        corpus = generate_synthetic(SynthConfig(seed=6, dialogues=10))
        for sample in corpus.samples:
            for i, turn in enumerate(sample.turns):
                assert turn.speaker == ("user" if i % 2 == 0 else "system")
                if turn.speaker == "user":
                    assert turn.label is not None and 1 <= turn.rating <= 5

    def test_proportion_validation(self):
        with pytest.raises(ValueError, match="entries"):
            SynthConfig(proportions=(1.0, 2.0))
        with pytest.raises(ValueError, match="cue_strength"):
            SynthConfig(cue_strength=1.5)


class TestSplit:
    def test_80_10_10_on_100(self):
        corpus = generate_synthetic(SynthConfig(seed=7, dialogues=100))
        tr, dev, te = split_corpus(corpus, (0.8, 0.1, 0.1), seed=0)
        assert (len(tr), len(dev), len(te)) == (80, 10, 10)
        assert (tr.split, dev.split, te.split) == ("train", "dev", "test")

    def test_same_seed_identical(self):
        corpus = generate_synthetic(SynthConfig(seed=7, dialogues=50))
        a = split_corpus(corpus, (0.6, 0.2, 0.2), seed=5)
        b = split_corpus(corpus, (0.6, 0.2, 0.2), seed=5)
        for ca, cb in zip(a, b):
            assert [s.dialogue_id for s in ca.samples] == [s.dialogue_id for s in cb.samples]

    def test_partition_no_leakage(self):
        corpus = generate_synthetic(SynthConfig(seed=7, dialogues=37))
        parts = split_corpus(corpus, (0.5, 0.25, 0.25), seed=1)
        ids = [s.dialogue_id for part in parts for s in part.samples]
        assert len(ids) == len(set(ids)) == 37

    def test_bad_ratios(self):
        corpus = generate_synthetic(SynthConfig(seed=7, dialogues=10))
        with pytest.raises(ValueError, match="sum to 1"):
            split_corpus(corpus, (0.5, 0.4, 0.2), seed=0)
        with pytest.raises(ValueError, match="positive"):
            split_corpus(corpus, (1.0, 0.0, 0.0), seed=0)

    def test_empty_split_detected(self):
        corpus = generate_synthetic(SynthConfig(seed=7, dialogues=10))
        with pytest.raises(ValueError, match="empty"):
            split_corpus(corpus, (0.98, 0.01, 0.01), seed=0)


def test_strip_annotations():
    corpus = small_corpus()
    stripped = strip_annotations(corpus)
    for sample in stripped.samples:
        for turn in sample.turns:
            assert turn.label is None and turn.rating is None
    # original untouched
    assert any(t.label is not None for s in corpus.samples for t in s.turns)
