import numpy as np
import pytest

from emotod.data import Corpus, DialogueSample, SlotSchema, SynthConfig, Turn, generate_synthetic, split_corpus
from emotod.features import FeaturizerConfig, Mode, encode_corpus
from emotod.losses import softmax
from emotod.model import (
    EmotionModel,
    NumericError,
    TrainConfig,
    _batch_forward,
    _batch_objective,
    _dataset_batch,
    forward,
    init_parameters,
    train,
)
from emotod.taxonomy import EmotionLabel, build_distance_matrix

DM = build_distance_matrix()
SMALL_FC = FeaturizerConfig(dim=64)


def zero_params(d_text=16, schema_size=2, hidden=4, d_state=3):
    cfg = TrainConfig(hidden=hidden, d_state=d_state)
    rng = np.random.default_rng(0)
    params = init_parameters(d_text, schema_size, cfg, rng)
    for block in params.blocks().values():
        block[:] = 0.0
    return params


class TestForward:
    def test_zero_params_uniform_heads(self):
        params = zero_params()
        out = forward(np.ones(16 + 3), params)
        assert np.allclose(out.emotion_probs, 1 / 7)
        assert np.allclose(out.valence_probs, 1 / 3)
        assert np.allclose(out.elicitor_probs, 1 / 4)
        assert np.allclose(out.conduct_probs, 1 / 2)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        params = init_parameters(16, 2, TrainConfig(hidden=4, d_state=3), rng)
        x = np.random.default_rng(2).normal(size=19)
        a = forward(x, params)
        b = forward(x, params)
        assert np.array_equal(a.emotion_probs, b.emotion_probs)

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(3)
        params = init_parameters(16, 2, TrainConfig(hidden=4, d_state=3), rng)
        x = rng.normal(size=19)
        before = forward(x, params).emotion_probs
        params.heads_b["emotion"] += 5.0  # constant shift on one head's logits
        after = forward(x, params).emotion_probs
        assert np.allclose(before, after, atol=1e-12)

    def test_uniform_tie_breaks_to_neutral(self):
        out = forward(np.zeros(19), zero_params())
        assert out.emotion is EmotionLabel.NEUTRAL

    def test_shape_and_finite_validation(self):
        params = zero_params()
        with pytest.raises(ValueError, match="does not match"):
            forward(np.zeros(5), params)
        with pytest.raises(ValueError, match="finite"):
            forward(np.full(19, np.nan), params)


def toy_corpus():
    """Two linearly separable one-turn dialogues."""
    schema = SlotSchema(("area",))
    samples = [
        DialogueSample(
            "t1", "toy", [Turn("user", "great wonderful perfect", state={}, label=EmotionLabel.SATISFIED)]
        ),
        DialogueSample(
            "t2", "toy", [Turn("user", "wrong unacceptable disappointing", state={}, label=EmotionLabel.DISSATISFIED)]
        ),
    ]
    return Corpus(schema=schema, samples=samples)


class TestTrain:
    def test_separable_toy_converges(self):
        config = TrainConfig(seed=0, max_epochs=200, batch_size=2, learning_rate=0.02, hidden=8, d_state=4)
        model, log = train(toy_corpus(), config, DM, featurizer=SMALL_FC)
        losses = [e["train_loss"] for e in log]
        assert losses[-1] < 0.01
        # descent is monotone on this full-batch separable instance
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_alpha_one_zeroes_aspect_gradients(self):
        corpus = toy_corpus()
        config = TrainConfig(seed=0, alpha=1.0, hidden=8, d_state=4)
        ds = encode_corpus(corpus, SMALL_FC, Mode.ERC)
        rng = np.random.default_rng(0)
        params = init_parameters(SMALL_FC.dim, corpus.schema.size, config, rng)
        batch = _dataset_batch(ds, np.arange(len(ds)))
        _, grads = _batch_objective(batch, params, config, DM)
        for name in ("valence", "elicitor", "conduct"):
            assert np.all(grads[f"{name}_w"] == 0.0)
            assert np.all(grads[f"{name}_b"] == 0.0)
        assert np.any(grads["emotion_w"] != 0.0)

    def test_seed_determinism(self):
        corpus = generate_synthetic(SynthConfig(seed=11, dialogues=12))
        config = TrainConfig(seed=7, max_epochs=3, hidden=8, d_state=4)
        m1, log1 = train(corpus, config, DM, featurizer=SMALL_FC)
        m2, log2 = train(corpus, config, DM, featurizer=SMALL_FC)
        assert log1 == log2
        for k, v in m1.params.blocks().items():
            assert np.array_equal(v, m2.params.blocks()[k])

    def test_empty_corpus_rejected(self):
        corpus = Corpus(schema=SlotSchema(("a",)), samples=[])
        with pytest.raises(ValueError, match="no labeled"):
            train(corpus, TrainConfig(), DM, featurizer=SMALL_FC)

    def test_nan_loss_aborts_with_diagnostic(self):
        config = TrainConfig(seed=0, max_epochs=5, learning_rate=1e18, hidden=8, d_state=4)
        with pytest.raises(NumericError, match="epoch"):
            train(generate_synthetic(SynthConfig(seed=1, dialogues=10)), config, DM, featurizer=SMALL_FC)

    def test_dev_early_stopping_returns_best(self):
        corpus = generate_synthetic(SynthConfig(seed=13, dialogues=60))
        tr, dev, _ = split_corpus(corpus, (0.6, 0.2, 0.2), seed=0)
        config = TrainConfig(seed=0, max_epochs=12, patience=2, hidden=8, d_state=4)
        model, log = train(tr, config, DM, dev_corpus=dev, featurizer=SMALL_FC)
        assert all("dev_macro_f1" in e for e in log)
        assert len(log) <= 12


class TestEndToEndGradient:
    def test_full_objective_matches_finite_differences(self):
        corpus = generate_synthetic(SynthConfig(seed=21, dialogues=6, max_user_turns=5))
        config = TrainConfig(seed=0, hidden=5, d_state=4, alpha=0.4)
        fc = FeaturizerConfig(dim=48)
        ds = encode_corpus(corpus, fc, Mode.ERC)
        rng = np.random.default_rng(42)
        params = init_parameters(fc.dim, corpus.schema.size, config, rng)
        checked = 0
        h = 1e-5
        for sample_idx in rng.choice(len(ds), size=22, replace=False):
            batch = _dataset_batch(ds, np.array([sample_idx]))
            _, grads = _batch_objective(batch, params, config, DM)
            blocks = params.blocks()
            for name, block in blocks.items():
                flat = block.ravel()
                k_count = min(4, flat.size)
                for k in rng.choice(flat.size, size=k_count, replace=False):
                    orig = flat[k]
                    flat[k] = orig + h
                    up, _ = _batch_objective(batch, params, config, DM)
                    flat[k] = orig - h
                    down, _ = _batch_objective(batch, params, config, DM)
                    flat[k] = orig
                    numeric = (up - down) / (2 * h)
                    analytic = grads[name].ravel()[k]
                    denom = max(abs(analytic), abs(numeric), 1e-4)
                    assert abs(analytic - numeric) / denom < 1e-4, (name, k)
                    checked += 1
        assert checked >= 20 * len(blocks)


@pytest.fixture(scope="module")
def trained():
    corpus = generate_synthetic(SynthConfig(seed=31, dialogues=40))
    config = TrainConfig(seed=0, max_epochs=6, hidden=8, d_state=4)
    model, _ = train(corpus, config, DM, featurizer=SMALL_FC)
    return model, corpus


class TestPredictAndCheckpoint:
    def test_predict_range_and_modes(self, trained):
        model, corpus = trained
        sample = corpus.samples[0]
        out = model.predict(sample, 1)
        assert 0 <= int(out.emotion) <= 6
        erc = model.predict(sample, 2, Mode.ERC).emotion_probs
        sat = model.predict(sample, 2, Mode.SATISFACTION).emotion_probs
        assert not np.allclose(erc, sat)

    def test_predict_dataset_matches_per_sample(self, trained):
        model, corpus = trained
        ds = encode_corpus(corpus, SMALL_FC, Mode.ERC)
        batch_preds = model.predict_dataset(ds)
        for n in (0, 5, 17, len(ds) - 1):
            sample, t = ds.refs[n]
            assert batch_preds[n] == int(model.predict(sample, t).emotion)

    def test_checkpoint_roundtrip_bit_exact(self, trained, tmp_path):
        model, corpus = trained
        path = tmp_path / "model.npz"
        model.save(path)
        loaded = EmotionModel.load(path)
        assert loaded.config == model.config
        assert loaded.featurizer == model.featurizer
        assert loaded.schema == model.schema
        sample = corpus.samples[3]
        a = model.predict(sample, 1)
        b = loaded.predict(sample, 1)
        for head in ("emotion_probs", "valence_probs", "elicitor_probs", "conduct_probs"):
            assert np.array_equal(getattr(a, head), getattr(b, head))

    def test_checkpoint_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(open(path, "wb"), meta='{"format": "other"}', x=np.zeros(3))
        with pytest.raises(ValueError, match="emotod-checkpoint"):
            EmotionModel.load(path)

    def test_state_disabled_model(self, tmp_path):
        corpus = generate_synthetic(SynthConfig(seed=32, dialogues=15))
        config = TrainConfig(seed=0, max_epochs=2, hidden=8, d_state=4, use_state=False)
        model, _ = train(corpus, config, DM, featurizer=SMALL_FC)
        assert model.params.state_w is None
        out = model.predict(corpus.samples[0], 1)
        assert np.isfinite(out.emotion_probs).all()
        path = tmp_path / "ns.npz"
        model.save(path)
        again = EmotionModel.load(path)
        assert again.params.state_w is None
        assert np.array_equal(
            again.predict(corpus.samples[0], 1).emotion_probs, out.emotion_probs
        )


class TestDropout:
    def test_dropout_only_affects_training(self):
        corpus = generate_synthetic(SynthConfig(seed=33, dialogues=15))
        config = TrainConfig(seed=0, max_epochs=3, hidden=8, d_state=4, dropout=0.4)
        model, _ = train(corpus, config, DM, featurizer=SMALL_FC)
        sample = corpus.samples[0]
        a = model.predict(sample, 1).emotion_probs
        b = model.predict(sample, 1).emotion_probs
        assert np.array_equal(a, b)

    def test_aspect_colabels_follow_profiles(self):
        corpus = generate_synthetic(SynthConfig(seed=34, dialogues=10))
        ds = encode_corpus(corpus, SMALL_FC, Mode.ERC)
        assert np.array_equal(ds.elicitor_mask, ds.emotion == 0)
