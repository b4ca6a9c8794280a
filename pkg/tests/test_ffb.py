import math

import numpy as np
import pytest

from triagekit.embeddings import EmbedConfig, train_skipgram
from triagekit.ffb import (
    BuiltinEncoder,
    FFBConfig,
    FFBModel,
    FusionHead,
    encode_utterance,
    load_ffb,
    predict_ffb,
    save_ffb,
    train_ffb,
    training_accuracy,
)
from triagekit.model import CLASS_ORDER, ArtefactLabel

SMALL = FFBConfig(d_enc=16, layers=2, heads=2, max_len=16, epochs=5,
                  batch_size=4, learning_rate=0.05, seed=3)


@pytest.fixture(scope="module")
def subword():
    corpus = [
        ["alpha", "beta", "gamma", "delta"],
        ["beta", "gamma", "delta", "epsilon"],
        ["alpha", "delta", "zeta", "theta"],
    ]
    config = EmbedConfig(dim=12, nmin=3, nmax=4, epochs=5, window=2,
                         negatives=2, seed=2, bucket_count=1 << 8)
    return train_skipgram(corpus, config)


@pytest.fixture(scope="module")
def fresh_model(subword):
    encoder = BuiltinEncoder(subword.words, SMALL)
    head = FusionHead(SMALL.d_enc + subword.dim)
    return FFBModel(encoder, subword, head, SMALL)


class TestEncoder:
    def test_h1_defined_for_empty_input(self, fresh_model):
        h1 = encode_utterance(fresh_model.encoder, [])
        assert h1.shape == (SMALL.d_enc,)
        assert np.isfinite(h1).all()

    def test_deterministic(self, fresh_model):
        a = encode_utterance(fresh_model.encoder, ["alpha", "beta"])
        b = encode_utterance(fresh_model.encoder, ["alpha", "beta"])
        assert np.array_equal(a, b)

    def test_truncation_to_max_len(self, fresh_model):
        long = ["alpha"] * 200
        truncated = ["alpha"] * SMALL.max_len
        assert np.array_equal(
            encode_utterance(fresh_model.encoder, long),
            encode_utterance(fresh_model.encoder, truncated),
        )

    def test_attention_rows_sum_to_one(self, fresh_model):
        for attn in fresh_model.encoder.attention_maps(["alpha", "beta", "gamma"]):
            sums = attn.sum(axis=-1)
            assert np.allclose(sums, 1.0, atol=1e-6)

    def test_unknown_tokens_map_to_unk(self, fresh_model):
        a = encode_utterance(fresh_model.encoder, ["zzzz"])
        b = encode_utterance(fresh_model.encoder, ["qqqq"])
        assert np.array_equal(a, b)


class TestFusion:
    def test_zero_head_is_uniform(self, fresh_model):
        probs = fresh_model.fuse_and_classify(["alpha", "beta"])
        assert np.allclose(probs, 0.25, atol=1e-12)

    def test_bias_only_softmax_analytic(self, subword):
        encoder = BuiltinEncoder(subword.words, SMALL)
        head = FusionHead(SMALL.d_enc + subword.dim)
        head.b[:] = np.array([10.0, 0.0, 0.0, 0.0])
        model = FFBModel(encoder, subword, head, SMALL)
        probs = model.fuse_and_classify(["alpha"])
        expected = math.exp(10) / (math.exp(10) + 3)
        assert probs[0] == pytest.approx(expected, abs=1e-9)
        assert CLASS_ORDER[0] == ArtefactLabel.SYMPTOM

    def test_probabilities_normalized_on_random_weights(self, subword):
        rng = np.random.default_rng(8)
        encoder = BuiltinEncoder(subword.words, SMALL)
        head = FusionHead(SMALL.d_enc + subword.dim)
        head.W[:] = rng.normal(0, 2.0, size=head.W.shape)
        head.b[:] = rng.normal(0, 2.0, size=head.b.shape)
        model = FFBModel(encoder, subword, head, SMALL)
        for tokens in (["alpha"], ["beta", "gamma"], [], ["zz", "alpha", "qq"]):
            probs = model.fuse_and_classify(tokens)
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)
            assert np.all(probs > 0) and np.all(probs < 1)

    def test_fusion_width(self, fresh_model, subword):
        assert fresh_model.head.W.shape[1] == SMALL.d_enc + subword.dim
        with pytest.raises(ValueError):
            FFBModel(fresh_model.encoder, subword,
                     FusionHead(SMALL.d_enc + subword.dim + 1), SMALL)

    def test_zero_init_loss_is_ln4(self, fresh_model):
        examples = [(["alpha"], ArtefactLabel.SYMPTOM), (["beta"], ArtefactLabel.ACTION)]
        assert fresh_model.loss(examples) == pytest.approx(math.log(4), abs=1e-9)


class TestGradients:
    def test_cross_entropy_gradients_match_finite_differences(self, subword):
        rng = np.random.default_rng(12)
        encoder = BuiltinEncoder(subword.words, SMALL, seed=12)
        head = FusionHead(SMALL.d_enc + subword.dim)
        head.W[:] = rng.normal(0, 0.3, size=head.W.shape)
        head.b[:] = rng.normal(0, 0.3, size=head.b.shape)
        model = FFBModel(encoder, subword, head, SMALL)
        examples = [
            (["alpha", "beta", "gamma"], ArtefactLabel.SYMPTOM),
            (["delta", "zz"], ArtefactLabel.DIAGNOSTIC),
            ([], ArtefactLabel.CHITCHAT),
        ]
        _, grads = model.loss_and_grads(examples)
        params = model.parameters()
        h = 1e-5
        checked = 0
        names = sorted(params)
        while checked < 120:
            name = names[checked % len(names)]
            tensor = params[name]
            idx = tuple(rng.integers(0, s) for s in tensor.shape)
            original = tensor[idx]
            tensor[idx] = original + h
            up = model.loss(examples)
            tensor[idx] = original - h
            down = model.loss(examples)
            tensor[idx] = original
            numeric = (up - down) / (2 * h)
            analytic = grads[name][idx]
            # 1e-6 floor: central differences at h=1e-5 on an O(1) loss carry
            # ~1e-11 roundoff, so smaller gradients cannot be resolved to
            # 1e-4 relative; the relative criterion applies above the floor.
            denom = max(abs(numeric), abs(analytic), 1e-6)
            assert abs(numeric - analytic) / denom <= 1e-4, (name, idx)
            checked += 1


def separable_examples(n_per_class=10):
    markers = {
        ArtefactLabel.SYMPTOM: "alpha",
        ArtefactLabel.ACTION: "beta",
        ArtefactLabel.DIAGNOSTIC: "gamma",
        ArtefactLabel.CHITCHAT: "delta",
    }
    examples = []
    for label, marker in markers.items():
        for i in range(n_per_class):
            filler = ["zeta"] if i % 2 else ["theta"]
            examples.append(([marker] + filler, label))
    return examples


class TestTraining:
    def test_single_class_rejected(self, subword):
        with pytest.raises(ValueError):
            train_ffb([(["a"], ArtefactLabel.ACTION)], subword, SMALL)

    def test_same_seed_identical_weights(self, subword):
        examples = separable_examples(4)
        a = train_ffb(examples, subword, SMALL)
        b = train_ffb(examples, subword, SMALL)
        for name, tensor in a.parameters().items():
            assert np.array_equal(tensor, b.parameters()[name]), name

    def test_learns_separable_markers(self, subword):
        config = FFBConfig(d_enc=16, layers=2, heads=2, max_len=16, epochs=30,
                           batch_size=8, learning_rate=0.05, seed=3)
        model = train_ffb(separable_examples(8), subword, config)
        assert training_accuracy(model, separable_examples(8)) >= 0.95
        assert model.metadata["epochs"] == config.epochs
        assert math.isfinite(model.metadata["final_loss"])

    def test_confidence_bounds(self, subword):
        model = train_ffb(separable_examples(4), subword, SMALL)
        prediction = predict_ffb(model, ["alpha", "zeta"])
        assert 0.25 <= prediction.confidence < 1.0
        assert prediction.source == "ffb"


class TestPredict:
    def test_argmax(self, fresh_model):
        fresh_model.head.b[:] = np.array([0.0, 5.0, 0.0, 0.0])
        try:
            prediction = predict_ffb(fresh_model, ["alpha"])
            assert prediction.label == ArtefactLabel.ACTION
            assert prediction.confidence == pytest.approx(
                math.exp(5) / (math.exp(5) + 3), abs=1e-9
            )
        finally:
            fresh_model.head.b[:] = 0.0

    def test_exact_tie_breaks_by_priority(self, fresh_model):
        # zero head: exact four-way tie; Diagnostic has the highest priority
        prediction = predict_ffb(fresh_model, ["alpha"])
        assert prediction.label == ArtefactLabel.DIAGNOSTIC
        assert prediction.confidence == pytest.approx(0.25)


class TestCheckpoint:
    def test_round_trip_exact(self, subword, tmp_path):
        model = train_ffb(separable_examples(3), subword, SMALL)
        path = tmp_path / "ffb.bin"
        save_ffb(model, path)
        loaded = load_ffb(path, subword)
        for name, tensor in model.parameters().items():
            assert np.array_equal(tensor, loaded.parameters()[name]), name
        assert loaded.metadata == model.metadata
        tokens = ["alpha", "qq"]
        assert np.array_equal(model.fuse_and_classify(tokens),
                              loaded.fuse_and_classify(tokens))

    def test_corruption_detected(self, subword, tmp_path):
        model = train_ffb(separable_examples(3), subword, SMALL)
        path = tmp_path / "ffb.bin"
        save_ffb(model, path)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="hash"):
            load_ffb(path, subword)

    def test_dimension_mismatch_rejected(self, subword, tmp_path):
        model = train_ffb(separable_examples(3), subword, SMALL)
        path = tmp_path / "ffb.bin"
        save_ffb(model, path)
        other = train_skipgram([["aa", "bb", "cc"]],
                               EmbedConfig(dim=6, nmin=3, nmax=3, epochs=1, window=1,
                                           negatives=1, seed=1, bucket_count=1 << 6))
        with pytest.raises(ValueError):
            load_ffb(path, other)
