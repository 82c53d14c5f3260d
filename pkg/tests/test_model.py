"""Forward-pass semantics: softmax, attention, full pipeline, prediction."""

import dataclasses

import numpy as np
import pytest

from bagside.corpus import Bag, EmbeddingMatrix, SentenceRec
from bagside.errors import (
    BadLabelError,
    EmptyBagError,
    ShapeMismatchError,
)
from bagside.model import (
    ModelConfig,
    attention_pool,
    cross_entropy,
    forward,
    predict,
    stable_softmax,
    validate_params,
)

from conftest import TINY_ORACLE_P, random_instance, tiny_instance


class TestStableSoftmax:
    def test_symmetric_pair(self):
        np.testing.assert_allclose(stable_softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_large_values_no_overflow(self):
        out = stable_softmax(np.array([1000.0, 1000.0]))
        np.testing.assert_allclose(out, [0.5, 0.5])
        assert np.all(np.isfinite(out))

    def test_extreme_spread(self):
        out = stable_softmax(np.array([1000.0, -1000.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_shift_invariance_and_simplex(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=6) * 10
        c = float(rng.normal()) * 100
        np.testing.assert_allclose(stable_softmax(x + c), stable_softmax(x), atol=1e-12)
        out = stable_softmax(x)
        assert abs(out.sum() - 1.0) < 1e-9
        assert np.all(out > 0)


class TestAttentionPool:
    def test_single_rep(self):
        reps = np.array([[1.0, 2.0, 3.0]])
        alpha, b = attention_pool(reps, np.array([0.5, -0.5, 1.0]))
        np.testing.assert_allclose(alpha, [1.0])
        np.testing.assert_allclose(b, reps[0])

    def test_identical_reps_uniform(self):
        reps = np.tile(np.array([2.0, -1.0]), (4, 1))
        alpha, b = attention_pool(reps, np.array([1.0, 3.0]))
        np.testing.assert_allclose(alpha, [0.25] * 4)
        np.testing.assert_allclose(b, [2.0, -1.0])

    def test_zero_query_gives_mean(self):
        rng = np.random.default_rng(0)
        reps = rng.normal(size=(3, 4))
        alpha, b = attention_pool(reps, np.zeros(4))
        np.testing.assert_allclose(alpha, [1 / 3] * 3)
        np.testing.assert_allclose(b, reps.mean(axis=0))

    def test_empty_bag(self):
        with pytest.raises(EmptyBagError):
            attention_pool(np.zeros((0, 3)), np.zeros(3))

    def test_dim_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            attention_pool(np.zeros((2, 3)), np.zeros(4))

    def test_weights_on_simplex_and_convexity(self):
        rng = np.random.default_rng(1)
        reps = rng.normal(size=(5, 6))
        alpha, b = attention_pool(reps, rng.normal(size=6))
        assert abs(alpha.sum() - 1.0) < 1e-6
        assert np.all(alpha >= 0)
        assert np.all(b >= reps.min(axis=0) - 1e-12)
        assert np.all(b <= reps.max(axis=0) + 1e-12)


class TestForward:
    def test_oracle_instance(self):
        bag, emb, params, cfg = tiny_instance()
        cache = forward(bag, emb, params, cfg, mode="eval")
        np.testing.assert_allclose(cache.p, TINY_ORACLE_P, atol=1e-10)

    def test_simplex_on_random_instances(self):
        for seed in range(5):
            b, e, p, c = random_instance(seed)
            cache = forward(b, e, p, c, mode="eval")
            assert cache.p.shape == (c.n_rel,)
            assert abs(cache.p.sum() - 1.0) < 1e-6
            assert np.all(cache.p > 0)
            assert abs(cache.alpha.sum() - 1.0) < 1e-6

    def test_permutation_invariance(self):
        for seed in range(5):
            bag, emb, params, cfg = random_instance(seed)
            if len(bag.sentences) < 2:
                continue
            flipped = dataclasses.replace(bag, sentences=bag.sentences[::-1])
            p1 = forward(bag, emb, params, cfg, mode="eval").p
            p2 = forward(flipped, emb, params, cfg, mode="eval").p
            np.testing.assert_allclose(p1, p2, atol=1e-12)

    def test_duplication_invariance(self):
        bag, emb, params, cfg = tiny_instance()
        doubled = dataclasses.replace(bag, sentences=bag.sentences + bag.sentences)
        p1 = forward(bag, emb, params, cfg, mode="eval").p
        p2 = forward(doubled, emb, params, cfg, mode="eval").p
        np.testing.assert_allclose(p1, p2, atol=1e-12)

    def test_zero_dropout_train_equals_eval(self):
        for seed in range(5):
            bag, emb, params, cfg = random_instance(seed)
            rng = np.random.default_rng(9)
            train_p = forward(bag, emb, params, cfg, mode="train", rng=rng).p
            eval_p = forward(bag, emb, params, cfg, mode="eval").p
            np.testing.assert_array_equal(train_p, eval_p)

    def test_dropout_masks_recorded_and_scaled(self):
        bag, emb, params, cfg = tiny_instance()
        cfg = dataclasses.replace(cfg, p1=0.5, p2=0.4)
        rng = np.random.default_rng(3)
        cache = forward(bag, emb, params, cfg, mode="train", rng=rng)
        assert set(np.round(np.unique(cache.mask1), 6)) <= {0.0, 2.0}
        assert set(np.round(np.unique(cache.mask2), 6)) <= {0.0, round(1 / 0.6, 6)}
        np.testing.assert_array_equal(cache.h1_drop, cache.h1 * cache.mask1)

    def test_eval_ignores_dropout_rate(self):
        bag, emb, params, cfg = tiny_instance()
        dropped = dataclasses.replace(cfg, p1=0.9, p2=0.9)
        p1 = forward(bag, emb, params, cfg, mode="eval").p
        p2 = forward(bag, emb, params, dropped, mode="eval").p
        np.testing.assert_array_equal(p1, p2)

    def test_train_mode_needs_rng_when_dropping(self):
        bag, emb, params, cfg = tiny_instance()
        cfg = dataclasses.replace(cfg, p1=0.5)
        with pytest.raises(ValueError):
            forward(bag, emb, params, cfg, mode="train", rng=None)

    def test_bad_mode(self):
        bag, emb, params, cfg = tiny_instance()
        with pytest.raises(ValueError):
            forward(bag, emb, params, cfg, mode="test")

    def test_embedding_dim_mismatch(self):
        bag, emb, params, cfg = tiny_instance()
        wrong = EmbeddingMatrix(np.zeros((3, 5), dtype=np.float32))
        with pytest.raises(ShapeMismatchError):
            forward(bag, wrong, params, cfg, mode="eval")

    def test_param_shape_mismatch(self):
        bag, emb, params, cfg = tiny_instance()
        bad = dataclasses.replace(cfg, u2=3)
        with pytest.raises(ShapeMismatchError):
            validate_params(params, bad)


class TestCrossEntropy:
    def test_one_hot_zero_loss(self):
        assert cross_entropy(np.array([0.0, 1.0]), 1) == 0.0

    def test_uniform_five(self):
        p = np.full(5, 0.2)
        assert cross_entropy(p, 2) == pytest.approx(np.log(5), abs=1e-12)

    def test_quarter(self):
        assert cross_entropy(np.array([0.75, 0.25]), 1) == pytest.approx(1.3862943611198906)

    def test_floor_engages(self):
        loss = cross_entropy(np.array([1.0, 0.0]), 1)
        assert loss == pytest.approx(-np.log(1e-12))

    def test_bad_label(self):
        with pytest.raises(BadLabelError):
            cross_entropy(np.array([0.5, 0.5]), 2)
        with pytest.raises(BadLabelError):
            cross_entropy(np.array([0.5, 0.5]), -1)
        with pytest.raises(BadLabelError):
            cross_entropy(np.array([0.5, 0.5]), True)


class TestPredict:
    def test_argmax(self):
        bag, emb, params, cfg = tiny_instance()
        rel, p = predict(bag, emb, params, cfg)
        assert rel == int(np.argmax(p)) == 0
        np.testing.assert_allclose(p, TINY_ORACLE_P, atol=1e-10)

    def test_exact_tie_takes_lowest_id(self):
        bag, emb, params, cfg = tiny_instance()
        tied = dataclasses.replace(
            params, W3=np.zeros_like(params.W3), b3=np.zeros_like(params.b3))
        rel, p = predict(bag, emb, tied, cfg)
        assert rel == 0
        np.testing.assert_allclose(p, [0.5, 0.5])

    def test_deterministic(self):
        bag, emb, params, cfg = tiny_instance()
        first = predict(bag, emb, params, cfg)
        second = predict(bag, emb, params, cfg)
        assert first[0] == second[0]
        np.testing.assert_array_equal(first[1], second[1])
