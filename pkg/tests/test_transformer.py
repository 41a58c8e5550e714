"""Encoder/decoder tests: masking contracts, weight tying, loss, beam search."""

import itertools
import math

import numpy as np
import pytest

from signtrans import ndtensor as nd
from signtrans import transformer as tf
from signtrans.bpe import BOS_ID, EOS_ID, PAD_ID


def enc_cfg(**kw):
    base = dict(model_dim=8, heads=2, layers=2, ff_dim=16, dropout=0.0)
    base.update(kw)
    return tf.EncoderConfig(**base)


def dec_cfg(**kw):
    base = dict(model_dim=8, vocab_size=11, memory_dim=8, heads=2, layers=2, ff_dim=16,
                dropout=0.0, max_positions=16)
    base.update(kw)
    return tf.DecoderConfig(**base)


class TestSinusoidalPe:
    def test_position_zero(self):
        pe = tf.sinusoidal_pe(3, 6)
        np.testing.assert_array_equal(pe[0, 0::2], 0.0)
        np.testing.assert_array_equal(pe[0, 1::2], 1.0)

    def test_position_one_dim_two(self):
        pe = tf.sinusoidal_pe(2, 2)
        np.testing.assert_allclose(pe[1], [math.sin(1.0), math.cos(1.0)], atol=1e-12)
        np.testing.assert_allclose(pe[1], [0.84147, 0.54030], atol=1e-5)

    def test_bounded(self):
        pe = tf.sinusoidal_pe(50, 16)
        assert np.abs(pe).max() <= 1.0

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError):
            tf.sinusoidal_pe(4, 7)


class TestEncoder:
    def test_zero_layers_is_pe_passthrough(self):
        cfg = enc_cfg(layers=0)
        rng = np.random.default_rng(0)
        feats = nd.Tensor(rng.normal(size=(5, 8)))
        out = tf.encode(feats, np.ones(5, bool), {}, cfg)
        expected = feats.data + tf.sinusoidal_pe(5, 8)
        np.testing.assert_allclose(out.tokens.data, expected, atol=1e-12)

    def test_padding_does_not_leak(self):
        cfg = enc_cfg()
        rng = np.random.default_rng(1)
        params = tf.init_encoder_params(rng, cfg, np.float64)
        feats = rng.normal(size=(6, 8))
        mask = np.array([True, True, True, True, False, False])
        base = tf.encode(nd.Tensor(feats), mask, params, cfg).tokens.data
        perturbed = feats.copy()
        perturbed[4:] += 3.0
        out = tf.encode(nd.Tensor(perturbed), mask, params, cfg).tokens.data
        np.testing.assert_allclose(out[:4], base[:4], atol=1e-9)

    def test_gradient(self):
        cfg = enc_cfg(model_dim=4, heads=2, layers=1, ff_dim=6)
        rng = np.random.default_rng(2)
        params = tf.init_encoder_params(rng, cfg, np.float64)
        feats = nd.Tensor(rng.normal(size=(3, 4)))
        names = sorted(params)

        def f(x, *tensors):
            p = dict(zip(names, tensors))
            return tf.encode(x, np.ones(3, bool), p, cfg).tokens.mean()

        err = nd.grad_check(f, [feats] + [params[n] for n in names], max_coords_per_input=10)
        assert err < 1e-4


def random_encoded(rng, length=4, dim=8, pad_from=None):
    mask = np.ones(length, bool)
    if pad_from is not None:
        mask[pad_from:] = False
    return tf.EncodedFeatures(nd.Tensor(rng.normal(size=(length, dim))), mask)


class TestDecoder:
    def test_causality(self):
        cfg = dec_cfg()
        rng = np.random.default_rng(3)
        params = tf.init_decoder_params(rng, cfg, np.float64)
        enc = random_encoded(rng)
        ids = np.array([BOS_ID, 5, 6, 7, 8, EOS_ID])
        base = tf.decode_teacher_forced(enc, ids, params, cfg).logits.data
        for j in range(2, 6):
            mutated = ids.copy()
            mutated[j] = 9
            out = tf.decode_teacher_forced(enc, mutated, params, cfg).logits.data
            np.testing.assert_allclose(out[: j], base[: j], atol=1e-9)

    def test_weight_tying_shares_storage(self):
        cfg = dec_cfg()
        rng = np.random.default_rng(4)
        params = tf.init_decoder_params(rng, cfg, np.float64)
        assert not any("head" in k or "lm" in k for k in params)
        enc = random_encoded(rng)
        ids = np.array([BOS_ID, 5, EOS_ID])
        out = tf.decode_teacher_forced(enc, ids, params, cfg)
        loss = tf.translation_loss(out.logits, ids)
        nd.backward(loss)
        grad = params["dec.embed"].grad
        # rows of tokens 5 and EOS get gradient from the input-embedding path;
        # every vocabulary row gets gradient from the softmax path
        assert grad is not None
        assert np.abs(grad).sum() > 0
        assert (np.abs(grad).sum(axis=1) > 0).all()

    def test_too_long_target_rejected(self):
        cfg = dec_cfg(max_positions=4)
        rng = np.random.default_rng(5)
        params = tf.init_decoder_params(rng, cfg, np.float64)
        with pytest.raises(ValueError, match="max positions"):
            tf.decode_teacher_forced(random_encoded(rng), np.arange(5), params, cfg)

    def test_loss_gradient(self):
        cfg = dec_cfg(model_dim=4, heads=2, layers=1, ff_dim=6, vocab_size=7, memory_dim=4)
        rng = np.random.default_rng(6)
        params = tf.init_decoder_params(rng, cfg, np.float64)
        enc_feats = nd.Tensor(rng.normal(size=(3, 4)))
        ids = np.array([BOS_ID, 5, 6, EOS_ID])
        names = sorted(params)

        def f(feats, *tensors):
            p = dict(zip(names, tensors))
            enc = tf.EncodedFeatures(feats, np.ones(3, bool))
            out = tf.decode_teacher_forced(enc, ids, p, cfg)
            return tf.translation_loss(out.logits, ids)

        err = nd.grad_check(f, [enc_feats] + [params[n] for n in names], max_coords_per_input=8)
        assert err < 1e-4

    def test_pad_positions_do_not_change_loss(self):
        cfg = dec_cfg()
        rng = np.random.default_rng(7)
        params = tf.init_decoder_params(rng, cfg, np.float64)
        enc = random_encoded(rng)
        short = np.array([BOS_ID, 5, 6, EOS_ID])
        padded = np.array([BOS_ID, 5, 6, EOS_ID, PAD_ID, PAD_ID])
        loss_a = tf.translation_loss(tf.decode_teacher_forced(enc, short, params, cfg).logits, short)
        loss_b = tf.translation_loss(tf.decode_teacher_forced(enc, padded, params, cfg).logits, padded)
        assert loss_a.item() == pytest.approx(loss_b.item(), abs=1e-9)


class TestTranslationLoss:
    def test_uniform_logits(self):
        v = 11
        logits = nd.Tensor(np.zeros((4, v)))
        ids = np.array([BOS_ID, 5, 6, EOS_ID])
        assert tf.translation_loss(logits, ids).item() == pytest.approx(math.log(v))

    def test_perfect_logits(self):
        ids = np.array([BOS_ID, 5, 6, EOS_ID])
        logits = np.full((4, 11), -100.0)
        for i, t in enumerate(ids[1:]):
            logits[i, t] = 100.0
        assert tf.translation_loss(nd.Tensor(logits), ids).item() == pytest.approx(0.0, abs=1e-12)

    def test_hand_built_two_token_case(self):
        # positions: BOS predicts 4, 4 predicts EOS; vocab of 5
        ids = np.array([BOS_ID, 4, EOS_ID])
        logits = np.array([
            [0.0, 0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        # manual softmax arithmetic: targets are 4 (logit 1.0) then EOS=2 (logit 2.0)
        p1 = math.exp(1.0) / (4 + math.exp(1.0))
        p2 = math.exp(2.0) / (4 + math.exp(2.0))
        expected = -(math.log(p1) + math.log(p2)) / 2
        assert tf.translation_loss(nd.Tensor(logits), ids).item() == pytest.approx(expected, rel=1e-12)


def make_toy_model(seed, vocab=5, dim=4, enc_len=3):
    rng = np.random.default_rng(seed)
    cfg = dec_cfg(model_dim=dim, vocab_size=vocab, memory_dim=dim, heads=2, layers=1,
                  ff_dim=8, max_positions=8)
    params = tf.init_decoder_params(rng, cfg, np.float64)
    # spread the embeddings so token scores differ meaningfully
    params["dec.embed"] = nd.Tensor(rng.normal(size=(vocab, dim)), requires_grad=True)
    enc = tf.EncodedFeatures(nd.Tensor(rng.normal(size=(enc_len, dim))), np.ones(enc_len, bool))
    return enc, params, cfg


def enumerate_argmax(enc, params, cfg, max_len):
    """Exhaustive search over every sequence beam search could produce."""
    vocab = cfg.vocab_size
    non_eos = [t for t in range(vocab) if t != EOS_ID]
    sequences = []
    for t in range(1, max_len):
        for prefix in itertools.product(non_eos, repeat=t - 1):
            sequences.append(prefix + (EOS_ID,))
    sequences.append((EOS_ID,))
    for prefix in itertools.product(non_eos, repeat=max_len):
        sequences.append(prefix)
    # drop the duplicate length-1 EOS generated twice
    sequences = sorted(set(sequences))

    def score(seq):
        ids = np.array((BOS_ID,) + seq, dtype=np.int64)
        out = tf.decode_teacher_forced(enc, ids, params, cfg)
        total = 0.0
        for i, tok in enumerate(seq):
            total += float(tf._log_softmax_row(out.logits.data[i])[tok])
        return total

    scored = [(score(s), s) for s in sequences]
    best = min(scored, key=lambda p: (-p[0], p[1]))
    return best[1], best[0]


class TestBeamSearch:
    def test_beam_one_equals_greedy(self):
        enc, params, cfg = make_toy_model(seed=8)
        result = tf.beam_search(enc, params, cfg, beam_size=1, max_len=4)
        ids = []
        while len(ids) < 4:
            seq = np.array([BOS_ID] + ids, dtype=np.int64)
            logits = tf.decode_teacher_forced(enc, seq, params, cfg).logits.data[-1]
            nxt = int(np.argmax(tf._log_softmax_row(logits)))
            ids.append(nxt)
            if nxt == EOS_ID:
                break
        assert result.ids == ids

    def test_exhaustive_width_matches_enumeration(self):
        enc, params, cfg = make_toy_model(seed=9)
        best_seq, best_score = enumerate_argmax(enc, params, cfg, max_len=4)
        result = tf.beam_search(enc, params, cfg, beam_size=5**4, max_len=4)
        assert tuple(result.ids) == best_seq
        assert result.score == pytest.approx(best_score, abs=1e-9)

    def test_monotone_in_width(self):
        for seed in range(20):
            enc, params, cfg = make_toy_model(seed=100 + seed)
            scores = [
                tf.beam_search(enc, params, cfg, beam_size=k, max_len=4).score
                for k in (1, 2, 3, 5, 8)
            ]
            for a, b in zip(scores, scores[1:]):
                assert b >= a - 1e-12, (seed, scores)

    def test_wide_beam_never_below_greedy(self):
        for seed in range(10):
            enc, params, cfg = make_toy_model(seed=200 + seed)
            greedy = tf.beam_search(enc, params, cfg, beam_size=1, max_len=4).score
            wide = tf.beam_search(enc, params, cfg, beam_size=5, max_len=4).score
            assert wide >= greedy - 1e-12

    def test_parameter_validation(self):
        enc, params, cfg = make_toy_model(seed=10)
        with pytest.raises(ValueError):
            tf.beam_search(enc, params, cfg, beam_size=0, max_len=4)
        with pytest.raises(ValueError):
            tf.beam_search(enc, params, cfg, beam_size=2, max_len=0)

    def test_deterministic(self):
        enc, params, cfg = make_toy_model(seed=11)
        a = tf.beam_search(enc, params, cfg, beam_size=3, max_len=5)
        b = tf.beam_search(enc, params, cfg, beam_size=3, max_len=5)
        assert a.ids == b.ids
        assert a.score == b.score
