"""Finite-difference verification battery over every differentiable piece.

Each check builds a small 64-bit problem, runs the backward pass and compares
against central differences.  Ops are held to 1e-5, composed losses to 1e-4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ccm as ccm_mod
from . import ndtensor as nd
from . import posenet as pn
from . import transformer as tf

OP_TOL = 1e-5
COMPOSITE_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.error < self.tol


def _rand(shape, seed):
    return nd.Tensor(np.random.default_rng(seed).normal(size=shape))


def _op_checks():
    w23 = _rand((2, 3), 1000)
    w34 = _rand((3, 4), 1001)
    yield "matmul", OP_TOL, lambda: nd.grad_check(
        lambda a, b: nd.matmul(a, b).sum(), [_rand((3, 4), 0), _rand((4, 2), 1)]
    )
    yield "add", OP_TOL, lambda: nd.grad_check(
        lambda a, b: ((a + b) * w23).sum(), [_rand((2, 3), 2), _rand((2, 3), 3)]
    )
    yield "subtract", OP_TOL, lambda: nd.grad_check(
        lambda a, b: ((a - b) * w23).sum(), [_rand((2, 3), 4), _rand((2, 3), 5)]
    )
    yield "multiply", OP_TOL, lambda: nd.grad_check(
        lambda a, b: (a * b).sum(), [_rand((2, 3), 6), _rand((2, 3), 7)]
    )
    yield "scale", OP_TOL, lambda: nd.grad_check(
        lambda a: (nd.scale(a, -1.7) * w23).sum(), [_rand((2, 3), 8)]
    )
    yield "concat", OP_TOL, lambda: nd.grad_check(
        lambda a, b: (nd.concat([a, b], axis=1) * _rand((2, 6), 9)).sum(),
        [_rand((2, 3), 10), _rand((2, 3), 11)],
    )
    yield "stack", OP_TOL, lambda: nd.grad_check(
        lambda a, b: (nd.stack([a, b]) * _rand((2, 2, 3), 12)).sum(),
        [_rand((2, 3), 13), _rand((2, 3), 14)],
    )
    yield "transpose", OP_TOL, lambda: nd.grad_check(
        lambda a: (a.transpose() * _rand((4, 3), 15)).sum(), [_rand((3, 4), 16)]
    )
    yield "reshape", OP_TOL, lambda: nd.grad_check(
        lambda a: (a.reshape((6,)) * _rand((6,), 17)).sum(), [_rand((2, 3), 18)]
    )
    yield "mean", OP_TOL, lambda: nd.grad_check(
        lambda a: (a.mean(axis=1) * _rand((3,), 19)).sum(), [_rand((3, 4), 20)]
    )
    yield "sum", OP_TOL, lambda: nd.grad_check(
        lambda a: (a.sum(axis=0) * _rand((4,), 21)).sum(), [_rand((3, 4), 22)]
    )
    yield "take", OP_TOL, lambda: nd.grad_check(
        lambda a: (nd.take(a, [2, 0, 2], axis=0) * w34).sum(), [_rand((5, 4), 23)]
    )
    yield "relu", OP_TOL, lambda: nd.grad_check(
        lambda a: (nd.relu(a) * w23).sum(),
        [nd.Tensor(np.random.default_rng(24).normal(size=(2, 3)) + 0.4)],
    )
    yield "gelu", OP_TOL, lambda: nd.grad_check(
        lambda a: (nd.gelu(a) * w23).sum(), [_rand((2, 3), 25)]
    )
    yield "softmax", OP_TOL, lambda: nd.grad_check(
        lambda a: (nd.softmax(a, axis=1) * _rand((2, 5), 26)).sum(), [_rand((2, 5), 27)]
    )
    yield "layer_norm", OP_TOL, lambda: nd.grad_check(
        lambda x, g, b: (nd.layer_norm(x, g, b) * _rand((4, 8), 28)).sum(),
        [_rand((4, 8), 29), _rand((8,), 30), _rand((8,), 31)],
    )
    yield "dropout", OP_TOL, lambda: nd.grad_check(
        lambda x: nd.dropout(x, 0.5, True, np.random.default_rng(7)).sum(), [_rand((6, 4), 32)]
    )
    yield "embedding_lookup", OP_TOL, lambda: nd.grad_check(
        lambda t: (nd.embedding_lookup(t, [2, 0, 2]) * w34).sum(), [_rand((5, 4), 33)]
    )
    yield "cosine_similarity", OP_TOL, lambda: nd.grad_check(
        nd.cosine_similarity, [_rand((6,), 34), _rand((6,), 35)]
    )
    yield "cross_entropy", OP_TOL, lambda: nd.grad_check(
        lambda l: nd.cross_entropy_logits(l, [2, 0, 4]), [_rand((3, 5), 36)]
    )
    yield "channel_graph_mix", OP_TOL, lambda: nd.grad_check(
        lambda x, r: (nd.channel_graph_mix(x, r) * _rand((3, 4, 2), 37)).sum(),
        [_rand((3, 4, 2), 38), _rand((2, 4, 4), 39)],
    )


def _backbone_check():
    spec = pn.default_skeleton()
    params = pn.init_backbone_params(np.random.default_rng(40), (2, 2, 2), 3, spec, np.float64)
    rng = np.random.default_rng(41)
    for name in list(params):
        if name.endswith("refine"):
            params[name] = nd.Tensor(rng.normal(scale=0.05, size=params[name].shape))
    adj = nd.Tensor(spec.normalized_adjacency())
    frames = np.zeros((5, 76, 3))
    frames[:, :, :2] = rng.normal(size=(5, 76, 2))
    frames[:, :, 2] = 1.0
    clip = pn.PoseSequence(frames)
    names = sorted(params)

    def f(*tensors):
        return pn.backbone_forward(clip, dict(zip(names, tensors)), spec, adj).features.mean()

    return nd.grad_check(f, [params[n] for n in names], max_coords_per_input=10)


def _encoder_check():
    cfg = tf.EncoderConfig(model_dim=4, heads=2, layers=1, ff_dim=6, dropout=0.0)
    params = tf.init_encoder_params(np.random.default_rng(42), cfg, np.float64)
    feats = _rand((3, 4), 43)
    names = sorted(params)

    def f(x, *tensors):
        return tf.encode(x, np.ones(3, bool), dict(zip(names, tensors)), cfg).tokens.mean()

    return nd.grad_check(f, [feats] + [params[n] for n in names], max_coords_per_input=8)


def _decoder_loss_check():
    cfg = tf.DecoderConfig(model_dim=4, vocab_size=7, memory_dim=4, heads=2, layers=1,
                           ff_dim=6, dropout=0.0, max_positions=8)
    params = tf.init_decoder_params(np.random.default_rng(44), cfg, np.float64)
    feats = _rand((3, 4), 45)
    ids = np.array([1, 5, 6, 2])
    names = sorted(params)

    def f(x, *tensors):
        enc = tf.EncodedFeatures(x, np.ones(3, bool))
        out = tf.decode_teacher_forced(enc, ids, dict(zip(names, tensors)), cfg)
        return tf.translation_loss(out.logits, ids)

    return nd.grad_check(f, [feats] + [params[n] for n in names], max_coords_per_input=8)


def _anchor_query_check():
    rng = np.random.default_rng(46)
    cfg = ccm_mod.CcmConfig(heads=2, hidden=3)
    batch = ccm_mod.BatchAnchorSet([0, 1], [{0}, {1}], 2)
    tensors = {
        "table": nd.Tensor(rng.normal(size=(2, 5))),
        "wq": nd.Tensor(rng.normal(size=(5, 6))),
        "wk": nd.Tensor(rng.normal(size=(4, 6))),
        "wv": nd.Tensor(rng.normal(size=(4, 6))),
        "wo": nd.Tensor(rng.normal(size=(6, 5))),
        "f0": nd.Tensor(rng.normal(size=(3, 4))),
        "f1": nd.Tensor(rng.normal(size=(3, 4))),
    }
    order = list(tensors)

    def f(*args):
        t = dict(zip(order, args))
        params = {f"ccm.{k}": t[k] for k in ("table", "wq", "wk", "wv", "wo")}
        encoded = [
            tf.EncodedFeatures(t["f0"], np.ones(3, bool)),
            tf.EncodedFeatures(t["f1"], np.ones(3, bool)),
        ]
        h = ccm_mod.anchor_query(params, batch, encoded, cfg)
        return nd.concat([c.reshape((10,)) for c in h.columns], axis=0).mean()

    return nd.grad_check(f, list(tensors.values()), max_coords_per_input=10)


def _joint_loss_check():
    # triplet loss (violating regime) combined with a cross-entropy term
    rng = np.random.default_rng(47)
    cfg = ccm_mod.CcmConfig(heads=1, hidden=3, margin=0.9)
    batch = ccm_mod.BatchAnchorSet([0, 1], [{0}, {1}], 2)
    tensors = {
        "table": nd.Tensor(rng.normal(size=(2, 4))),
        "wq": nd.Tensor(rng.normal(size=(4, 3))),
        "wk": nd.Tensor(rng.normal(size=(5, 3))),
        "wv": nd.Tensor(rng.normal(size=(5, 3))),
        "wo": nd.Tensor(rng.normal(size=(3, 4))),
        "f0": nd.Tensor(rng.normal(size=(3, 5))),
        "f1": nd.Tensor(rng.normal(size=(3, 5))),
        "logits": nd.Tensor(rng.normal(size=(3, 6))),
    }
    order = list(tensors)

    def f(*args):
        t = dict(zip(order, args))
        params = {f"ccm.{k}": t[k] for k in ("table", "wq", "wk", "wv", "wo")}
        encoded = [
            tf.EncodedFeatures(t["f0"], np.ones(3, bool)),
            tf.EncodedFeatures(t["f1"], np.ones(3, bool)),
        ]
        h = ccm_mod.anchor_query(params, batch, encoded, cfg)
        l_itl = ccm_mod.triplet_loss(h, [(0, 0, 1), (1, 1, 0)], params, cfg.margin)
        l_ce = nd.cross_entropy_logits(t["logits"], [1, 4, 2])
        return ccm_mod.combined_loss(l_ce, l_itl, 0.8)

    return nd.grad_check(f, list(tensors.values()), max_coords_per_input=10)


def run_suite() -> list[CheckResult]:
    results = [CheckResult(name, fn(), tol) for name, tol, fn in _op_checks()]
    results += [
        CheckResult("backbone_forward", _backbone_check(), COMPOSITE_TOL),
        CheckResult("encoder", _encoder_check(), COMPOSITE_TOL),
        CheckResult("decoder+translation_loss", _decoder_loss_check(), COMPOSITE_TOL),
        CheckResult("anchor_query", _anchor_query_check(), COMPOSITE_TOL),
        CheckResult("joint_loss", _joint_loss_check(), COMPOSITE_TOL),
    ]
    return results
