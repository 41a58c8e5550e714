"""Tests for the autodiff engine: op semantics, gradients, graph behaviour."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signtrans import ndtensor as nd


def rand(shape, seed):
    return nd.Tensor(np.random.default_rng(seed).normal(size=shape))


class TestMatmul:
    def test_identity(self):
        eye = nd.Tensor(np.eye(2))
        a = nd.Tensor([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(nd.matmul(eye, a).data, a.data)

    def test_hand_product(self):
        a = nd.Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = nd.Tensor([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_array_equal(nd.matmul(a, b).data, [[19.0, 22.0], [43.0, 50.0]])

    def test_gradient(self):
        w = rand((4, 2), 1)
        err = nd.grad_check(lambda a, b: nd.matmul(a, b).sum(), [rand((3, 4), 0), w])
        assert err < 1e-5

    def test_batched_gradient(self):
        err = nd.grad_check(lambda a, b: nd.matmul(a, b).sum(), [rand((2, 3, 4), 2), rand((4, 5), 3)])
        assert err < 1e-5

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(nd.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            nd.matmul(nd.Tensor(np.zeros((2, 3))), nd.Tensor(np.zeros((2, 3))))


class TestSoftmax:
    def test_symmetry(self):
        out = nd.softmax(nd.Tensor([0.0, 0.0]), axis=0)
        np.testing.assert_allclose(out.data, [0.5, 0.5])

    def test_closed_form(self):
        out = nd.softmax(nd.Tensor([math.log(1), math.log(2), math.log(3)]), axis=0)
        np.testing.assert_allclose(out.data, [1 / 6, 2 / 6, 3 / 6], atol=1e-12)

    def test_gradient(self):
        weights = rand((2, 5), 11)
        err = nd.grad_check(
            lambda x: (nd.softmax(x, axis=1) * weights).sum(), [rand((2, 5), 10)]
        )
        assert err < 1e-5

    @given(st.integers(0, 2**31 - 1), st.floats(-50, 50))
    @settings(max_examples=25, deadline=None)
    def test_rows_sum_to_one_and_shift_invariance(self, seed, shift):
        x = np.random.default_rng(seed).normal(scale=10, size=(3, 7))
        s = nd.softmax(nd.Tensor(x), axis=1).data
        np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-9)
        shifted = nd.softmax(nd.Tensor(x + shift), axis=1).data
        np.testing.assert_allclose(s, shifted, atol=1e-9)


class TestLayerNorm:
    def test_constant_row_maps_to_zero(self):
        x = nd.Tensor(np.full((2, 4), 3.7))
        out = nd.layer_norm(x, nd.Tensor(np.ones(4)), nd.Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)
        assert np.isfinite(out.data).all()

    def test_two_point_row(self):
        out = nd.layer_norm(
            nd.Tensor([[1.0, 3.0]]), nd.Tensor(np.ones(2)), nd.Tensor(np.zeros(2)), eps=1e-12
        )
        np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-6)

    def test_gradient(self):
        weights = rand((4, 8), 21)
        err = nd.grad_check(
            lambda x, g, b: (nd.layer_norm(x, g, b) * weights).sum(),
            [rand((4, 8), 20), nd.Tensor(np.random.default_rng(22).normal(size=8)), rand((8,), 23)],
        )
        assert err < 1e-5

    def test_mismatched_affine_shapes(self):
        with pytest.raises(nd.ShapeError):
            nd.layer_norm(nd.Tensor(np.zeros((2, 4))), nd.Tensor(np.ones(3)), nd.Tensor(np.zeros(4)))


class TestDropout:
    def test_inference_identity(self):
        x = rand((5, 5), 30)
        out = nd.dropout(x, 0.7, train=False, rng=np.random.default_rng(0))
        assert out is x

    def test_p_zero_identity(self):
        x = rand((5, 5), 31)
        out = nd.dropout(x, 0.0, train=True, rng=np.random.default_rng(0))
        assert out is x

    def test_survivor_scaling_preserves_mean(self):
        x = nd.Tensor(np.ones(10_000))
        out = nd.dropout(x, 0.5, train=True, rng=np.random.default_rng(7))
        assert abs(out.data.mean() - 1.0) < 0.05

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            nd.dropout(nd.Tensor([1.0]), 1.0, train=True, rng=np.random.default_rng(0))

    def test_same_seed_same_mask(self):
        x = rand((20,), 32)
        a = nd.dropout(x, 0.4, train=True, rng=np.random.default_rng(3))
        b = nd.dropout(x, 0.4, train=True, rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a.data, b.data)

    def test_gradient(self):
        err = nd.grad_check(
            lambda x: nd.dropout(x, 0.5, train=True, rng=np.random.default_rng(5)).sum(),
            [rand((6, 4), 33)],
        )
        assert err < 1e-5


class TestEmbeddingLookup:
    def test_single_row(self):
        table = nd.Tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_array_equal(nd.embedding_lookup(table, [0]).data, [[1.0, 2.0]])

    def test_repeated_id_accumulates(self):
        table = nd.Tensor(np.zeros((3, 2)), requires_grad=True)
        out = nd.embedding_lookup(table, [1, 1])
        nd.backward(out.sum())
        np.testing.assert_array_equal(table.grad, [[0, 0], [2, 2], [0, 0]])

    def test_gradient(self):
        err = nd.grad_check(lambda t: nd.embedding_lookup(t, [2, 0, 2]).sum(), [rand((5, 3), 40)])
        assert err < 1e-5

    def test_out_of_range_names_id_and_size(self):
        table = nd.Tensor(np.zeros((5, 3)))
        with pytest.raises(IndexError, match="7.*5 rows"):
            nd.embedding_lookup(table, [1, 7])


class TestCosineSimilarity:
    def test_self_similarity(self):
        u = rand((6,), 50)
        assert nd.cosine_similarity(u, u).item() == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal(self):
        c = nd.cosine_similarity(nd.Tensor([1.0, 0.0]), nd.Tensor([0.0, 1.0]))
        assert c.item() == pytest.approx(0.0, abs=1e-9)

    def test_gradient(self):
        err = nd.grad_check(nd.cosine_similarity, [rand((6,), 51), rand((6,), 52)])
        assert err < 1e-5


class TestCrossEntropyLogits:
    def test_uniform_logits(self):
        logits = nd.Tensor(np.zeros((3, 4)))
        assert nd.cross_entropy_logits(logits, [0, 1, 3]).item() == pytest.approx(math.log(4))

    def test_confident_logits(self):
        val = nd.cross_entropy_logits(nd.Tensor([[10.0, -10.0]]), [0]).item()
        assert val == pytest.approx(math.log(1 + math.exp(-20)), rel=1e-6)
        assert val == pytest.approx(2.06e-9, rel=1e-2)

    def test_gradient(self):
        err = nd.grad_check(lambda l: nd.cross_entropy_logits(l, [2, 0, 4]), [rand((3, 5), 60)])
        assert err < 1e-5

    def test_ignored_positions_contribute_nothing(self):
        logits = nd.Tensor(np.random.default_rng(61).normal(size=(4, 5)), requires_grad=True)
        loss = nd.cross_entropy_logits(logits, [1, 0, 0, 2], ignore_index=0)
        ref = nd.cross_entropy_logits(nd.Tensor(logits.data[[0, 3]]), [1, 2])
        assert loss.item() == pytest.approx(ref.item(), rel=1e-12)
        nd.backward(loss)
        np.testing.assert_array_equal(logits.grad[[1, 2]], 0.0)

    def test_all_ignored_is_an_error(self):
        with pytest.raises(ValueError, match="ignored"):
            nd.cross_entropy_logits(nd.Tensor(np.zeros((2, 3))), [9, 9], ignore_index=9)

    def test_bad_target_names_id(self):
        with pytest.raises(IndexError, match="6"):
            nd.cross_entropy_logits(nd.Tensor(np.zeros((1, 5))), [6])


class TestPrimitives:
    def test_add_zero(self):
        x = rand((3, 4), 70)
        np.testing.assert_array_equal((x + nd.Tensor(np.zeros((3, 4)))).data, x.data)

    def test_concat_shapes(self):
        out = nd.concat([nd.Tensor(np.zeros((2, 2))), nd.Tensor(np.ones((2, 3)))], axis=1)
        assert out.shape == (2, 5)

    def test_concat_mismatch(self):
        with pytest.raises(nd.ShapeError):
            nd.concat([nd.Tensor(np.zeros((2, 2))), nd.Tensor(np.ones((3, 3)))], axis=1)

    def test_reshape_size_mismatch(self):
        with pytest.raises(nd.ShapeError):
            nd.reshape(nd.Tensor(np.zeros((2, 3))), (4, 2))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradients_on_random_shapes(self, seed):
        g = np.random.default_rng(100 + seed)
        shape = tuple(g.integers(2, 5, size=2))
        x = nd.Tensor(g.normal(size=shape))
        y = nd.Tensor(g.normal(size=shape))
        w = nd.Tensor(g.normal(size=shape))
        cases = {
            "add": lambda a, b: ((a + b) * w).sum(),
            "subtract": lambda a, b: ((a - b) * w).sum(),
            "multiply": lambda a, b: (a * b).sum(),
            "scale": lambda a, b: (nd.scale(a, 2.5) * b).sum(),
            "mean_axis": lambda a, b: (a.mean(axis=1) * b.mean(axis=1)).sum(),
            "sum_axis": lambda a, b: (a.sum(axis=0) * b.sum(axis=0)).sum(),
            "transpose": lambda a, b: (a.transpose() * b.transpose()).sum(),
            "reshape": lambda a, b: (a.reshape((shape[0] * shape[1],)) * b.reshape((-1 + 1 + shape[0] * shape[1],))).sum(),
            "concat": lambda a, b: (nd.concat([a, b], axis=0) * nd.Tensor(np.tile(w.data, (2, 1)))).sum(),
            "stack": lambda a, b: (nd.stack([a, b], axis=0) * nd.Tensor(np.stack([w.data, w.data]))).sum(),
            "take": lambda a, b: (nd.take(a, [1, 0, 1], axis=0) * nd.take(b, [0, 1, 1], axis=0)).sum(),
        }
        for name, fn in cases.items():
            err = nd.grad_check(fn, [x, y])
            assert err < 1e-5, f"{name}: {err}"

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_relu_gelu_gradients(self, seed):
        g = np.random.default_rng(200 + seed)
        # keep samples away from relu's kink, where finite differences lie
        x = nd.Tensor(g.normal(size=(4, 3)) + 0.2 * np.sign(g.normal(size=(4, 3))))
        data = np.where(np.abs(x.data) < 0.05, 0.1, x.data)
        x = nd.Tensor(data)
        w = nd.Tensor(g.normal(size=(4, 3)))
        assert nd.grad_check(lambda a: (nd.relu(a) * w).sum(), [x]) < 1e-5
        assert nd.grad_check(lambda a: (nd.gelu(a) * w).sum(), [x]) < 1e-5

    def test_broadcast_add_gradient(self):
        err = nd.grad_check(lambda a, b: (a + b).sum(), [rand((3, 4), 80), rand((4,), 81)])
        assert err < 1e-5


class TestBackward:
    def test_identity(self):
        x = nd.Tensor(3.0, requires_grad=True)
        y = nd.scale(x, 1.0)
        nd.backward(y)
        np.testing.assert_array_equal(x.grad, 1.0)

    def test_sum_of_squares(self):
        x = nd.Tensor([1.0, 2.0, 3.0], requires_grad=True)
        nd.backward((x * x).sum())
        np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])

    def test_diamond_graph(self):
        a = nd.Tensor(2.0, requires_grad=True)
        b = nd.Tensor(5.0, requires_grad=True)
        z = a * b + a
        nd.backward(z)
        np.testing.assert_allclose(a.grad, 6.0)  # b + 1
        np.testing.assert_allclose(b.grad, 2.0)

    def test_multi_use_equals_sum_of_single_uses(self):
        x = nd.Tensor([1.0, -2.0, 0.5], requires_grad=True)
        y = (x * x).sum() + x.sum() + x.sum()
        nd.backward(y)
        expected = 2 * x.data + 1.0 + 1.0
        np.testing.assert_allclose(x.grad, expected)

    def test_backward_twice_is_an_error(self):
        x = nd.Tensor(1.0, requires_grad=True)
        y = x * x
        nd.backward(y)
        with pytest.raises(RuntimeError):
            nd.backward(y)

    def test_non_scalar_root(self):
        x = nd.Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(nd.ShapeError):
            nd.backward(x * x)

    def test_tape_is_topologically_ordered(self):
        a = nd.Tensor(2.0, requires_grad=True)
        b = nd.Tensor(3.0, requires_grad=True)
        root = (a * b + a) * b
        tape = nd.Tape(root)
        position = {id(n): i for i, n in enumerate(tape.nodes)}
        assert len(position) == len(tape.nodes)  # each node exactly once
        for node in tape:
            for parent in node._parents:
                assert position[id(parent)] < position[id(node)]

    def test_no_grad_blocks_recording(self):
        x = nd.Tensor([1.0, 2.0], requires_grad=True)
        with nd.no_grad():
            y = (x * x).sum()
        assert not y.requires_grad
        assert y._parents == ()

    def test_immutability(self):
        x = nd.Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            x.data[0] = 9.0


class TestGradCheckHarness:
    def test_linear_function_is_exact(self):
        # wider eps keeps cancellation error far below the 1e-10 bar
        err = nd.grad_check(lambda x: nd.scale(x, 3.0).sum(), [rand((4,), 90)], eps=1e-3)
        assert err < 1e-10

    def test_softmax_cross_entropy_composite(self):
        def f(logits):
            return nd.cross_entropy_logits(logits, [1, 3, 0])

        assert nd.grad_check(f, [rand((3, 5), 91)]) < 1e-5

    def test_detects_wrong_backward_rule(self):
        def buggy_double(x):
            def bwd(g):
                nd._acc(x, g * 3.0)  # correct rule would be 2.0

            return nd._from_op(x.data * 2.0, (x,), bwd)

        err = nd.grad_check(lambda x: buggy_double(x).sum(), [rand((4,), 92)])
        assert err > 1e-2

    def test_sampled_coordinates(self):
        err = nd.grad_check(
            lambda x: (x * x).sum(), [rand((40, 40), 93)], max_coords_per_input=25
        )
        assert err < 1e-5

    def test_rejects_float32(self):
        x = nd.Tensor(np.zeros(3, dtype=np.float32))
        with pytest.raises(ValueError, match="float64"):
            nd.grad_check(lambda t: t.sum(), [x])
