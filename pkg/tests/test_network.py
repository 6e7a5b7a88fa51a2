"""Network initialisation, passes, SGD stepping and checkpoints."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from costsense.cost_matrix import all_ones_costs
from costsense.errors import NumericError, ParseError, ShapeError, StateError
from costsense.losses import LossKind, backward, forward, one_hot
from costsense.network import (
    ForwardCache,
    Layer,
    Network,
    SgdConfig,
    backward_batch,
    backward_pass,
    forward_batch,
    forward_pass,
    init_network,
    load_checkpoint,
    predict,
    predict_batch,
    save_checkpoint,
    sgd_step,
)


def affine_net(weights, bias):
    return Network((Layer(np.asarray(weights, dtype=float),
                          np.asarray(bias, dtype=float), "identity"),))


class TestInit:
    def test_deterministic_in_seed(self):
        a = init_network((3, 8, 4), seed=5)
        b = init_network((3, 8, 4), seed=5)
        for la, lb in zip(a.layers, b.layers):
            assert_array_equal(la.weights, lb.weights)
        c = init_network((3, 8, 4), seed=6)
        assert not np.array_equal(a.layers[0].weights, c.layers[0].weights)

    def test_weights_within_scaled_uniform_bound(self):
        net = init_network((100, 100), seed=0)
        limit = np.sqrt(6.0 / 200.0)
        w = net.layers[0].weights
        assert np.all(np.abs(w) <= limit)
        # mean of 10000 draws should sit within 3 standard errors of 0
        se = limit / np.sqrt(3.0 * w.size)
        assert abs(w.mean()) < 3.0 * se

    def test_biases_start_at_zero(self):
        net = init_network((4, 7, 3), seed=1)
        for layer in net.layers:
            assert_array_equal(layer.bias, np.zeros_like(layer.bias))

    def test_hidden_relu_final_identity(self):
        net = init_network((2, 5, 5, 3), seed=2)
        assert [l.activation for l in net.layers] == ["relu", "relu", "identity"]

    def test_bad_dims_rejected(self):
        with pytest.raises(ShapeError):
            init_network((4,), seed=0)
        with pytest.raises(ShapeError):
            init_network((4, 0, 2), seed=0)


class TestForward:
    def test_single_layer_is_affine(self):
        net = affine_net([[1.0, 2.0], [0.0, -1.0]], [0.5, 0.0])
        out, feats, _ = forward_pass(net, np.array([3.0, 1.0]))
        assert_allclose(out, [5.5, -1.0])
        assert_array_equal(feats, [3.0, 1.0])

    def test_relu_hidden_layer_clamps_negatives(self):
        hidden = Layer(np.array([[1.0], [-1.0]]), np.zeros(2), "relu")
        final = Layer(np.array([[1.0, 1.0]]), np.zeros(1), "identity")
        net = Network((hidden, final))
        out, feats, _ = forward_pass(net, np.array([2.0]))
        assert_array_equal(feats, [2.0, 0.0])
        assert_allclose(out, [2.0])
        out_neg, feats_neg, _ = forward_pass(net, np.array([-3.0]))
        assert_array_equal(feats_neg, [0.0, 3.0])
        assert_allclose(out_neg, [3.0])

    def test_batch_rows_match_single_passes(self):
        # matrix-matrix and matrix-vector BLAS kernels may sum in a
        # different order, so agreement is to rounding, not bitwise
        rng = np.random.default_rng(3)
        net = init_network((4, 6, 3), seed=9)
        x = rng.normal(size=(10, 4))
        outs, feats, _ = forward_batch(net, x)
        for i in range(10):
            out_i, feat_i, _ = forward_pass(net, x[i])
            assert_allclose(outs[i], out_i, rtol=1e-13, atol=1e-14)
            assert_allclose(feats[i], feat_i, rtol=1e-13, atol=1e-14)

    def test_input_shape_mismatch_rejected(self):
        net = init_network((4, 3), seed=0)
        with pytest.raises(ShapeError):
            forward_pass(net, np.zeros(5))
        with pytest.raises(ShapeError):
            forward_batch(net, np.zeros((2, 5)))


class TestBackward:
    def test_matches_central_differences_end_to_end(self):
        """Loss-through-network gradients agree with finite differences."""
        rng = np.random.default_rng(17)
        h = 1e-5
        net = init_network((3, 6, 4), seed=40)
        costs = all_ones_costs(4)
        x = rng.uniform(-2.0, 2.0, size=3)
        d = one_hot(2, 4)

        def loss_of(candidate):
            out, _, _ = forward_pass(candidate, x)
            return forward(LossKind.CROSS_ENTROPY, costs, d, out).value

        out, _, cache = forward_pass(net, x)
        grads = backward_pass(
            net, cache, backward(LossKind.CROSS_ENTROPY, costs, d, out))
        for li, layer in enumerate(net.layers):
            for idx in np.ndindex(layer.weights.shape):
                bumped = layer.weights.copy()
                bumped[idx] += h
                plus = loss_of(_swap_weights(net, li, bumped))
                bumped[idx] -= 2.0 * h
                minus = loss_of(_swap_weights(net, li, bumped))
                fd = (plus - minus) / (2.0 * h)
                got = grads[li][0][idx]
                assert abs(fd - got) / max(abs(fd), abs(got), 1e-4) < 1e-5

    def test_batch_gradients_are_means_of_per_sample_gradients(self):
        rng = np.random.default_rng(19)
        net = init_network((3, 5, 2), seed=8)
        x = rng.normal(size=(6, 3))
        g = rng.normal(size=(6, 2))
        _, _, cache = forward_batch(net, x)
        batch_grads = backward_batch(net, cache, g)
        accum = [(np.zeros_like(l.weights), np.zeros_like(l.bias))
                 for l in net.layers]
        for i in range(6):
            _, _, c1 = forward_pass(net, x[i])
            for li, (dw, db) in enumerate(backward_pass(net, c1, g[i])):
                accum[li] = (accum[li][0] + dw / 6.0, accum[li][1] + db / 6.0)
        for (bw, bb), (aw, ab) in zip(batch_grads, accum):
            assert_allclose(bw, aw, atol=1e-14)
            assert_allclose(bb, ab, atol=1e-14)

    def test_relu_blocks_gradient_at_dead_units(self):
        hidden = Layer(np.array([[1.0]]), np.array([-5.0]), "relu")
        final = Layer(np.array([[2.0]]), np.zeros(1), "identity")
        net = Network((hidden, final))
        _, _, cache = forward_pass(net, np.array([1.0]))  # preact -4 < 0
        grads = backward_pass(net, cache, np.array([1.0]))
        assert_array_equal(grads[0][0], [[0.0]])
        assert_array_equal(grads[0][1], [0.0])

    def test_cache_from_other_network_rejected(self):
        net_a = init_network((3, 4, 2), seed=0)
        net_b = init_network((3, 5, 2), seed=0)
        _, _, cache = forward_pass(net_a, np.zeros(3))
        with pytest.raises(StateError):
            backward_pass(net_b, cache, np.zeros(2))

    def test_single_sample_cache_rejected_by_batch_backward(self):
        net = init_network((3, 2), seed=0)
        _, _, cache = forward_pass(net, np.zeros(3))
        with pytest.raises(StateError):
            backward_batch(net, cache, np.zeros((1, 2)))


class TestSgdStep:
    def test_applies_learning_rate_exactly(self):
        net = affine_net([[2.0]], [1.0])
        cfg = SgdConfig(learning_rate=0.25, batch_size=1, epochs=1, seed=0)
        stepped = sgd_step(net, [(np.array([[4.0]]), np.array([-2.0]))], cfg)
        assert_array_equal(stepped.layers[0].weights, [[1.0]])
        assert_array_equal(stepped.layers[0].bias, [1.5])
        # the original network is untouched
        assert_array_equal(net.layers[0].weights, [[2.0]])

    def test_descends_a_quadratic(self):
        # minimise (w - 3)^2 / 2 by feeding its gradient by hand
        net = affine_net([[10.0]], [0.0])
        cfg = SgdConfig(learning_rate=0.5, batch_size=1, epochs=1, seed=0)
        values = []
        for _ in range(40):
            w = net.layers[0].weights[0, 0]
            values.append(0.5 * (w - 3.0) ** 2)
            net = sgd_step(net, [(np.array([[w - 3.0]]), np.zeros(1))], cfg)
        assert values == sorted(values, reverse=True)
        assert net.layers[0].weights[0, 0] == pytest.approx(3.0, abs=1e-9)

    def test_non_finite_gradient_rejected(self):
        net = affine_net([[1.0]], [0.0])
        cfg = SgdConfig(learning_rate=0.1, batch_size=1, epochs=1, seed=0)
        with pytest.raises(NumericError):
            sgd_step(net, [(np.array([[np.nan]]), np.zeros(1))], cfg)


class TestPredict:
    def test_argmax_of_outputs(self):
        net = affine_net(np.zeros((3, 2)), [0.1, 0.9, 0.3])
        assert predict(net, np.zeros(2)) == 1
        assert_array_equal(predict_batch(net, np.zeros((4, 2))), [1, 1, 1, 1])

    def test_ties_resolve_to_lowest_index(self):
        net = affine_net(np.zeros((3, 2)), [0.5, 0.5, 0.2])
        assert predict(net, np.ones(2)) == 0


class TestCheckpoint:
    def test_round_trip_preserves_everything(self, tmp_path):
        net = init_network((3, 7, 4), seed=123)
        costs = np.full((4, 4), 0.5) + np.eye(4) * 0.5
        path = tmp_path / "ckpt.json"
        save_checkpoint(net, costs, path)
        loaded, loaded_costs = load_checkpoint(path)
        assert loaded.dims == net.dims
        for la, lb in zip(net.layers, loaded.layers):
            assert_array_equal(la.weights, lb.weights)
            assert_array_equal(la.bias, lb.bias)
            assert la.activation == lb.activation
        assert_array_equal(loaded_costs, costs)

    def test_saving_twice_is_byte_identical(self, tmp_path):
        net = init_network((2, 3), seed=9)
        costs = np.ones((3, 3))
        save_checkpoint(net, costs, tmp_path / "a.json")
        save_checkpoint(net, costs, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_wrong_format_marker_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else", "version": 1}')
        with pytest.raises(ParseError):
            load_checkpoint(path)

    def test_unsupported_version_rejected(self, tmp_path):
        net = init_network((2, 2), seed=0)
        path = tmp_path / "v2.json"
        save_checkpoint(net, np.ones((2, 2)), path)
        text = path.read_text().replace('"version": 1', '"version": 2')
        path.write_text(text)
        with pytest.raises(ParseError):
            load_checkpoint(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("not json at all")
        with pytest.raises(ParseError):
            load_checkpoint(path)


def _swap_weights(net: Network, layer_index: int, weights: np.ndarray) -> Network:
    layers = list(net.layers)
    old = layers[layer_index]
    layers[layer_index] = Layer(weights, old.bias, old.activation)
    return Network(tuple(layers))
