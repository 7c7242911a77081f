import numpy as np
import pytest

from emoser.nn import (Adam, Conv2D, Dense, Dropout, Flatten, InvalidRate,
                       LabelOutOfRange, MaxPool2D, Parameter, ReLU, SGD,
                       SeededRng, ShapeMismatch, Softmax, softmax_xent)


def naive_conv(x, w, b):
    """Six nested loops, straight from the definition."""
    h, wd, c = x.shape
    kh, kw, _, f = w.shape
    out = np.zeros((h - kh + 1, wd - kw + 1, f))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            for k in range(f):
                acc = b[k]
                for a in range(kh):
                    for bb in range(kw):
                        for ch in range(c):
                            acc += x[i + a, j + bb, ch] * w[a, bb, ch, k]
                out[i, j, k] = acc
    return out


class TestSeededRng:
    def test_same_seed_same_stream(self):
        a = SeededRng(123).next_u64(16)
        b = SeededRng(123).next_u64(16)
        assert np.array_equal(a, b)

    def test_uniform_in_unit_interval(self):
        u = SeededRng(7).uniform(10000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.02

    def test_normal_moments(self):
        z = SeededRng(9).normal(100000)
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02

    def test_shuffle_is_permutation(self):
        items = list(range(100))
        rng = SeededRng(4)
        shuffled = items.copy()
        rng.shuffle(shuffled)
        assert sorted(shuffled) == items
        assert shuffled != items


class TestConv2D:
    def test_all_ones_sums(self):
        rng = SeededRng(0)
        layer = Conv2D(2, 2, 1, 1, rng)
        layer.weight.value[...] = 1.0
        layer.bias.value[...] = 0.0
        out = layer.forward(np.ones((3, 3, 1), dtype=np.float32))
        assert out.shape == (2, 2, 1)
        assert np.all(out == 4.0)

    def test_identity_kernel(self):
        layer = Conv2D(1, 1, 1, 1, SeededRng(0))
        layer.weight.value[...] = 1.0
        layer.bias.value[...] = 0.0
        x = np.random.default_rng(1).standard_normal((4, 5, 1)).astype(np.float32)
        assert np.allclose(layer.forward(x), x)

    def test_matches_naive_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 5, 2))
        layer = Conv2D(3, 3, 2, 3, SeededRng(5), dtype=np.float64)
        out = layer.forward(x)
        expected = naive_conv(x, layer.weight.value, layer.bias.value)
        assert np.max(np.abs(out - expected)) < 1e-6

    def test_channel_mismatch(self):
        layer = Conv2D(2, 2, 3, 4, SeededRng(0))
        with pytest.raises(ShapeMismatch):
            layer.forward(np.zeros((5, 5, 2), dtype=np.float32))

    def test_kernel_larger_than_input(self):
        layer = Conv2D(3, 3, 1, 1, SeededRng(0))
        with pytest.raises(ShapeMismatch):
            layer.forward(np.zeros((2, 2, 1), dtype=np.float32))


class TestReLU:
    def test_basic(self):
        out = ReLU().forward(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(out, [0.0, 0.0, 2.0])

    def test_all_negative_zero_gradient(self):
        layer = ReLU()
        layer.forward(-np.ones((3, 3)))
        grad = layer.backward(np.ones((3, 3)))
        assert np.all(grad == 0.0)

    def test_subgradient_zero_at_zero(self):
        layer = ReLU()
        layer.forward(np.zeros(4))
        assert np.all(layer.backward(np.ones(4)) == 0.0)


class TestMaxPool2D:
    def test_simple_window(self):
        out = MaxPool2D().forward(np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None])
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 4.0

    def test_tie_breaks_to_first_in_row_major(self):
        layer = MaxPool2D()
        out = layer.forward(np.full((2, 2, 1), 7.0))
        assert out[0, 0, 0] == 7.0
        grad = layer.backward(np.ones((1, 1, 1)))
        assert grad[0, 0, 0] == 1.0  # top-left gets the gradient
        assert grad[0, 1, 0] == 0.0 and grad[1, 0, 0] == 0.0 and grad[1, 1, 0] == 0.0

    def test_matches_brute_force_windows(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((8, 8, 3))
        out = MaxPool2D().forward(x)
        for i in range(4):
            for j in range(4):
                for c in range(3):
                    assert out[i, j, c] == x[2 * i : 2 * i + 2, 2 * j : 2 * j + 2, c].max()

    def test_odd_trailing_dropped(self):
        x = np.random.default_rng(4).standard_normal((7, 9, 2))
        assert MaxPool2D().forward(x).shape == (3, 4, 2)

    def test_too_small(self):
        with pytest.raises(ShapeMismatch):
            MaxPool2D().forward(np.zeros((1, 5, 1)))


class TestDropout:
    def test_rate_zero_identity(self):
        x = np.random.default_rng(0).standard_normal((4, 4))
        layer = Dropout(0.0)
        assert np.array_equal(layer.forward(x, train=True, rng=SeededRng(1)), x)
        assert np.array_equal(layer.forward(x, train=False), x)

    def test_eval_mode_identity(self):
        x = np.random.default_rng(1).standard_normal((10, 10))
        assert np.array_equal(Dropout(0.5).forward(x, train=False), x)

    def test_inverted_scaling_preserves_expectation(self):
        # Monte Carlo: mean over many masks of a ones-tensor stays near 1
        rng = SeededRng(2)
        layer = Dropout(0.25)
        x = np.ones(10000)
        total = np.zeros_like(x)
        trials = 200
        for _ in range(trials):
            total += layer.forward(x, train=True, rng=rng)
        mean = total.mean() / trials
        assert 0.98 < mean < 1.02

    def test_backward_applies_same_mask(self):
        rng = SeededRng(3)
        layer = Dropout(0.5)
        out = layer.forward(np.ones(1000), train=True, rng=rng)
        grad = layer.backward(np.ones(1000))
        assert np.array_equal(grad == 0.0, out == 0.0)

    def test_invalid_rate(self):
        with pytest.raises(InvalidRate):
            Dropout(1.0)


class TestFlattenDense:
    def test_flatten_row_major(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None]
        assert np.array_equal(Flatten().forward(x), [1.0, 2.0, 3.0, 4.0])

    def test_flatten_already_flat(self):
        x = np.arange(5.0)
        assert np.array_equal(Flatten().forward(x), x)

    def test_flatten_backward_restores_shape(self):
        layer = Flatten()
        x = np.random.default_rng(0).standard_normal((2, 3, 4, 5))
        out = layer.forward(x)
        back = layer.backward(out)
        assert back.tobytes() == x.tobytes()

    def test_dense_identity(self):
        layer = Dense(3, 3, SeededRng(0))
        layer.weight.value[...] = np.eye(3, dtype=np.float32)
        layer.bias.value[...] = 0.0
        x = np.array([1.0, -2.0, 3.0], dtype=np.float32)
        assert np.allclose(layer.forward(x), x)

    def test_dense_scalar_affine(self):
        layer = Dense(1, 1, SeededRng(0))
        layer.weight.value[...] = 2.0
        layer.bias.value[...] = 3.0
        assert layer.forward(np.array([5.0], dtype=np.float32))[0] == 13.0

    def test_dense_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Dense(4, 2, SeededRng(0)).forward(np.zeros(5, dtype=np.float32))


class TestSoftmaxXent:
    def test_uniform_logits(self):
        probs, loss, _ = softmax_xent(np.zeros(8), 3)
        assert np.allclose(probs, 0.125)
        assert loss == pytest.approx(np.log(8), abs=1e-6)

    def test_extreme_logits_stable(self):
        probs, loss, grad = softmax_xent(np.array([1000.0, 0.0]), 0)
        assert np.all(np.isfinite(probs)) and np.isfinite(loss) and np.all(np.isfinite(grad))
        assert probs[0] == pytest.approx(1.0)
        assert probs[1] == pytest.approx(0.0)

    def test_gradient_is_probs_minus_onehot(self):
        z = np.random.default_rng(5).standard_normal(8)
        probs, _, grad = softmax_xent(z, 2)
        expected = probs.copy()
        expected[2] -= 1.0
        assert np.allclose(grad, expected)

    def test_probs_sum_to_one_for_arbitrary_logits(self):
        rng = np.random.default_rng(6)
        for scale in (1.0, 100.0, 1e4):
            z = rng.standard_normal(8) * scale
            probs, _, _ = softmax_xent(z, 0)
            assert abs(probs.sum() - 1.0) < 1e-5
            assert np.all(probs >= 0.0) and np.all(probs <= 1.0)

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            softmax_xent(np.zeros(8), 8)

    def test_softmax_layer_matches(self):
        z = np.random.default_rng(7).standard_normal((3, 8))
        probs = Softmax().forward(z)
        expected, _, _ = softmax_xent(z, np.zeros(3, dtype=int))
        assert np.allclose(probs, expected)


class TestOptimizers:
    def test_sgd_single_step(self):
        p = Parameter(np.array([1.0], dtype=np.float32))
        p.grad[...] = 1.0
        SGD(lr=0.1).step([p])
        assert p.value[0] == pytest.approx(0.9)

    def test_adam_first_step_magnitude(self):
        for g in (0.5, -3.0, 100.0):
            p = Parameter(np.array([1.0], dtype=np.float32))
            p.grad[...] = g
            Adam(lr=1e-3).step([p])
            assert abs(p.value[0] - 1.0) == pytest.approx(1e-3, rel=1e-3)

    def test_adam_deterministic_across_runs(self):
        def run():
            rng = SeededRng(11)
            layer = Dense(6, 4, rng)
            opt = Adam(lr=1e-3)
            x = (rng.normal(18).reshape(3, 6)).astype(np.float32)
            for _ in range(5):
                out = layer.forward(x)
                layer.weight.grad[...] = 0
                layer.bias.grad[...] = 0
                layer.backward(np.ones_like(out))
                opt.step([layer.weight, layer.bias])
            return layer.weight.value.tobytes()

        assert run() == run()


class TestInit:
    def test_biases_zero(self):
        layer = Conv2D(3, 3, 2, 5, SeededRng(0))
        assert np.all(layer.bias.value == 0.0)
        dense = Dense(10, 3, SeededRng(0))
        assert np.all(dense.bias.value == 0.0)

    def test_he_std(self):
        layer = Dense(100, 1000, SeededRng(13))  # 1e5 draws
        std = layer.weight.value.std()
        target = np.sqrt(2.0 / 100)
        assert abs(std - target) / target < 0.05

    def test_same_seed_identical_weights(self):
        a = Dense(20, 20, SeededRng(21)).weight.value
        b = Dense(20, 20, SeededRng(21)).weight.value
        assert a.tobytes() == b.tobytes()


class TestNoNanPropagation:
    @pytest.mark.parametrize("scale", [1.0, 1e4, -1e4])
    def test_stack_finite_on_extreme_inputs(self, scale):
        rng = SeededRng(1)
        layers = [Conv2D(2, 2, 1, 4, rng), ReLU(), MaxPool2D(), Flatten(),
                  Dense(4 * 7 * 7, 8, rng)]
        x = np.full((15, 15, 1), scale, dtype=np.float32)
        out = x
        for layer in layers:
            out = layer.forward(out)
        assert np.all(np.isfinite(out))
        probs, loss, grad = softmax_xent(out.astype(np.float64), 0)
        assert np.all(np.isfinite(probs)) and np.isfinite(loss)


class TestShapeAlgebra:
    @pytest.mark.parametrize("h,w", [(8, 8), (10, 13), (64, 64), (33, 47)])
    def test_conv_pool_output_shapes(self, h, w):
        rng = SeededRng(2)
        x = rng.normal(h * w).reshape(h, w, 1).astype(np.float32)
        conv = Conv2D(2, 2, 1, 3, rng)
        out = conv.forward(x)
        assert out.shape == (h - 1, w - 1, 3)
        pooled = MaxPool2D().forward(out)
        assert pooled.shape == ((h - 1) // 2, (w - 1) // 2, 3)
