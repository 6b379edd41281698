import math

import numpy as np
import pytest

from mtsvae.nn import (
    LINEAR,
    TANH,
    AdamState,
    Layer,
    Mlp,
    NumericalError,
    adam_step,
    finite_diff_grad,
    mlp_backward,
    mlp_forward,
)


def single(W, b, act):
    return Mlp([Layer(np.array(W, float), np.array(b, float), act)])


def random_mlp(rng, max_dim=8, max_layers=3):
    sizes = list(rng.integers(1, max_dim + 1, size=rng.integers(2, max_layers + 2)))
    acts = list(rng.choice([TANH, LINEAR], size=len(sizes) - 1))
    layers = [Layer(rng.uniform(-1, 1, (o, i)), rng.uniform(-1, 1, o), a)
              for i, o, a in zip(sizes[:-1], sizes[1:], acts)]
    return Mlp(layers)


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


class TestForward:
    def test_affine(self):
        out, _ = mlp_forward(single([[2.0]], [1.0], LINEAR), np.array([3.0]))
        np.testing.assert_array_equal(out, [7.0])

    def test_tanh_zero(self):
        out, _ = mlp_forward(single([[1.0]], [0.0], TANH), np.array([0.0]))
        np.testing.assert_array_equal(out, [0.0])

    def test_two_layer(self):
        net = Mlp([Layer(np.array([[1.0], [1.0]]), np.zeros(2), TANH),
                   Layer(np.array([[1.0, 1.0]]), np.zeros(1), LINEAR)])
        out, _ = mlp_forward(net, np.array([1.0]))
        np.testing.assert_allclose(out, [2 * math.tanh(1.0)])
        np.testing.assert_allclose(out, [1.52319], atol=1e-5)

    def test_linear_stack_is_matrix_algebra(self):
        rng = np.random.default_rng(0)
        W1, W2 = rng.standard_normal((5, 3)), rng.standard_normal((2, 5))
        b1, b2 = rng.standard_normal(5), rng.standard_normal(2)
        net = Mlp([Layer(W1, b1, LINEAR), Layer(W2, b2, LINEAR)])
        X = rng.standard_normal((7, 3))
        out, _ = mlp_forward(net, X)
        np.testing.assert_allclose(out, X @ (W2 @ W1).T + W2 @ b1 + b2, atol=1e-12)

    def test_batch_matches_rows(self):
        rng = np.random.default_rng(1)
        net = random_mlp(rng)
        X = rng.standard_normal((4, net.n_in))
        batch, _ = mlp_forward(net, X)
        for i in range(4):
            np.testing.assert_allclose(batch[i], mlp_forward(net, X[i])[0], atol=1e-14)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            mlp_forward(single([[1.0, 2.0]], [0.0], LINEAR), np.array([1.0]))

    def test_layers_must_chain(self):
        with pytest.raises(ValueError):
            Mlp([Layer(np.ones((2, 3)), np.zeros(2)), Layer(np.ones((1, 3)), np.zeros(1))])


class TestBackward:
    def test_linear_chain_rule(self):
        net = single([[2.0]], [1.0], LINEAR)
        _, cache = mlp_forward(net, np.array([3.0]))
        (dW, db), gx = mlp_backward(net, cache, np.array([1.0]))
        np.testing.assert_array_equal(dW, [[3.0]])
        np.testing.assert_array_equal(db, [1.0])
        np.testing.assert_array_equal(gx, [2.0])

    def test_tanh_at_zero(self):
        net = single([[1.0]], [0.0], TANH)
        _, cache = mlp_forward(net, np.array([0.0]))
        (dW, db), gx = mlp_backward(net, cache, np.array([1.0]))
        np.testing.assert_array_equal(dW, [[0.0]])
        np.testing.assert_array_equal(gx, [1.0])

    def test_shape_mismatch(self):
        net = single([[1.0]], [0.0], TANH)
        _, cache = mlp_forward(net, np.array([0.0]))
        with pytest.raises(ValueError):
            mlp_backward(net, cache, np.array([1.0, 2.0]))

    def test_gradient_check_random_nets(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            net = random_mlp(rng)
            X = rng.standard_normal((3, net.n_in))
            T = rng.standard_normal((3, net.n_out))

            def loss(params):
                out, _ = mlp_forward(net.with_parameters(params), X)
                return float(np.mean((out - T) ** 2))

            out, cache = mlp_forward(net, X)
            grads, _ = mlp_backward(net, cache, 2 * (out - T) / out.size)
            fd = finite_diff_grad(loss, net.parameters(), 1e-5)
            for g, f in zip(grads, fd):
                worst = max(worst, rel_err(g, f))
        assert worst < 1e-5

    def test_input_gradient(self):
        rng = np.random.default_rng(3)
        net = random_mlp(rng)
        x = rng.standard_normal(net.n_in)
        w = rng.standard_normal(net.n_out)
        out, cache = mlp_forward(net, x)
        _, gx = mlp_backward(net, cache, w)
        fd = finite_diff_grad(lambda p: float(mlp_forward(net, p[0])[0] @ w), [x])[0]
        assert rel_err(gx, fd) < 1e-6


class TestAdam:
    def test_zero_gradient(self):
        p = [np.array([1.0, -2.0])]
        state = AdamState.zeros_like(p, lr=0.1)
        new, st = adam_step(p, [np.zeros(2)], state, 0.0)
        np.testing.assert_array_equal(new[0], p[0])
        assert st.t == 1

    def test_first_step(self):
        p = [np.array([1.0])]
        new, _ = adam_step(p, [np.array([1.0])], AdamState.zeros_like(p, lr=0.1))
        # bias-corrected m_hat = v_hat = 1 at t = 1
        np.testing.assert_allclose(new[0], [1 - 0.1 / (1 + 1e-8)], rtol=1e-15)
        np.testing.assert_allclose(new[0], [0.9], atol=1e-8)

    def test_pure_decay(self):
        p = [np.array([1.0])]
        new, _ = adam_step(p, [np.array([0.0])], AdamState.zeros_like(p, lr=0.1), weight_decay=0.1)
        np.testing.assert_allclose(new[0], [0.99], rtol=1e-15)

    def test_inputs_untouched_and_order_free(self):
        rng = np.random.default_rng(0)
        p = [rng.standard_normal((2, 3)), rng.standard_normal(4)]
        g = [rng.standard_normal((2, 3)), rng.standard_normal(4)]
        st = AdamState.zeros_like(p, 0.01)
        keep = [a.copy() for a in p]
        a, _ = adam_step(p, g, st, 0.01)
        b, _ = adam_step(p[::-1], g[::-1], AdamState.zeros_like(p[::-1], 0.01), 0.01)
        for x, y in zip(a, b[::-1]):
            np.testing.assert_array_equal(x, y)
        for x, y in zip(p, keep):
            np.testing.assert_array_equal(x, y)

    def test_non_finite_gradient(self):
        p = [np.array([1.0])]
        with pytest.raises(NumericalError):
            adam_step(p, [np.array([np.nan])], AdamState.zeros_like(p))

    def test_moments_nonnegative(self):
        rng = np.random.default_rng(5)
        p = [rng.standard_normal(10)]
        st = AdamState.zeros_like(p, 0.01)
        for _ in range(20):
            p, st = adam_step(p, [rng.standard_normal(10)], st)
        assert np.all(st.v[0] >= 0) and st.t == 20


class TestFiniteDiff:
    def test_quadratic(self):
        g = finite_diff_grad(lambda p: float(p[0][0] ** 2), [np.array([3.0])], 1e-5)
        assert abs(g[0][0] - 6.0) < 1e-8

    def test_tanh(self):
        g = finite_diff_grad(lambda p: float(np.tanh(p[0][0])), [np.array([0.0])], 1e-5)
        assert abs(g[0][0] - 1.0) < 1e-9

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda p: 0.0, [np.zeros(1)], 0.0)
