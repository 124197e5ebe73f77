"""Tensor engine: forward values, adjoints, gradient checks, Adam."""

import math

import numpy as np
import pytest

from licap import autodiff as ad
from licap.errors import TrainingDiverged


class TestMatmul:
    def test_identity(self):
        x = np.arange(4.0).reshape(2, 2)
        out = ad.matmul(ad.tensor(np.eye(2)), ad.tensor(x))
        assert np.array_equal(out.values, x)

    def test_hand_product(self):
        a = ad.tensor([[1.0, 2.0], [3.0, 4.0]])
        b = ad.tensor([[5.0], [6.0]])
        assert ad.matmul(a, b).values.tolist() == [[17.0], [39.0]]

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            ad.matmul(ad.tensor(np.zeros((2, 3))), ad.tensor(np.zeros((2, 2))))

    def test_adjoints(self):
        rng = np.random.default_rng(0)
        a = ad.tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = ad.tensor(rng.normal(size=(4, 2)), requires_grad=True)
        err = ad.grad_check(lambda a, b: ad.tsum(ad.matmul(a, b)), [a, b])
        assert err < 1e-9


class TestSegmentSoftmax:
    def test_singleton_segment(self):
        out = ad.segment_softmax(ad.tensor([2.5]), [0])
        assert out.values.tolist() == [1.0]

    def test_equal_logits_uniform(self):
        out = ad.segment_softmax(ad.tensor([1.0, 1.0, 1.0, 5.0]), [0, 0, 0, 1])
        assert np.allclose(out.values, [1 / 3, 1 / 3, 1 / 3, 1.0])

    def test_hand_softmax(self):
        out = ad.segment_softmax(ad.tensor([0.0, math.log(3.0)]), [0, 0])
        assert out.values == pytest.approx([0.25, 0.75], abs=1e-15)

    def test_sums_to_one_per_segment(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=40) * 10
        segments = rng.integers(0, 7, size=40)
        segments[:7] = np.arange(7)  # every segment occupied
        out = ad.segment_softmax(ad.tensor(logits), segments).values
        for s in range(7):
            assert abs(out[segments == s].sum() - 1.0) <= 1e-12

    def test_shift_invariance_within_segment(self):
        rng = np.random.default_rng(2)
        logits = rng.normal(size=12)
        segments = np.array([0] * 5 + [1] * 7)
        base = ad.segment_softmax(ad.tensor(logits), segments).values
        shifted = logits.copy()
        shifted[segments == 0] += 37.5
        out = ad.segment_softmax(ad.tensor(shifted), segments).values
        assert np.allclose(out, base, atol=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        x = ad.tensor(rng.normal(size=9), requires_grad=True)
        segments = np.array([0, 0, 0, 1, 1, 2, 2, 2, 2])
        weights = rng.normal(size=9)

        def f(x):
            return ad.tsum(ad.mul(ad.segment_softmax(x, segments), ad.tensor(weights)))

        assert ad.grad_check(f, x) < 1e-7


class TestLeakyRelu:
    def test_values_and_zero_convention(self):
        out = ad.leaky_relu(ad.tensor([2.0, -1.0, 0.0]), 0.2)
        assert out.values.tolist() == [2.0, -0.2, 0.0]

    def test_gradient_at_zero_is_slope(self):
        x = ad.tensor([0.0], requires_grad=True)
        ad.backward(ad.tsum(ad.leaky_relu(x, 0.2)))
        assert x.grad.tolist() == [0.2]

    def test_slope_validated(self):
        for slope in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                ad.leaky_relu(ad.tensor([1.0]), slope)


class TestElementwiseSuite:
    def test_dot_orthogonal(self):
        assert ad.dot(ad.tensor([1.0, 0.0]), ad.tensor([0.0, 1.0])).item() == 0.0

    def test_log_exp_inverse(self):
        assert ad.tlog(ad.texp(ad.tensor(1.5))).item() == pytest.approx(1.5, abs=1e-15)

    def test_mean_rows(self):
        out = ad.mean_rows(ad.tensor([[2.0, 4.0], [4.0, 8.0]]))
        assert out.values.tolist() == [3.0, 6.0]

    def test_concat_backward_splits(self):
        a = ad.tensor(np.ones((2, 2)), requires_grad=True)
        b = ad.tensor(np.ones((2, 3)), requires_grad=True)
        out = ad.concat_cols([a, b])
        assert out.values.shape == (2, 5)
        ad.backward(ad.tsum(out))
        assert np.array_equal(a.grad, np.ones((2, 2)))
        assert np.array_equal(b.grad, np.ones((2, 3)))

    def test_shape_mismatch_errors(self):
        with pytest.raises(ValueError):
            ad.add(ad.tensor([1.0]), ad.tensor([1.0, 2.0]))

    def test_row_logsumexp_stability(self):
        out = ad.row_logsumexp(ad.tensor([[1000.0, 1000.0]]))
        assert out.values[0] == pytest.approx(1000.0 + math.log(2.0))

    def test_gather_scatter_roundtrip(self):
        x = ad.tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        out = ad.gather_rows(x, [2, 0, 2])
        ad.backward(ad.tsum(out))
        assert np.array_equal(x.grad, np.array([[1.0, 1], [0, 0], [2, 2]]))


class TestBackward:
    def test_quadratic(self):
        x = ad.tensor([3.0], requires_grad=True)
        ad.backward(ad.dot(x, x))
        assert x.grad.tolist() == [6.0]

    def test_linear_adjoint(self):
        a = ad.tensor([[1.0, 2.0]])
        x = ad.tensor([5.0, 7.0], requires_grad=True)
        ad.backward(ad.tsum(ad.matvec(a, x)))
        assert x.grad.tolist() == [1.0, 2.0]

    def test_unused_leaf_reads_zero_grad(self):
        x = ad.tensor([1.0], requires_grad=True)
        y = ad.tensor([1.0], requires_grad=True)
        ad.backward(ad.dot(x, x))
        assert y.grad.tolist() == [0.0]

    def test_non_scalar_root_rejected(self):
        x = ad.tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ValueError):
            ad.backward(ad.scale(x, 2.0))

    def test_repeated_backward_accumulates(self):
        x = ad.tensor([3.0], requires_grad=True)
        loss = ad.dot(x, x)
        ad.backward(loss)
        ad.backward(loss)
        assert x.grad.tolist() == [12.0]
        x.zero_grad()
        ad.backward(loss)
        assert x.grad.tolist() == [6.0]

    def test_fanout_sums_contributions(self):
        # z = x*x + x: same leaf feeds two consumers
        x = ad.tensor([2.0], requires_grad=True)

        def f(x):
            return ad.tsum(ad.add(ad.mul(x, x), x))

        ad.backward(f(x))
        assert x.grad.tolist() == [5.0]
        assert ad.grad_check(f, x) < 1e-9


class TestGradCheck:
    def test_sum_of_squares(self):
        x = ad.tensor(np.linspace(-2, 2, 7), requires_grad=True)
        err = ad.grad_check(lambda x: ad.dot(x, x), x, eps=1e-6)
        assert err < 1e-7

    def test_linear_function(self):
        w = np.array([1.5, -2.0, 0.5])
        x = ad.tensor([0.3, 0.7, -0.2], requires_grad=True)
        err = ad.grad_check(lambda x: ad.dot(x, ad.tensor(w)), x, eps=1e-6)
        assert err < 1e-9

    def test_constant_function(self):
        x = ad.tensor([1.0, 2.0], requires_grad=True)
        err = ad.grad_check(lambda x: ad.scale(ad.tsum(ad.mul_const(x, 0.0)), 1.0), x)
        assert err == 0.0


class TestAdam:
    def test_first_step_magnitude_is_learning_rate(self):
        p = ad.tensor([10.0, -4.0], requires_grad=True)
        opt = ad.Adam([p], learning_rate=0.05)
        ad.backward(ad.dot(p, ad.tensor([1.0, -1.0])))
        before = p.values.copy()
        opt.step()
        assert np.allclose(np.abs(p.values - before), 0.05, atol=1e-6)

    def test_zero_grad_leaves_params_unchanged(self):
        p = ad.tensor([1.0, 2.0], requires_grad=True)
        opt = ad.Adam([p])
        for _ in range(5):
            opt.step()
        assert p.values.tolist() == [1.0, 2.0]

    def test_deterministic_trajectories(self):
        def run():
            p = ad.tensor([4.0], requires_grad=True)
            opt = ad.Adam([p], learning_rate=0.1)
            for _ in range(25):
                opt.zero_grad()
                ad.backward(ad.dot(p, p))
                opt.step()
            return p.values.copy()

        assert np.array_equal(run(), run())

    def test_nan_gradient_aborts(self):
        p = ad.tensor([1.0], requires_grad=True)
        opt = ad.Adam([p])
        p._grad = np.array([np.nan])
        with pytest.raises(TrainingDiverged):
            opt.step()


class TestCompositeGradients:
    """Randomized gradient checks over the op suite in combination."""

    def test_random_composites(self):
        rng = np.random.default_rng(7)
        segments = np.array([0, 0, 1, 1, 1, 2])
        for trial in range(20):
            x = ad.tensor(rng.normal(size=(6, 3)), requires_grad=True)
            v = ad.tensor(rng.normal(size=3), requires_grad=True)

            def f(x, v):
                logits = ad.leaky_relu(ad.matvec(x, v), 0.2)
                alpha = ad.segment_softmax(logits, segments)
                mixed = ad.scale_rows(x, alpha)
                pooled = ad.segment_sum(mixed, segments, 3)
                lse = ad.row_logsumexp(pooled)
                proto = ad.mean_rows(ad.gather_rows(x, [0, 2, 4]))
                return ad.add(ad.tsum(lse), ad.dot(proto, v))

            assert ad.grad_check(f, [x, v], eps=1e-6) < 1e-4
