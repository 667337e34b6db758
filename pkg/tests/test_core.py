import math

import numpy as np
import pytest

from avfuse.core.numeric import argmax, finite_diff_grad, log_softmax, relative_error, softmax
from avfuse.core.rng import make_rng, uniform_init
from avfuse.exceptions import InvalidArgumentError, NumericFailureError
from avfuse.utils.hashing import derive_seed, file_digest


class TestSoftmax:
    def test_symmetric(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)

    def test_closed_form(self):
        np.testing.assert_allclose(softmax([math.log(2), 0.0]), [2 / 3, 1 / 3], atol=1e-12)

    def test_saturation_does_not_overflow(self):
        np.testing.assert_allclose(softmax([1000.0, 0.0]), [1.0, 0.0], atol=1e-12)

    def test_probability_vector_for_large_inputs(self, rng):
        for _ in range(200):
            v = rng.uniform(-1e6, 1e6, size=int(rng.integers(1, 20)))
            p = softmax(v)
            assert np.all(p >= 0)
            assert abs(p.sum() - 1.0) < 1e-9

    def test_shift_invariance(self, rng):
        v = rng.standard_normal(7)
        for c in (-50.0, 3.5, 1e3):
            np.testing.assert_allclose(softmax(v + c), softmax(v), atol=1e-12)

    def test_order_preserving(self, rng):
        v = rng.standard_normal(10)
        assert list(np.argsort(v)) == list(np.argsort(softmax(v)))

    def test_rows_of_a_matrix(self, rng):
        m = rng.standard_normal((5, 4))
        np.testing.assert_allclose(softmax(m)[2], softmax(m[2]))

    def test_log_softmax_matches(self, rng):
        v = rng.standard_normal(6)
        np.testing.assert_allclose(log_softmax(v), np.log(softmax(v)), atol=1e-12)

    @pytest.mark.parametrize("bad", [[], [0.0, np.nan], [np.inf, 1.0]])
    def test_rejects_empty_and_non_finite(self, bad):
        with pytest.raises(InvalidArgumentError):
            softmax(bad)


class TestArgmax:
    @pytest.mark.parametrize("v, expected", [([1, 3, 2], 1), ([2, 2], 0), ([-5], 0)])
    def test_examples(self, v, expected):
        assert argmax(v) == expected

    def test_invariant_under_monotone_transform(self, rng):
        v = rng.standard_normal(12)
        assert argmax(v) == argmax(np.exp(v)) == argmax(3 * v + 1)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            argmax([])


class TestFiniteDiff:
    def test_square(self):
        grad = finite_diff_grad(lambda x: float(x[0] ** 2), [3.0], eps=1e-5)
        assert abs(grad[0] - 6.0) < 1e-6

    def test_constant(self, rng):
        grad = finite_diff_grad(lambda x: 4.2, rng.standard_normal(5))
        np.testing.assert_allclose(grad, 0.0, atol=1e-9)

    def test_non_finite_evaluation(self):
        with pytest.raises(NumericFailureError):
            finite_diff_grad(lambda x: float("nan"), [1.0])

    def test_eps_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            finite_diff_grad(lambda x: 0.0, [1.0], eps=0.0)

    def test_does_not_mutate_input(self):
        x = np.array([1.0, 2.0])
        finite_diff_grad(lambda v: float(v @ v), x)
        np.testing.assert_array_equal(x, [1.0, 2.0])


class TestRelativeError:
    def test_identical(self):
        assert relative_error([1.0, -2.0], [1.0, -2.0]) == 0.0

    def test_scaled_by_largest_magnitude(self):
        assert relative_error([1.0, 10.0], [1.0, 9.0]) == pytest.approx(0.1)

    def test_floor_for_zero_gradients(self):
        assert relative_error([0.0], [1e-12]) == pytest.approx(1e-4)


class TestRng:
    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(make_rng(7).random(100), make_rng(7).random(100))

    def test_different_seeds_differ(self):
        assert not np.array_equal(make_rng(7).random(10), make_rng(8).random(10))

    def test_uniform_moments(self):
        draws = make_rng(99).random(100_000)
        assert abs(draws.mean() - 0.5) < 0.01
        assert abs(draws.var() - 1 / 12) < 0.005

    def test_normal_moments(self):
        draws = make_rng(99).standard_normal(100_000)
        assert abs(draws.mean()) < 0.02
        assert abs(draws.var() - 1.0) < 0.02

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(InvalidArgumentError):
            make_rng(seed)

    def test_uniform_init_bounds(self):
        w = uniform_init(make_rng(0), 16, (16, 8))
        assert np.all(np.abs(w) <= 0.25)


class TestHashing:
    def test_derive_seed_is_stable_and_key_sensitive(self):
        assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
        assert derive_seed(1, "a") != derive_seed(1, "b")
        assert 0 <= derive_seed(0) < 2**64

    def test_file_digest(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.write_bytes(b"abc")
        b.write_bytes(b"abc")
        assert file_digest(a) == file_digest(b)
