import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aweq.errors import EmptyInputError, InvalidInputError, ShapeError
from aweq.tensor import ChannelStats, accumulate_stats, as_matrix, channel_stats, matmul, tensor_range


def naive_matmul(a, b):
    n, m = a.shape
    p = b.shape[1]
    out = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(m):
                acc += float(a[i, k]) * float(b[k, j])
            out[i, j] = acc
    return out


def scan_stats(t):
    """Column-by-column scan, independent of numpy reductions."""
    rows, cols = t.shape
    lo, hi, mean = [], [], []
    for j in range(cols):
        col = [float(t[i, j]) for i in range(rows)]
        lo.append(min(col))
        hi.append(max(col))
        mean.append(sum(col) / rows)
    return np.array(lo), np.array(hi), np.array(mean)


class TestMatmul:
    def test_identity(self, rng):
        b = rng.standard_normal((2, 3))
        np.testing.assert_array_equal(matmul(np.eye(2), b), b)

    def test_hand_product(self):
        np.testing.assert_array_equal(matmul([[1, 2]], [[3], [4]]), [[11]])

    def test_against_naive_loop(self, rng):
        a = rng.standard_normal((64, 64))
        b = rng.standard_normal((64, 64))
        assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) <= 1e-10

    def test_random_shapes(self, rng):
        for _ in range(100):
            n, m, p = rng.integers(1, 65, size=3)
            if n * m * p > 20_000:
                n = min(n, 8)
            a = rng.standard_normal((n, m))
            b = rng.standard_normal((m, p))
            assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) <= 1e-10

    def test_float32_inputs_accumulate_in_float64(self):
        a = np.full((1, 4096), 1 + 2**-20, dtype=np.float32)
        b = np.ones((4096, 1), dtype=np.float32)
        assert matmul(a, b)[0, 0] == pytest.approx(4096 * (1 + 2**-20), rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestChannelStats:
    def test_hand_example(self):
        st = channel_stats([[1, -2], [3, 0]], "cols")
        np.testing.assert_array_equal(st.min, [1, -2])
        np.testing.assert_array_equal(st.max, [3, 0])
        np.testing.assert_array_equal(st.range, [2, 2])
        np.testing.assert_array_equal(st.mean, [2, -1])
        assert st.count == 2

    def test_rows_axis(self):
        st = channel_stats([[1, -2], [3, 0]], "rows")
        np.testing.assert_array_equal(st.min, [-2, 0])
        np.testing.assert_array_equal(st.max, [1, 3])

    def test_constant(self):
        st = channel_stats(np.full((5, 3), 2.5))
        np.testing.assert_array_equal(st.range, 0)

    def test_against_scan(self, rng):
        t = rng.standard_normal((128, 16))
        lo, hi, mean = scan_stats(t)
        st = channel_stats(t)
        np.testing.assert_array_equal(st.min, lo)
        np.testing.assert_array_equal(st.max, hi)
        np.testing.assert_allclose(st.mean, mean, rtol=0, atol=1e-14)
        assert st.count == 128

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            channel_stats(np.zeros((0, 3)))

    def test_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            channel_stats([[1.0, np.nan]])

    def test_rejects_bad_axis(self):
        with pytest.raises(InvalidInputError):
            channel_stats([[1.0]], "depth")


class TestTensorRange:
    def test_hand_example(self):
        assert tensor_range([[1, -2], [3, 0]]) == 5

    def test_constant(self):
        assert tensor_range(np.full((3, 3), -7.0)) == 0

    def test_bounds_every_channel_range(self, rng):
        t = rng.standard_normal((50, 12)) * rng.uniform(0.1, 10, size=12)
        r = tensor_range(t)
        assert np.all(channel_stats(t).range <= r)
        st = channel_stats(t)
        assert r == st.max.max() - st.min.min() == st.tensor_range()

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            tensor_range(np.zeros((2, 0)))


class TestAccumulate:
    def test_single_batch(self, rng):
        t = rng.standard_normal((10, 4))
        a = accumulate_stats(None, t)
        b = channel_stats(t)
        for f in ("min", "max", "mean"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_matches_concatenation(self, rng):
        batches = [rng.standard_normal((int(n), 6)) * 3 + 1 for n in rng.integers(1, 40, size=7)]
        run = None
        for b in batches:
            run = accumulate_stats(run, b)
        ref = channel_stats(np.concatenate(batches))
        np.testing.assert_array_equal(run.min, ref.min)
        np.testing.assert_array_equal(run.max, ref.max)
        np.testing.assert_allclose(run.mean, ref.mean, rtol=0, atol=1e-12)
        assert run.count == ref.count

    def test_inner_batch_keeps_extrema(self, rng):
        t = rng.standard_normal((20, 3))
        run = channel_stats(t)
        inner = np.clip(rng.standard_normal((5, 3)), run.min, run.max)
        after = accumulate_stats(run, inner)
        np.testing.assert_array_equal(after.min, run.min)
        np.testing.assert_array_equal(after.max, run.max)
        assert after.count == 25

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            accumulate_stats(channel_stats(np.ones((2, 3))), np.ones((2, 4)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_order_insensitive(self, seed, k):
        r = np.random.default_rng(seed)
        batches = [r.standard_normal((int(r.integers(1, 30)), 5)) * 4 for _ in range(k)]
        perm = r.permutation(k)
        a = b = None
        for i in range(k):
            a = accumulate_stats(a, batches[i])
            b = accumulate_stats(b, batches[perm[i]])
        np.testing.assert_array_equal(a.min, b.min)
        np.testing.assert_array_equal(a.max, b.max)
        np.testing.assert_allclose(a.mean, b.mean, rtol=1e-9, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stats_invariants(seed):
    r = np.random.default_rng(seed)
    t = r.standard_normal((int(r.integers(1, 20)), int(r.integers(1, 10)))) * 100
    st_ = channel_stats(t)
    assert np.all(st_.min <= st_.mean) and np.all(st_.mean <= st_.max)
    assert np.all(st_.range >= 0)
    assert tensor_range(t) == st_.max.max() - st_.min.min()


def test_as_matrix_rejects_1d():
    with pytest.raises(ShapeError):
        as_matrix([1.0, 2.0])


def test_scaled_stats(rng):
    t = rng.standard_normal((30, 4))
    s = rng.uniform(0.5, 3, size=4)
    a = channel_stats(t).scaled(s)
    b = channel_stats(t / s)
    np.testing.assert_allclose(a.min, b.min, rtol=1e-15)
    np.testing.assert_allclose(a.max, b.max, rtol=1e-15)
    assert isinstance(a, ChannelStats)
