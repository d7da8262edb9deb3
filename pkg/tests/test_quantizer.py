from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aweq.errors import InvalidInputError, InvalidRangeError
from aweq.quantizer import (
    QuantizedMatrix,
    QuantParams,
    compute_quant_params,
    dequantize,
    fake_quantize,
    quant_dequant,
    quantize,
)


def exact_code(x: float, p: QuantParams) -> int:
    """Code in exact rational arithmetic; Python's round() on Fraction ties to even."""
    q = round(Fraction(x) / Fraction(p.step)) + p.zero_point
    return min(max(q, p.q_min), p.q_max)


class TestParams:
    def test_unit_step(self):
        p = compute_quant_params(0, 255, 8)
        assert (p.step, p.zero_point, p.q_min, p.q_max) == (1.0, 0, 0, 255)

    def test_symmetric_interval(self):
        p = compute_quant_params(-1, 1, 8)
        assert p.step == 2 / 255
        assert p.zero_point == 128  # round(127.5) ties to even

    def test_three_bits(self):
        p = compute_quant_params(0, 7, 3)
        assert (p.step, p.zero_point, p.q_max) == (1.0, 0, 7)

    def test_degenerate(self):
        p = compute_quant_params(3.0, 3.0, 4)
        assert (p.step, p.zero_point) == (1.0, 0)

    def test_invalid_range(self):
        with pytest.raises(InvalidRangeError):
            compute_quant_params(1, 0, 8)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            compute_quant_params(0, np.inf, 8)

    @pytest.mark.parametrize("bits", [1, 9, 2.5, True])
    def test_bad_bits(self, bits):
        with pytest.raises(InvalidInputError):
            compute_quant_params(0, 1, bits)

    @pytest.mark.parametrize("bits", [2, 3, 4, 8])
    def test_symmetric_mode(self, bits):
        p = compute_quant_params(-0.3, 2.0, bits, symmetric=True)
        assert p.x_min == -2.0 and p.x_max == 2.0
        assert p.zero_point == 2 ** (bits - 1)

    def test_zero_point_clamped(self):
        p = compute_quant_params(1.0, 2.0, 8)
        assert p.zero_point == 0

    def test_roundtrip_dict(self):
        p = compute_quant_params(-0.7, 1.3, 5)
        assert QuantParams.from_dict(p.to_dict()) == p


class TestQuantize:
    def test_zero_maps_to_zero_point(self):
        p = compute_quant_params(-1, 1, 8)
        assert quantize([[0.0]], p).codes[0, 0] == 128

    def test_endpoints(self):
        p = compute_quant_params(0, 255, 8)
        q = quantize([[0.0, 255.0]], p)
        assert q.codes.tolist() == [[0, 255]]

    def test_against_exact_oracle(self, rng):
        for lo, hi, bits in [(-1.3, 2.9, 8), (-0.01, 5.0, 4), (-3.0, 0.5, 3)]:
            p = compute_quant_params(lo, hi, bits)
            x = rng.uniform(lo, hi, size=(1000, 1))
            expected = np.array([[exact_code(float(v), p)] for v in x[:, 0]])
            np.testing.assert_array_equal(quantize(x, p).codes, expected)

    def test_saturation(self):
        p = compute_quant_params(-1, 1, 4)
        q = quantize([[-1e300, 1e300, -5.0, 5.0]], p)
        assert q.codes.tolist() == [[0, 15, 0, 15]]

    def test_monotone(self, rng):
        p = compute_quant_params(-2, 3, 3)
        x = np.sort(rng.uniform(-10, 10, size=2000)).reshape(1, -1)
        assert np.all(np.diff(quantize(x, p).codes[0]) >= 0)


class TestDequantize:
    def test_zero_point_is_zero(self):
        p = compute_quant_params(-1, 1, 8)
        assert dequantize(QuantizedMatrix(np.array([[128]]), p))[0, 0] == 0.0

    def test_endpoint(self):
        p = compute_quant_params(0, 255, 8)
        assert dequantize(QuantizedMatrix(np.array([[255]]), p))[0, 0] == 255.0

    def test_round_trip_bound_grid_sweep(self):
        p = compute_quant_params(-0.37, 1.91, 8)
        x = np.linspace(p.x_min, p.x_max, 20_001).reshape(-1, 1)
        assert np.max(np.abs(dequantize(quantize(x, p)) - x)) <= p.step / 2 + 1e-12

    def test_rejects_off_grid_codes(self):
        p = compute_quant_params(0, 1, 2)
        with pytest.raises(InvalidInputError):
            dequantize(QuantizedMatrix(np.array([[4]]), p))


class TestFakeQuantize:
    def test_grid_values_fixed(self):
        x = np.arange(256, dtype=np.float64).reshape(16, 16) * 0.5 - 20
        np.testing.assert_array_equal(fake_quantize(x, 8), x)

    def test_constant(self):
        x = np.full((4, 4), 3.3)
        out = fake_quantize(x, 8)
        assert np.all(out == out[0, 0])
        assert abs(out[0, 0] - 3.3) <= 0.5

    def test_more_bits_less_error(self, rng):
        x = rng.standard_normal((64, 64))
        err8 = np.mean((fake_quantize(x, 8) - x) ** 2) / np.mean(x**2)
        err3 = np.mean((fake_quantize(x, 3) - x) ** 2) / np.mean(x**2)
        assert err8 < err3

    def test_fixed_range_saturates(self):
        out = fake_quantize([[-10.0, 0.0, 10.0]], 8, (-1.0, 1.0))
        assert out[0, 0] == pytest.approx(-128 * 2 / 255)
        assert out[0, 1] == 0.0
        assert out[0, 2] == pytest.approx(127 * 2 / 255)


range_strategy = st.tuples(
    st.floats(-1e3, 0, allow_nan=False), st.floats(1e-3, 1e3, allow_nan=False), st.sampled_from([2, 3, 4, 5, 8])
)


@settings(max_examples=100, deadline=None)
@given(range_strategy, st.integers(0, 2**32 - 1))
def test_quantizer_properties(rng_spec, seed):
    lo, hi, bits = rng_spec
    p = compute_quant_params(lo, hi, bits)
    r = np.random.default_rng(seed)
    inside = r.uniform(lo, hi, size=(1, 200))
    wild = r.standard_normal((1, 200)) * 1e6
    for x in (inside, wild):
        codes = quantize(x, p).codes
        assert codes.min() >= 0 and codes.max() <= 2**bits - 1
    fq = quant_dequant(inside, p)
    assert np.max(np.abs(fq - inside)) <= p.step / 2 + 1e-12 * max(1.0, abs(lo), hi)
    np.testing.assert_array_equal(quant_dequant(fq, p), fq)
    if 0 < p.zero_point < p.q_max:
        assert quant_dequant([[0.0]], p)[0, 0] == 0.0
