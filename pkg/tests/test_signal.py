import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal as sps

from gripsense.errors import InvalidArgumentError
from gripsense.signal import FilterSpec, butterworth_design, butterworth_lowpass, discrete_diff, gain_db

FS = 59.95
# order-1 prewarped bilinear transform at 3 Hz / 59.95 Hz: K = tan(pi fc / fs),
# b = K / (1 + K) * [1, 1], a = [1, (K - 1) / (K + 1)]
B0 = 0.13682880834211789
A1 = -0.7263423833157642


def test_order_one_coefficients_match_closed_form():
    K = math.tan(math.pi * 3.0 / FS)
    assert math.isclose(B0, K / (1 + K), rel_tol=1e-15)
    assert math.isclose(A1, (K - 1) / (K + 1), rel_tol=1e-15)
    b, a = butterworth_design(FilterSpec())
    np.testing.assert_allclose(b, [B0, B0], atol=1e-12, rtol=0)
    np.testing.assert_allclose(a, [1.0, A1], atol=1e-12, rtol=0)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("fc", [0.5, 3.0, 12.0])
def test_design_matches_scipy(order, fc):
    b, a = butterworth_design(FilterSpec(fc, order, FS))
    rb, ra = sps.butter(order, fc, fs=FS)
    np.testing.assert_allclose(b, rb, atol=1e-12)
    np.testing.assert_allclose(a, ra, atol=1e-12)


def test_gain_at_cutoff_and_dc():
    spec = FilterSpec()
    assert abs(gain_db(spec, 3.0) + 3.0103) < 0.1
    b, a = butterworth_design(spec)
    assert abs(b.sum() / a.sum() - 1) < 1e-6


def test_single_pass_impulse_matches_recursion():
    x = np.zeros(40)
    x[5] = 1.0
    y = butterworth_lowpass(x, zero_phase=False)
    ref = np.zeros_like(x)
    prev_x = prev_y = 0.0
    for n, xn in enumerate(x):
        ref[n] = B0 * xn + B0 * prev_x - A1 * prev_y
        prev_x, prev_y = xn, ref[n]
    np.testing.assert_allclose(y, ref, atol=1e-15)


def test_single_pass_amplitude_at_cutoff():
    t = np.arange(6000) / FS
    y = butterworth_lowpass(np.sin(2 * np.pi * 3.0 * t), zero_phase=False)
    tail = slice(1000, None)
    basis = np.column_stack([np.sin(2 * np.pi * 3.0 * t[tail]), np.cos(2 * np.pi * 3.0 * t[tail])])
    coef, *_ = np.linalg.lstsq(basis, y[tail], rcond=None)
    assert abs(np.hypot(*coef) - 1 / math.sqrt(2)) < 0.01


def test_constant_passes_unchanged():
    for zp in (True, False):
        np.testing.assert_allclose(butterworth_lowpass(np.full(50, 7.5), zero_phase=zp), 7.5, atol=1e-12)


def test_zero_phase_has_no_lag():
    t = np.arange(3000) / FS
    x = np.sin(2 * np.pi * 1.0 * t)
    y = butterworth_lowpass(x)
    lags = np.arange(-20, 21)
    mid = slice(200, -200)
    corr = [np.dot(x[mid], np.roll(y, -k)[mid]) for k in lags]
    assert lags[int(np.argmax(corr))] == 0
    assert len(y) == len(x)


@given(arrays(np.float64, 30, elements=st.floats(-100, 100)),
       arrays(np.float64, 30, elements=st.floats(-100, 100)),
       st.floats(-5, 5), st.floats(-5, 5))
def test_filter_is_linear(x, y, a, b):
    lhs = butterworth_lowpass(a * x + b * y)
    rhs = a * butterworth_lowpass(x) + b * butterworth_lowpass(y)
    assert np.abs(lhs - rhs).max() < 1e-10


def test_filter_spec_validation():
    for bad in (dict(cutoff_hz=0.0), dict(cutoff_hz=30.0), dict(order=0), dict(order=1.5)):
        with pytest.raises(InvalidArgumentError):
            FilterSpec(**bad)
    with pytest.raises(InvalidArgumentError):
        butterworth_lowpass(np.ones(1))


def test_discrete_diff_examples():
    assert discrete_diff([1, 1, 1]).tolist() == [0, 0, 0]
    assert discrete_diff([0, 1, 3]).tolist() == [0, 1, 2]
    with pytest.raises(InvalidArgumentError):
        discrete_diff([1.0])


@given(arrays(np.int64, st.integers(2, 50), elements=st.integers(-10**6, 10**6)))
def test_diff_cumsum_identity(x):
    x = x.astype(float)
    np.testing.assert_array_equal(np.cumsum(discrete_diff(x)) + x[0], x)
