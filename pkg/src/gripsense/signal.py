"""Label conditioning: Butterworth low-pass filtering and differencing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class FilterSpec:
    cutoff_hz: float = 3.0
    order: int = 1
    sample_rate_hz: float = 59.95

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise InvalidArgumentError(f"filter order must be a positive integer, got {self.order}")
        if not 0 < self.cutoff_hz < self.sample_rate_hz / 2:
            raise InvalidArgumentError(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, {self.sample_rate_hz / 2}) Hz"
            )


def butterworth_design(spec: FilterSpec):
    """Digital low-pass coefficients ``(b, a)`` by the prewarped bilinear transform.

    The analogue prototype has its poles on the unit circle in the left
    half-plane; prewarping places the -3 dB point exactly at the cutoff.
    """
    n = int(spec.order)
    fs = spec.sample_rate_hz
    wc = 2.0 * fs * math.tan(math.pi * spec.cutoff_hz / fs)
    k = np.arange(n)
    poles = wc * np.exp(1j * math.pi * (2 * k + n + 1) / (2 * n))
    zpoles = (2 * fs + poles) / (2 * fs - poles)
    a = np.real(np.poly(zpoles))
    b = np.real(np.poly(-np.ones(n)))
    b = b * (a.sum() / b.sum())
    return b, a


def butterworth_lowpass(x, spec: FilterSpec | None = None, zero_phase: bool = True) -> np.ndarray:
    """Low-pass ``x``. Zero-phase runs the filter forward and backward
    over an odd reflection of the ends; otherwise one causal pass starting
    from the steady state of ``x[0]``."""
    spec = spec or FilterSpec()
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidArgumentError("filtering needs a 1-D series of at least two samples")
    b, a = butterworth_design(spec)
    if zero_phase:
        padlen = min(3 * max(len(a), len(b)), x.size - 1)
        return sps.filtfilt(b, a, x, padtype="odd", padlen=padlen)
    y, _ = sps.lfilter(b, a, x, zi=sps.lfilter_zi(b, a) * x[0])
    return y


def discrete_diff(x) -> np.ndarray:
    """Backward difference with a leading zero, so lengths stay aligned."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidArgumentError("differencing needs a 1-D series of at least two samples")
    out = np.empty_like(x)
    out[0] = 0.0
    np.subtract(x[1:], x[:-1], out=out[1:])
    return out


def gain_db(spec: FilterSpec, freq_hz: float) -> float:
    """Single-pass magnitude response in decibels."""
    b, a = butterworth_design(spec)
    w = 2 * math.pi * freq_hz / spec.sample_rate_hz
    _, h = sps.freqz(b, a, worN=[w])
    return float(20 * np.log10(np.abs(h[0])))
