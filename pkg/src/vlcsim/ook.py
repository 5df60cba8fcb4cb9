"""On-off keying with a symbol-spaced MMSE FIR equalizer.

NRZ signaling, one sample per bit: bit 1 transmits `amplitude`, bit 0
transmits nothing.  The equalizer solves the Wiener-Hopf normal equations
for the model r = h * s + noise with unit-variance symbols: the channel
autocorrelation matrix plus noise_variance on the diagonal, solved against
the channel vector delayed by the decision delay.  The decision delay is
chosen by scanning all cascade positions for minimum mean-square error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_toeplitz
from scipy.signal import fftconvolve

from .modem import SignalFrame


@dataclass
class MmseEqualizer:
    taps: np.ndarray
    delay: int
    gain: float  # equalized-cascade amplitude (h * w)[delay]

    def __post_init__(self) -> None:
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1 or self.taps.size == 0:
            raise ValueError("equalizer taps must be a non-empty 1-D array")
        if self.delay < 0:
            raise ValueError(f"decision delay must be >= 0, got {self.delay}")


def ook_modulate(
    bits: np.ndarray, amplitude: float, sample_rate: float = 1e8
) -> SignalFrame:
    """NRZ frame, one sample per bit."""
    bits = np.asarray(bits)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    return SignalFrame(bits.astype(np.float64) * amplitude, sample_rate)


def _normal_equations(
    cir: np.ndarray, noise_variance: float, n_taps: int, delay: int
) -> tuple[np.ndarray, np.ndarray]:
    acf = np.convolve(cir, cir[::-1])  # deterministic autocorrelation
    zero_lag = cir.size - 1
    col = np.zeros(n_taps)
    lags = min(n_taps, cir.size)
    col[:lags] = acf[zero_lag : zero_lag + lags]
    col[0] += noise_variance
    idx = delay - np.arange(n_taps)
    p = np.where((idx >= 0) & (idx < cir.size), cir[np.clip(idx, 0, cir.size - 1)], 0.0)
    return col, p


def mmse_design(
    cir: np.ndarray,
    noise_variance: float,
    n_taps: int,
    delay: int | None = None,
) -> MmseEqualizer:
    """Wiener-Hopf FIR design; delay=None scans all positions for best MSE."""
    cir = np.asarray(cir, dtype=np.float64).ravel()
    if cir.size == 0 or not np.any(cir):
        raise ValueError("channel impulse response is empty")
    if n_taps < 1:
        raise ValueError(f"n_taps must be at least 1, got {n_taps}")
    if noise_variance < 0 or not np.isfinite(noise_variance):
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")

    max_delay = n_taps + cir.size - 2
    if delay is not None:
        if not 0 <= delay <= max_delay:
            raise ValueError(f"delay {delay} outside [0, {max_delay}]")
        candidates = [delay]
    else:
        candidates = list(range(max_delay + 1))

    best: tuple[float, int, np.ndarray] | None = None
    for d in candidates:
        col, p = _normal_equations(cir, noise_variance, n_taps, d)
        w = solve_toeplitz(col, p)
        mse = 1.0 - float(p @ w)  # J = sigma_s^2 - p' R^-1 p with sigma_s^2 = 1
        if best is None or mse < best[0] - 1e-15:
            best = (mse, d, w)
    assert best is not None
    _, d, w = best
    _, p = _normal_equations(cir, noise_variance, n_taps, d)
    return MmseEqualizer(taps=w, delay=d, gain=float(w @ p))


def ook_demodulate(
    frame: SignalFrame,
    equalizer: MmseEqualizer,
    amplitude: float,
    n_bits: int | None = None,
) -> np.ndarray:
    """Equalize, sample at the decision delay, threshold at amplitude/2.

    The equalized stream is renormalized by the designed cascade gain so
    the threshold sits midway between the nominal levels.  n_bits defaults
    to the frame length; pass it explicitly when the frame carries a
    dispersion tail beyond the last bit.
    """
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    if abs(equalizer.gain) < 1e-12:
        raise ValueError("equalizer cascade gain is numerically zero")
    samples = np.atleast_2d(frame.samples)
    if n_bits is None:
        n_bits = samples.shape[1]
    if not 0 < n_bits <= samples.shape[1]:
        raise ValueError(f"n_bits {n_bits} outside the frame of {samples.shape[1]}")
    z = fftconvolve(samples, equalizer.taps[None, :], mode="full", axes=1)
    z = z[:, equalizer.delay : equalizer.delay + n_bits] / equalizer.gain
    bits = (z > amplitude / 2.0).astype(np.uint8)
    return bits[0] if frame.samples.ndim == 1 else bits
