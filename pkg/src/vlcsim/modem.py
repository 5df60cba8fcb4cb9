"""Asymmetrically clipped optical OFDM and SC-FDE modems.

Spectral layout for N data symbols: a length-4N vector
    S = [0, I0, 0, I1, ..., 0, I_{N-1}, 0, I*_{N-1}, 0, ..., 0, I*_0]
carries data on odd subcarriers only, with Hermitian symmetry so the time
signal is real.  DFT scaling convention throughout: forward transforms are
unscaled, inverse transforms carry 1/length.  Clipping the negative half
of the time signal halves the odd-bin amplitudes, which the receiver
compensates with a factor of two after single-tap zero-forcing.

The SC-FDE variant precodes the N symbols with an unscaled N-point DFT
before the same lifting, and undoes it after equalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_IMAG_TOL = 1e-10


class SingularChannelError(ValueError):
    """Raised when a zero-forcing divide would hit a near-zero channel bin."""


@dataclass
class SignalFrame:
    """Real-valued sample block(s) with sample-rate metadata.

    samples may be 1-D (one frame) or 2-D (a batch of frames, one per row).
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim not in (1, 2):
            raise ValueError("frame samples must be 1-D or a 2-D batch")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass
class AcoFrameConfig:
    n_symbols: int
    cp_length: int = 16
    sample_rate: float = 1e8

    def __post_init__(self) -> None:
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be at least 1")
        if not 0 <= self.cp_length <= self.fft_size:
            raise ValueError(
                f"cp_length {self.cp_length} outside [0, {self.fft_size}]"
            )
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    @property
    def fft_size(self) -> int:
        return 4 * self.n_symbols


def build_odd_hermitian_vector(symbols: np.ndarray, n_symbols: int) -> np.ndarray:
    """Place N symbols on odd bins of a length-4N Hermitian spectrum."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.shape[-1] != n_symbols:
        raise ValueError(
            f"expected {n_symbols} symbols per block, got {symbols.shape[-1]}"
        )
    shape = symbols.shape[:-1] + (4 * n_symbols,)
    spectrum = np.zeros(shape, dtype=np.complex128)
    spectrum[..., 1 : 2 * n_symbols : 2] = symbols
    spectrum[..., 2 * n_symbols + 1 :: 2] = np.conj(symbols[..., ::-1])
    return spectrum


def _lift_to_time(spectrum: np.ndarray, cfg: AcoFrameConfig) -> np.ndarray:
    x = np.fft.ifft(spectrum, axis=-1)
    scale = max(1.0, float(np.max(np.abs(x.real))) if x.size else 1.0)
    if np.max(np.abs(x.imag)) > _IMAG_TOL * scale:
        raise ValueError("time signal has non-negligible imaginary part")
    x = x.real
    if cfg.cp_length:
        x = np.concatenate([x[..., -cfg.cp_length :], x], axis=-1)
    return np.maximum(x, 0.0)


def aco_ofdm_modulate(symbols: np.ndarray, cfg: AcoFrameConfig) -> SignalFrame:
    """Symbols to a unipolar time frame: lift, IFFT, prefix, clip at zero."""
    spectrum = build_odd_hermitian_vector(symbols, cfg.n_symbols)
    return SignalFrame(_lift_to_time(spectrum, cfg), cfg.sample_rate)


def aco_scfde_modulate(symbols: np.ndarray, cfg: AcoFrameConfig) -> SignalFrame:
    """DFT-precoded variant of aco_ofdm_modulate."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.shape[-1] != cfg.n_symbols:
        raise ValueError(
            f"expected {cfg.n_symbols} symbols per block, got {symbols.shape[-1]}"
        )
    return aco_ofdm_modulate(np.fft.fft(symbols, axis=-1), cfg)


def _equalized_odd_bins(
    frame: SignalFrame, freq_response: np.ndarray, cfg: AcoFrameConfig
) -> np.ndarray:
    samples = frame.samples
    expected = cfg.fft_size + cfg.cp_length
    if samples.shape[-1] != expected:
        raise ValueError(
            f"frame length {samples.shape[-1]} does not match {expected}"
        )
    freq_response = np.asarray(freq_response, dtype=np.complex128)
    if freq_response.shape != (cfg.fft_size,):
        raise ValueError(
            f"frequency response must have length {cfg.fft_size}"
        )
    odd = np.arange(1, 2 * cfg.n_symbols, 2)
    h = freq_response[odd]
    if np.min(np.abs(h)) < 1e-12:
        raise SingularChannelError(
            "channel response vanishes on a data subcarrier"
        )
    spectrum = np.fft.fft(samples[..., cfg.cp_length :], axis=-1)
    return 2.0 * spectrum[..., odd] / h


def aco_ofdm_demodulate(
    frame: SignalFrame, freq_response: np.ndarray, cfg: AcoFrameConfig
) -> np.ndarray:
    """CP removal, FFT, zero-forcing on odd bins, clipping compensation."""
    return _equalized_odd_bins(frame, freq_response, cfg)


def aco_scfde_demodulate(
    frame: SignalFrame, freq_response: np.ndarray, cfg: AcoFrameConfig
) -> np.ndarray:
    """Equalize odd bins, then undo the DFT precoding."""
    return np.fft.ifft(_equalized_odd_bins(frame, freq_response, cfg), axis=-1)


def freq_response_from_cir(taps: np.ndarray, fft_size: int) -> np.ndarray:
    """Zero-padded unscaled DFT of channel taps sampled at the frame rate."""
    taps = np.asarray(taps, dtype=np.float64).ravel()
    if taps.size == 0:
        raise ValueError("channel has no taps")
    if taps.size > fft_size:
        raise ValueError(
            f"channel support {taps.size} exceeds the FFT size {fft_size}"
        )
    return np.fft.fft(taps, n=fft_size)
