"""Gray-labeled square QAM: bit mapping, hard decisions, max-log LLRs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)

_DEMAP_CHUNK = 1 << 15


def _gray_to_index(code: np.ndarray, width: int) -> np.ndarray:
    """Decode binary-reflected Gray codewords to plain level indices."""
    idx = code.copy()
    shift = 1
    while shift < width:
        idx ^= idx >> shift
        shift <<= 1
    return idx


@dataclass
class ConstellationSpec:
    """Square M-QAM with per-axis Gray labels and unit mean symbol energy.

    A label of k = log2(M) bits splits into two halves, most significant
    bit first: the first half Gray-encodes the in-phase level index, the
    second half the quadrature level index.  Level index i (0-based, low
    to high) carries amplitude 2*i - (sqrt(M) - 1) before normalization,
    so axis-adjacent levels differ in exactly one label bit.

    Labeling for M = 4 (I bit then Q bit, point scaled by sqrt(2)):
        00 -> -1-1j    01 -> -1+1j    10 -> +1-1j    11 -> +1+1j
    Larger orders follow the same per-axis construction.
    """

    order: int
    normalized: bool = True
    bits_per_symbol: int = field(init=False)
    points: np.ndarray = field(init=False, repr=False)
    bit_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.order not in SUPPORTED_ORDERS:
            raise ValueError(
                f"unsupported constellation order {self.order} "
                f"(expected one of {SUPPORTED_ORDERS})"
            )
        k = int(np.log2(self.order))
        half = k // 2
        side = 1 << half
        labels = np.arange(self.order)
        i_code = labels >> half
        q_code = labels & (side - 1)
        i_level = 2 * _gray_to_index(i_code, half) - (side - 1)
        q_level = 2 * _gray_to_index(q_code, half) - (side - 1)
        points = i_level + 1j * q_level
        if self.normalized:
            # mean |point|^2 over the square grid is 2*(side^2 - 1)/3
            points = points / np.sqrt(2.0 * (side * side - 1) / 3.0)
        self.bits_per_symbol = k
        self.points = points.astype(np.complex128)
        self.bit_table = (
            (labels[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1
        ).astype(np.uint8)


def map_bits(bits: np.ndarray, spec: ConstellationSpec) -> np.ndarray:
    """Map a flat bit array onto constellation symbols."""
    bits = np.asarray(bits)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bit array must contain only 0 and 1")
    k = spec.bits_per_symbol
    if bits.size % k != 0:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of {k} bits per symbol"
        )
    groups = bits.reshape(-1, k).astype(np.int64)
    weights = 1 << np.arange(k - 1, -1, -1)
    return spec.points[groups @ weights]


def demap_hard(symbols: np.ndarray, spec: ConstellationSpec) -> np.ndarray:
    """Nearest-point decisions; distance ties take the smallest label."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    out = np.empty((symbols.size, spec.bits_per_symbol), dtype=np.uint8)
    for lo in range(0, symbols.size, _DEMAP_CHUNK):
        chunk = symbols[lo : lo + _DEMAP_CHUNK]
        d2 = np.abs(chunk[:, None] - spec.points[None, :]) ** 2
        out[lo : lo + chunk.size] = spec.bit_table[np.argmin(d2, axis=1)]
    return out.ravel()


def demap_soft(
    symbols: np.ndarray, spec: ConstellationSpec, noise_variance: float
) -> np.ndarray:
    """Max-log LLRs, positive when bit 0 is the more likely hypothesis.

    Per bit: (min distance^2 over points labeled 1 minus min distance^2
    over points labeled 0), divided by noise_variance.
    """
    if not (noise_variance > 0 and np.isfinite(noise_variance)):
        raise ValueError(f"noise_variance must be positive, got {noise_variance}")
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    k = spec.bits_per_symbol
    ones = spec.bit_table.astype(bool)  # (M, k)
    out = np.empty((symbols.size, k), dtype=np.float64)
    for lo in range(0, symbols.size, _DEMAP_CHUNK):
        chunk = symbols[lo : lo + _DEMAP_CHUNK]
        d2 = np.abs(chunk[:, None] - spec.points[None, :]) ** 2
        for b in range(k):
            d1 = d2[:, ones[:, b]].min(axis=1)
            d0 = d2[:, ~ones[:, b]].min(axis=1)
            out[lo : lo + chunk.size, b] = (d1 - d0) / noise_variance
    return out.ravel()
