"""Rate-1/2 convolutional code, block interleaver, soft Viterbi decoder.

Encoder generators, oldest register bit on the highest power of D:
    g1 = 1 + D^2        (octal 5)
    g2 = 1 + D + D^2    (octal 7)
Each input bit u[n] emits the g1 output then the g2 output.  Blocks are
terminated with two zero tail bits, so n input bits give 2*(n + 2) coded
bits and the trellis starts and ends in the all-zero state.
"""

from __future__ import annotations

import numpy as np

CODE_RATE = 0.5
TAIL_BITS = 2
MIN_FREE_DISTANCE = 5

# state = (u[n-1] << 1) | u[n-2]; arriving at state s consumed input s >> 1
_PRED = np.array([[0, 1], [2, 3], [0, 1], [2, 3]], dtype=np.int64)
_ARRIVE_INPUT = np.array([0, 0, 1, 1], dtype=np.int64)


def _branch_outputs() -> np.ndarray:
    """out[s, j, :] = coded pair on the transition _PRED[s, j] -> s."""
    out = np.zeros((4, 2, 2), dtype=np.int64)
    for s in range(4):
        u = s >> 1
        for j in range(2):
            p = _PRED[s, j]
            p1, p2 = p >> 1, p & 1
            out[s, j, 0] = u ^ p2
            out[s, j, 1] = u ^ p1 ^ p2
    return out


_OUT = _branch_outputs()


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Encode and terminate one block of information bits."""
    bits = np.asarray(bits)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("information bits must be 0 or 1")
    u = np.concatenate([bits.astype(np.uint8).ravel(), np.zeros(TAIL_BITS, np.uint8)])
    d1 = np.concatenate([[0], u[:-1]])
    d2 = np.concatenate([[0, 0], u[:-2]])
    coded = np.empty(2 * u.size, dtype=np.uint8)
    coded[0::2] = u ^ d2
    coded[1::2] = u ^ d1 ^ d2
    return coded


def viterbi_decode_soft(llrs: np.ndarray) -> np.ndarray:
    """Maximum-likelihood decode of one or more terminated blocks.

    llrs holds one LLR per coded bit (positive favors bit 0); a 2-D input
    decodes each row as an independent block.  Returns information bits
    with the tail stripped.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    squeeze = llrs.ndim == 1
    if squeeze:
        llrs = llrs[None, :]
    n_blocks, n_llrs = llrs.shape
    if n_llrs % 2 != 0 or n_llrs < 2 * (TAIL_BITS + 1):
        raise ValueError(f"LLR count {n_llrs} does not form a terminated block")
    steps = n_llrs // 2
    pairs = llrs.reshape(n_blocks, steps, 2)

    metric = np.full((n_blocks, 4), -np.inf)
    metric[:, 0] = 0.0
    choice = np.empty((n_blocks, steps, 4), dtype=np.uint8)
    # maximizing sum of (1 - 2c) * llr picks the ML codeword
    gain = 1.0 - 2.0 * _OUT  # (4, 2, 2)
    for t in range(steps):
        bm = (
            gain[None, :, :, 0] * pairs[:, t, 0, None, None]
            + gain[None, :, :, 1] * pairs[:, t, 1, None, None]
        )
        cand = metric[:, _PRED] + bm  # (n_blocks, 4, 2)
        if t >= steps - TAIL_BITS:
            cand[:, _ARRIVE_INPUT == 1, :] = -np.inf
        choice[:, t] = np.argmax(cand, axis=2).astype(np.uint8)
        metric = np.take_along_axis(cand, choice[:, t, :, None].astype(np.int64), 2)[
            :, :, 0
        ]

    rows = np.arange(n_blocks)
    state = np.zeros(n_blocks, dtype=np.int64)
    decoded = np.empty((n_blocks, steps), dtype=np.uint8)
    for t in range(steps - 1, -1, -1):
        decoded[:, t] = state >> 1
        state = _PRED[state, choice[rows, t, state]]
    info = decoded[:, : steps - TAIL_BITS]
    return info[0] if squeeze else info


def interleave(bits: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Row-write, column-read block interleaver."""
    bits = np.asarray(bits)
    if rows < 1 or cols < 1:
        raise ValueError("interleaver dimensions must be positive")
    if bits.size != rows * cols:
        raise ValueError(
            f"block of {bits.size} bits does not fill a {rows}x{cols} interleaver"
        )
    return bits.reshape(rows, cols).T.ravel()


def deinterleave(bits: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of interleave for the same dimensions."""
    bits = np.asarray(bits)
    if rows < 1 or cols < 1:
        raise ValueError("interleaver dimensions must be positive")
    if bits.size != rows * cols:
        raise ValueError(
            f"block of {bits.size} bits does not fill a {rows}x{cols} interleaver"
        )
    return bits.reshape(cols, rows).T.ravel()
