import itertools

import numpy as np
import pytest

from vlcsim.coding import (
    CODE_RATE,
    MIN_FREE_DISTANCE,
    TAIL_BITS,
    conv_encode,
    deinterleave,
    interleave,
    viterbi_decode_soft,
)


class ShiftRegisterEncoder:
    """Oracle: the two-delay feedforward encoder pushed one bit at a time."""

    def __init__(self):
        self.d1 = 0
        self.d2 = 0

    def push(self, u):
        o1 = u ^ self.d2
        o2 = u ^ self.d1 ^ self.d2
        self.d1, self.d2 = u, self.d1
        return o1, o2

    def encode(self, bits):
        out = []
        for u in list(bits) + [0] * TAIL_BITS:
            out.extend(self.push(int(u)))
        return np.array(out, dtype=np.uint8)


def all_codewords(n_info):
    for word in itertools.product((0, 1), repeat=n_info):
        yield np.array(word, dtype=np.uint8), ShiftRegisterEncoder().encode(word)


def test_single_one_codeword_frozen():
    np.testing.assert_array_equal(conv_encode([1]), [1, 1, 0, 1, 1, 1])


def test_encoder_matches_shift_register_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 65))
        bits = rng.integers(0, 2, size=n)
        np.testing.assert_array_equal(
            conv_encode(bits), ShiftRegisterEncoder().encode(bits)
        )


def test_output_length_and_rate():
    for n in (1, 5, 50):
        coded = conv_encode(np.zeros(n, dtype=np.uint8))
        assert coded.size == 2 * (n + TAIL_BITS)
    assert CODE_RATE == 0.5


def test_encoder_is_linear_over_gf2():
    rng = np.random.default_rng(12)
    a = rng.integers(0, 2, size=40)
    b = rng.integers(0, 2, size=40)
    np.testing.assert_array_equal(
        conv_encode(a ^ b), conv_encode(a) ^ conv_encode(b)
    )


def test_minimum_codeword_weight_is_free_distance():
    weights = [
        coded.sum() for info, coded in all_codewords(12) if info.any()
    ]
    assert min(weights) == MIN_FREE_DISTANCE == 5


def test_decoder_matches_exhaustive_maximum_likelihood():
    rng = np.random.default_rng(13)
    for n_info in (3, 6, 9):
        for _ in range(20):
            llrs = rng.normal(size=2 * (n_info + TAIL_BITS))
            best_metric = -np.inf
            best_info = None
            for info, coded in all_codewords(n_info):
                metric = np.sum((1.0 - 2.0 * coded) * llrs)
                if metric > best_metric:
                    best_metric = metric
                    best_info = info
            np.testing.assert_array_equal(viterbi_decode_soft(llrs), best_info)


def test_decoder_noiseless_round_trip():
    rng = np.random.default_rng(14)
    bits = rng.integers(0, 2, size=120)
    llrs = 1.0 - 2.0 * conv_encode(bits).astype(float)
    np.testing.assert_array_equal(viterbi_decode_soft(llrs), bits)


def test_decoder_corrects_any_two_hard_errors():
    rng = np.random.default_rng(15)
    bits = rng.integers(0, 2, size=50)
    coded = conv_encode(bits)
    clean = 1.0 - 2.0 * coded.astype(float)
    n = coded.size
    flips = [(i,) for i in range(n)]
    flips += list(itertools.combinations(range(n), 2))
    llrs = np.tile(clean, (len(flips), 1))
    for row, positions in enumerate(flips):
        for p in positions:
            llrs[row, p] = -llrs[row, p]
    decoded = viterbi_decode_soft(llrs)
    np.testing.assert_array_equal(decoded, np.tile(bits, (len(flips), 1)))


def test_batched_decode_equals_row_wise():
    rng = np.random.default_rng(16)
    block = rng.normal(size=(7, 2 * (25 + TAIL_BITS)))
    batched = viterbi_decode_soft(block)
    for row in range(7):
        np.testing.assert_array_equal(batched[row], viterbi_decode_soft(block[row]))


def test_interleaver_frozen_small_example():
    x = np.arange(12)
    # row-write column-read with 3 rows and 4 columns
    np.testing.assert_array_equal(
        interleave(x, 3, 4), [0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11]
    )


def test_interleave_round_trip():
    rng = np.random.default_rng(17)
    for rows, cols in ((2, 3), (32, 16), (8, 64)):
        x = rng.normal(size=rows * cols)
        np.testing.assert_array_equal(deinterleave(interleave(x, rows, cols), rows, cols), x)


def test_interleaver_separates_same_row_neighbours():
    rows, cols = 32, 16
    perm = interleave(np.arange(rows * cols), rows, cols)
    position = np.empty(rows * cols, dtype=int)
    position[perm] = np.arange(rows * cols)
    for j in range(rows * cols - 1):
        if j // cols == (j + 1) // cols:
            assert abs(position[j + 1] - position[j]) >= rows


def test_interleave_rejects_wrong_length():
    with pytest.raises(ValueError):
        interleave(np.arange(10), 3, 4)
    with pytest.raises(ValueError):
        deinterleave(np.arange(10), 3, 4)


def test_decoder_rejects_odd_length():
    with pytest.raises(ValueError):
        viterbi_decode_soft(np.zeros(7))
    with pytest.raises(ValueError):
        viterbi_decode_soft(np.zeros(4))  # shorter than the tail alone
