import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdcam.bitcam import (BitWord, CamArray, WidthMismatchError, hamming_distance, oracle_match,
                          search_oracle, store)
from hdcam.genomics import encode


def naive_distance(a: BitWord, b: BitWord) -> int:
    return sum(a.bit(i) != b.bit(i) for i in range(a.width))


def words(width):
    return st.integers(0, 2**width - 1).map(lambda v: BitWord.from_int(v, width))


widths = st.sampled_from([8, 16, 64, 128, 256, 512])


@st.composite
def word_pair(draw):
    w = draw(widths)
    return draw(words(w)), draw(words(w))


@st.composite
def word_triple(draw):
    w = draw(widths)
    return draw(words(w)), draw(words(w)), draw(words(w))


class TestBitWord:
    def test_lsb_first_packing(self):
        w = BitWord.from_positions([0, 9], 16)
        assert w.data == bytes([0b00000001, 0b00000010])
        assert w.bit(0) == 1 and w.bit(9) == 1 and w.bit(1) == 0

    def test_from_bits_round_trip(self):
        bits = np.array([1, 0, 1, 1, 0, 0, 0, 1] * 4, dtype=np.uint8)
        assert np.array_equal(BitWord.from_bits(bits).to_bits(), bits)

    @pytest.mark.parametrize("width", [0, 7, 12, -8])
    def test_width_must_be_byte_multiple(self, width):
        with pytest.raises(ValueError):
            BitWord.zeros(width)

    def test_value_must_fit(self):
        with pytest.raises(ValueError):
            BitWord.from_int(256, 8)

    def test_frozen(self):
        w = BitWord.zeros(8)
        with pytest.raises(AttributeError):
            w.width = 16


class TestHammingDistance:
    def test_identity(self):
        w = BitWord.from_int(0xDEADBEEF, 32)
        assert hamming_distance(w, w) == 0

    def test_one_hot_a_vs_c(self):
        # A = 0001, C = 0010 (padded to a byte by pairing with A)
        assert hamming_distance(encode("AA"), encode("CA")) == 2

    def test_37_chosen_positions(self):
        rnd = random.Random(37)
        base = BitWord.from_int(rnd.getrandbits(256), 256)
        positions = rnd.sample(range(256), 37)
        other = base
        for p in positions:
            other = other.flip(p)
        assert naive_distance(base, other) == 37
        assert hamming_distance(base, other) == 37

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatchError):
            hamming_distance(BitWord.zeros(8), BitWord.zeros(16))

    @given(word_pair())
    def test_matches_per_bit_loop(self, pair):
        a, b = pair
        assert hamming_distance(a, b) == naive_distance(a, b)

    @given(word_pair())
    def test_symmetric_and_bounded(self, pair):
        a, b = pair
        d = hamming_distance(a, b)
        assert d == hamming_distance(b, a)
        assert 0 <= d <= a.width
        assert (d == 0) == (a == b)

    @given(word_triple())
    def test_triangle_inequality(self, t):
        a, b, c = t
        assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)

    @given(word_pair(), st.data())
    def test_single_flip_changes_distance_by_one(self, pair, data):
        stored, query = pair
        i = data.draw(st.integers(0, stored.width - 1))
        before = hamming_distance(stored, query)
        after = hamming_distance(stored.flip(i), query)
        assert abs(after - before) == 1


class TestOracleMatch:
    def test_self_match_at_zero(self):
        w = BitWord.from_int(12345, 64)
        assert oracle_match(w, w, 0)

    def test_distance_three_threshold_two(self):
        a = BitWord.zeros(16)
        b = BitWord.from_positions([1, 5, 11], 16)
        assert naive_distance(a, b) == 3
        assert not oracle_match(a, b, 2)
        assert oracle_match(a, b, 3)

    def test_threshold_equal_width_always_matches(self):
        rnd = random.Random(1)
        a = BitWord.from_int(rnd.getrandbits(256), 256)
        b = BitWord.from_int(rnd.getrandbits(256), 256)
        assert oracle_match(a, b, 256)

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatchError):
            oracle_match(BitWord.zeros(8), BitWord.zeros(16), 1)


def random_array(n, width, seed):
    rnd = random.Random(seed)
    return CamArray.from_words([BitWord.from_int(rnd.getrandbits(width), width) for _ in range(n)])


class TestSearchOracle:
    def test_exact_hit(self):
        arr = random_array(20, 64, 0)
        assert search_oracle(arr, arr.row(5), 0) == {5}

    def test_toy_kmer_db_with_one_substitution(self):
        rnd = random.Random(5)
        genome = "".join(rnd.choice("ACGT") for _ in range(80))
        k = 16
        kmers = [genome[i:i + k] for i in range(len(genome) - k + 1)]
        arr = CamArray.from_words([encode(s) for s in kmers])
        q = list(kmers[10])
        q[3] = next(b for b in "ACGT" if b != q[3])
        query = encode("".join(q))
        brute = {i for i, s in enumerate(kmers) if naive_distance(encode(s), query) <= 2}
        result = search_oracle(arr, query, 2)
        assert 10 in result
        assert result == brute

    def test_threshold_width_returns_all(self):
        arr = random_array(17, 128, 2)
        assert search_oracle(arr, arr.row(0), 128) == set(range(17))

    def test_width_mismatch(self):
        arr = random_array(3, 64, 3)
        with pytest.raises(WidthMismatchError):
            search_oracle(arr, BitWord.zeros(32), 0)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32), st.integers(0, 64), st.integers(0, 64))
    def test_monotone_in_threshold(self, seed, t1, t2):
        t1, t2 = sorted((t1, t2))
        arr = random_array(40, 64, seed)
        q = BitWord.from_int(random.Random(seed + 1).getrandbits(64), 64)
        assert search_oracle(arr, q, t1) <= search_oracle(arr, q, t2)

    @pytest.mark.parametrize("width", [24, 64, 256])
    def test_vectorized_distances_match_naive(self, width):
        arr = random_array(30, width, width)
        q = BitWord.from_int(random.Random(9).getrandbits(width), width)
        expected = [naive_distance(r, q) for r in arr.rows]
        assert arr.distances(q).tolist() == expected
        assert arr.min_distances([q, arr.row(4)]).tolist() == [min(expected), 0]


class TestStore:
    def test_store_then_read_back(self):
        arr = random_array(4, 64, 7)
        w = BitWord.from_int(0xABCDEF, 64)
        assert store(arr, 2, w).row(2) == w

    def test_other_rows_unchanged(self):
        arr = random_array(4, 64, 8)
        new = store(arr, 0, BitWord.zeros(64))
        assert new.row(1).data == arr.row(1).data
        assert new.row(0) != arr.row(0) or arr.row(0) == BitWord.zeros(64)

    def test_store_zero_and_search(self):
        arr = random_array(4, 64, 9)
        new = store(arr, 3, BitWord.zeros(64))
        assert 3 in search_oracle(new, BitWord.zeros(64), 0)

    def test_original_untouched(self):
        arr = random_array(2, 64, 10)
        before = arr.packed.copy()
        store(arr, 0, BitWord.zeros(64))
        assert np.array_equal(arr.packed, before)

    def test_errors(self):
        arr = random_array(2, 64, 11)
        with pytest.raises(IndexError):
            store(arr, 2, BitWord.zeros(64))
        with pytest.raises(WidthMismatchError):
            store(arr, 0, BitWord.zeros(32))
