"""Counter-based bits: purity, scalar/batch agreement, basic uniformity."""

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from rwre import rng

words = st.integers(min_value=-(2**62), max_value=2**62)


@given(words, words, words)
def test_hash_is_pure(seed, a, b):
    assert rng.hash_words(seed, a, b) == rng.hash_words(seed, a, b)


@given(words, words, words)
def test_word_order_matters(seed, a, b):
    if a != b:
        assert rng.hash_words(seed, a, b) != rng.hash_words(seed, b, a)


@given(words, st.lists(words, min_size=1, max_size=64))
def test_scalar_equals_batch(seed, ws):
    arr = np.array(ws, dtype=np.int64)
    batched = rng.hash_words(seed, arr)
    singles = np.array([rng.hash_words(seed, w) for w in ws], dtype=np.uint64)
    assert np.array_equal(batched, singles)


@given(words, words)
def test_uniform_range(seed, w):
    u = rng.uniform(seed, w)
    assert 0.0 <= u < 1.0


@given(words)
def test_flipping_a_word_bit_changes_the_hash(w):
    assert rng.hash_words(0, w) != rng.hash_words(0, w ^ 1)


def test_mix64_is_a_permutation_on_a_sample():
    xs = np.arange(1 << 16, dtype=np.uint64)
    assert len(np.unique(rng.mix64(xs))) == len(xs)


def test_uniformity_chi_square():
    # 2^16 consecutive counters into 64 bins; chi2_63 has sd sqrt(2*63)
    n, bins = 1 << 16, 64
    u = rng.u01(rng.hash_words(12345, np.arange(n, dtype=np.int64)))
    counts = np.bincount((u * bins).astype(int), minlength=bins)
    chi2 = ((counts - n / bins) ** 2 / (n / bins)).sum()
    assert abs(chi2 - (bins - 1)) < 6 * np.sqrt(2 * (bins - 1))


def test_negative_words_fold_without_collision_in_small_window():
    xs = np.arange(-500, 500, dtype=np.int64)
    hs = rng.hash_words(7, xs)
    assert len(np.unique(hs)) == len(xs)


def test_derive_separates_tags():
    assert rng.derive(0, 1) != rng.derive(0, 2)
    assert rng.derive(1, 1) != rng.derive(0, 1)
    assert isinstance(rng.derive(0, 1), int)
