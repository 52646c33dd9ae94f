"""Tests for edit distance and error-rate metrics."""

import itertools
from functools import lru_cache

import numpy as np
import pytest
from numpy.testing import assert_allclose

from adavsr.errors import InputError
from adavsr.metrics import EditCounts, ReportRow, cer, edit_distance, wer


def brute_force_distance(hyp: tuple, ref: tuple) -> int:
    """Plain recursive Levenshtein distance, memoized."""

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        cost = 0 if ref[i - 1] == hyp[j - 1] else 1
        return min(rec(i - 1, j - 1) + cost, rec(i - 1, j) + 1, rec(i, j - 1) + 1)

    return rec(len(ref), len(hyp))


class TestEditDistance:
    def test_matches_brute_force_exhaustively(self):
        # every pair of sequences up to length 4 over a 3-symbol alphabet
        alphabet = ("a", "b", "c")
        seqs = [
            seq
            for n in range(5)
            for seq in itertools.product(alphabet, repeat=n)
        ]
        assert len(seqs) == 121
        for ref in seqs:
            for hyp in seqs:
                got = edit_distance(hyp, ref).total
                assert got == brute_force_distance(hyp, ref), (hyp, ref)

    def test_equal_sequences_zero(self):
        counts = edit_distance("abc", "abc")
        assert counts == EditCounts(0, 0, 0)

    def test_pure_deletion(self):
        counts = edit_distance("ab", "abc")
        assert counts == EditCounts(0, 1, 0)

    def test_pure_insertion(self):
        counts = edit_distance("abcd", "abc")
        assert counts == EditCounts(0, 0, 1)

    def test_pure_substitution(self):
        counts = edit_distance("axc", "abc")
        assert counts == EditCounts(1, 0, 0)

    def test_counts_total_consistent(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            ref = tuple(rng.integers(0, 3, size=rng.integers(0, 6)))
            hyp = tuple(rng.integers(0, 3, size=rng.integers(0, 6)))
            counts = edit_distance(hyp, ref)
            assert counts.total == brute_force_distance(hyp, ref)
            assert min(counts.substitutions, counts.deletions, counts.insertions) >= 0

    def test_empty_against_empty(self):
        assert edit_distance([], []).total == 0


class TestErrorRates:
    def test_perfect_hypothesis(self):
        assert wer(["ab cd"], ["ab cd"]) == 0.0
        assert cer(["ab cd"], ["ab cd"]) == 0.0

    def test_half_words_wrong(self):
        assert_allclose(wer(["ab xx"], ["ab cd"]), 50.0)

    def test_aggregates_over_corpus(self):
        # 1 error over 4 reference words total
        hyps = ["aa bb", "cc xx"]
        refs = ["aa bb", "cc dd"]
        assert_allclose(wer(hyps, refs), 25.0)

    def test_insertions_can_exceed_hundred(self):
        assert wer(["a b c d"], ["a"]) == 300.0

    def test_cer_ignores_spaces(self):
        assert cer(["abcd"], ["ab cd"]) == 0.0
        assert_allclose(cer(["abxd"], ["ab cd"]), 25.0)

    def test_empty_reference_rejected(self):
        with pytest.raises(InputError):
            wer(["a"], [""])
        with pytest.raises(InputError):
            cer(["a"], [" "])

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(InputError):
            wer(["a", "b"], ["a"])


class TestReportRow:
    def test_csv_formatting(self):
        row = ReportRow("clean", 12.5, 3.25)
        assert row.as_csv() == "clean,12.500000,3.250000"
