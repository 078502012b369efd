import math
from fractions import Fraction

import numpy as np
import pytest

from mlsort.analysis import (
    deviation_stats, expected_occupancy, occupancy_fit, occupancy_histogram, verify_sorted,
)


def binomial_oracle(n, q):
    """Exact rational P(Binomial(n, 1/n) = q)."""
    p = Fraction(1, n)
    return float(math.comb(n, q) * p**q * (1 - p) ** (n - q))


class TestHistogram:
    def test_counts(self):
        h = occupancy_histogram([0, 2, 1, 0, 2])
        assert h.counts == {0: 2, 1: 1, 2: 2}
        assert h.n == 5 and h.total_keys == 5
        assert h.proportion(2) == 0.4 and h.proportion(7) == 0.0

    def test_to_dict(self):
        assert occupancy_histogram([3, 0, 0]).to_dict() == {
            "n_buckets": 3, "total_keys": 3, "counts": {"0": 2, "3": 1},
        }

    def test_empty(self):
        assert occupancy_histogram([]).n == 0


class TestExpectedOccupancy:
    def test_single_bucket(self):
        assert expected_occupancy(1, 1) == 1.0
        assert expected_occupancy(1, 0) == 0.0

    def test_two_buckets(self):
        assert expected_occupancy(2, 0) == pytest.approx(0.25, abs=1e-15)
        assert expected_occupancy(2, 1) == pytest.approx(0.5, abs=1e-15)

    def test_poisson_limit(self):
        assert expected_occupancy(10**6, 1) == pytest.approx(math.exp(-1), abs=1e-4)
        assert expected_occupancy(10**6, 0) == pytest.approx(math.exp(-1), abs=1e-4)
        assert expected_occupancy(10**6, 2) == pytest.approx(math.exp(-1) / 2, abs=1e-4)

    @pytest.mark.parametrize("n", [2, 3, 7, 50, 300])
    def test_matches_exact_binomial(self, n):
        for q in range(min(n, 12) + 1):
            assert expected_occupancy(n, q) == pytest.approx(binomial_oracle(n, q), rel=1e-10, abs=1e-300)

    @pytest.mark.parametrize("n", [1, 5, 64, 1000])
    def test_sums_to_one(self, n):
        assert sum(expected_occupancy(n, q) for q in range(n + 1)) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n, q", [(0, 0), (5, -1), (3, 4)])
    def test_invalid(self, n, q):
        with pytest.raises(ValueError):
            expected_occupancy(n, q)


class TestOccupancyFit:
    def test_everything_in_one_bucket(self):
        n = 10**4
        sizes = np.zeros(n, dtype=int)
        sizes[0] = n
        # empty proportion ~1 against e^-1, single-key proportion 0 against e^-1
        assert occupancy_fit(occupancy_histogram(sizes)) == pytest.approx(1 - math.exp(-1), abs=1e-3)

    def test_single_bucket_single_key(self):
        assert occupancy_fit(occupancy_histogram([1])) == 0.0

    def test_uniform_random_placement(self):
        n = 10**5
        ranks = np.random.default_rng(0).integers(0, n, n)
        assert occupancy_fit(occupancy_histogram(np.bincount(ranks, minlength=n))) < 0.02

    def test_perfect_ranks_are_far_from_law(self):
        # one key per bucket: proportion(1) = 1 against e^-1
        assert occupancy_fit(occupancy_histogram(np.ones(1000, dtype=int))) == pytest.approx(
            1 - expected_occupancy(1000, 1), abs=1e-12)


class TestDeviation:
    def test_exact(self):
        truth = np.array([1.0, 2.0, 3.0])
        d = deviation_stats(truth, [0, 1, 2], truth)
        assert d.max_abs == 0 and d.mean_abs == 0.0 and d.histogram == (3,)

    def test_offsets(self):
        truth = np.array([1.0, 2.0, 3.0, 4.0])
        d = deviation_stats([4.0, 1.0, 3.0, 2.0], [1, 0, 2, 1], truth)
        assert d.max_abs == 2 and d.mean_abs == 0.5
        assert d.histogram == (3, 0, 1)
        assert d.to_dict()["histogram"] == [[0, 3], [2, 1]]

    def test_ties_use_nearest_rank_in_block(self):
        truth = np.array([0.0, 5.0, 5.0, 5.0, 9.0])
        d = deviation_stats([5.0, 5.0, 5.0, 9.0, 0.0], [1, 3, 0, 4, 0], truth)
        assert d.histogram == (4, 1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            deviation_stats([1.0], [0, 1], [1.0])

    def test_unsorted_truth(self):
        with pytest.raises(ValueError, match="sorted"):
            deviation_stats([1.0, 2.0], [0, 1], [2.0, 1.0])

    def test_absent_key(self):
        with pytest.raises(ValueError, match="absent"):
            deviation_stats([1.0, 7.0], [0, 1], [1.0, 2.0])


class TestVerifySorted:
    @pytest.mark.parametrize("seq, order, ok", [
        ([], "ascending", True),
        ([1.0], "ascending", True),
        ([1.0, 1.0, 2.0], "ascending", True),
        ([2.0, 1.0], "ascending", False),
        ([2.0, 1.0, 1.0], "descending", True),
        ([1.0, 2.0], "desc", False),
    ])
    def test_examples(self, seq, order, ok):
        assert verify_sorted(seq, order) is ok
