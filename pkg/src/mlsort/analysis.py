"""Bucket-occupancy statistics, rank-deviation statistics and sortedness checks."""
from dataclasses import dataclass
from math import exp, lgamma, log, log1p

import numpy as np

from ._kernels import is_sorted_asc
from ._validation import check_order

__all__ = [
    "OccupancyHistogram",
    "DeviationStats",
    "occupancy_histogram",
    "expected_occupancy",
    "occupancy_fit",
    "deviation_stats",
    "true_rank_blocks",
    "verify_sorted",
]

FIT_QS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class OccupancyHistogram:
    """``counts[q]`` = number of buckets holding exactly q keys, out of ``n`` buckets."""

    counts: dict
    n: int

    @property
    def total_keys(self):
        return sum(q * c for q, c in self.counts.items())

    def proportion(self, q):
        return self.counts.get(q, 0) / self.n if self.n else 0.0

    def to_dict(self):
        return {
            "n_buckets": self.n,
            "total_keys": self.total_keys,
            "counts": {str(q): c for q, c in sorted(self.counts.items())},
        }


@dataclass(frozen=True)
class DeviationStats:
    """Summary of ``|estimated rank - true rank|`` over a key set."""

    max_abs: int
    mean_abs: float
    histogram: tuple  # histogram[d] = number of keys with deviation d

    def to_dict(self):
        return {
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "histogram": [[d, c] for d, c in enumerate(self.histogram) if c],
        }


def occupancy_histogram(bucket_sizes):
    """Histogram of bucket sizes.

    Accepts a ``BucketArray`` or a plain sequence of per-bucket counts.
    """
    sizes = getattr(bucket_sizes, "sizes", bucket_sizes)
    sizes = np.asarray(sizes, dtype=np.int64)
    counts = np.bincount(sizes) if sizes.size else np.zeros(0, dtype=np.int64)
    return OccupancyHistogram({q: int(c) for q, c in enumerate(counts) if c}, int(sizes.size))


def expected_occupancy(n, q):
    """P(a bucket holds q of n keys) when each key lands uniformly in one of n buckets.

    Binomial(n, 1/n) evaluated in log space.
    """
    if n < 1 or q < 0:
        raise ValueError(f"need n >= 1 and q >= 0, got n={n}, q={q}")
    if q > n:
        raise ValueError(f"q={q} exceeds n={n}")
    if n == 1:
        return 1.0 if q == 1 else 0.0
    log_p = (
        lgamma(n + 1) - lgamma(q + 1) - lgamma(n - q + 1)
        - q * log(n)
        + (n - q) * log1p(-1.0 / n)
    )
    return exp(log_p)


def occupancy_fit(hist, qs=FIT_QS):
    """Largest ``|observed proportion - expected_occupancy|`` over ``qs``."""
    n = hist.n
    if n == 0:
        return 0.0
    worst = 0.0
    for q in qs:
        if q > n:
            continue
        worst = max(worst, abs(hist.proportion(q) - expected_occupancy(n, q)))
    return worst


def true_rank_blocks(keys, truth):
    """For each key, the block ``[first, last]`` of positions its value occupies in ``truth``."""
    first = np.searchsorted(truth, keys, side="left")
    last = np.searchsorted(truth, keys, side="right") - 1
    return first, last


def deviation_stats(keys, ranks, truth):
    """Rank error of ``ranks`` (estimates for ``keys``) against sorted ``truth``.

    A key whose value occurs several times in ``truth`` is measured against
    the nearest rank in its block.  Raises ``ValueError`` if the lengths differ,
    ``truth`` is unsorted, or a key does not occur in ``truth``.
    """
    keys = np.asarray(keys, dtype=np.float64)
    ranks = np.asarray(ranks, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.float64)
    if not keys.shape == ranks.shape == truth.shape:
        raise ValueError(
            f"length mismatch: {keys.size} keys, {ranks.size} ranks, {truth.size} truth values"
        )
    if not verify_sorted(truth):
        raise ValueError("truth must be sorted ascending")
    if keys.size == 0:
        return DeviationStats(0, 0.0, ())
    first, last = true_rank_blocks(keys, truth)
    missing = np.flatnonzero(last < first)
    if missing.size:
        raise ValueError(f"key {keys[missing[0]]!r} at index {missing[0]} is absent from truth")
    dev = np.maximum(first - ranks, 0) + np.maximum(ranks - last, 0)
    hist = np.bincount(dev)
    return DeviationStats(int(dev.max()), float(dev.mean()), tuple(int(c) for c in hist))


def verify_sorted(seq, order="ascending"):
    a = np.asarray(seq, dtype=np.float64)
    if check_order(order) == "descending":
        a = a[::-1]
    return bool(is_sorted_asc(np.ascontiguousarray(a)))
