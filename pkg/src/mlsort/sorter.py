"""Machine-Learning Sort.

Pipeline: draw a random training sample, sort it, fit a CDF model to
``(a'_i, i / N0)``, send keys outside the sample's range to a comparison sort,
estimate each remaining key's rank as ``round(model(x) * N)``, scatter keys
into N rank buckets, insertion-sort every bucket and concatenate.  With a
monotone model the buckets are already ordered relative to each other, so the
repair is local; otherwise a bounded-displacement comb pass is used, escalating
to a full comparison sort if it cannot finish the job.
"""
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_keys, check_order, check_positive_int
from .distributions import make_rng
from .exceptions import DistributionDriftWarning, NonFiniteKeyError, VerificationError
from .models import GVMRegressor, PiecewiseLinearCDF, TrainConfig

__all__ = [
    "SortConfig",
    "BucketArray",
    "RankEstimate",
    "SortRun",
    "draw_training_set",
    "build_rank_pairs",
    "estimate_rank",
    "estimate_ranks",
    "bucket_place",
    "fixup_buckets",
    "comb_fixup",
    "split_tails",
    "ml_sort",
    "run_ml_sort",
    "MLSorter",
]

logger = logging.getLogger(__name__)

DEFAULT_N0 = 10_000
DRIFT_FRACTION = 0.10


@dataclass(frozen=True)
class SortConfig:
    """Settings for one sort.

    ``n0=None`` means ``min(10_000, N)``.  ``tail_fraction`` widens the tail
    regions from "outside the sample's [min, max]" to "outside the sample's
    [f, 1 - f] quantiles".
    """

    n0: Optional[int] = None
    model_kind: str = "gvm"
    train: TrainConfig = field(default_factory=TrainConfig)
    comb_size: int = 4
    order: str = "ascending"
    seed: int = 0
    tail_fraction: float = 0.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n0 is not None:
            check_positive_int(self.n0, "n0")
        if self.model_kind not in ("gvm", "pl"):
            raise ValueError(f"model_kind must be 'gvm' or 'pl', got {self.model_kind!r}")
        check_positive_int(self.comb_size, "comb_size")
        check_positive_int(self.n_jobs, "n_jobs")
        object.__setattr__(self, "order", check_order(self.order))
        if not 0.0 <= self.tail_fraction < 0.5:
            raise ValueError(f"tail_fraction must be in [0, 0.5), got {self.tail_fraction!r}")


@dataclass(frozen=True)
class RankEstimate:
    key: float
    r: int


@dataclass(frozen=True)
class BucketArray:
    """N rank buckets in CSR layout: bucket r is ``keys[offsets[r]:offsets[r + 1]]``."""

    offsets: np.ndarray
    keys: np.ndarray

    @property
    def n(self):
        return self.offsets.shape[0] - 1

    @property
    def total(self):
        return int(self.offsets[-1])

    @property
    def sizes(self):
        return np.diff(self.offsets)

    def __len__(self):
        return self.n

    def __getitem__(self, r):
        return self.keys[self.offsets[r]:self.offsets[r + 1]]

    def __iter__(self):
        for r in range(self.n):
            yield self[r]


@dataclass
class SortRun:
    """Output of ``run_ml_sort`` plus everything a report needs."""

    output: np.ndarray
    model: object
    buckets: Optional[BucketArray]
    ranks: Optional[np.ndarray]
    body: Optional[np.ndarray]
    n0: int
    path: str
    low_tail: int = 0
    high_tail: int = 0
    drift: bool = False
    escalations: int = 0
    timings_ns: dict = field(default_factory=dict)


def draw_training_set(data, n0, seed):
    """``n0`` keys sampled without replacement, returned sorted ascending."""
    data = np.asarray(data, dtype=np.float64)
    n0 = check_positive_int(n0, "n0")
    if n0 > data.size:
        raise ValueError(f"n0={n0} exceeds the number of keys N={data.size}")
    idx = make_rng(seed).choice(data.size, size=n0, replace=False)
    return np.sort(data[idx])


def build_rank_pairs(sorted_sample):
    """Training pairs ``(a'_i, i / N0)``; returns (keys, targets)."""
    keys = np.asarray(sorted_sample, dtype=np.float64)
    return keys, np.arange(keys.size, dtype=np.float64) / keys.size


def _round_half_away(v):
    f = np.floor(np.abs(v))
    return np.copysign(f + (np.abs(v) - f >= 0.5), v)


def estimate_ranks(model, X, n):
    """Vectorized ``clamp(round(model(x) * n), 0, n - 1)`` as int64."""
    n = check_positive_int(n, "n")
    y = model.predict(X)
    v = np.clip(y * n, -1.0, float(n))
    return np.clip(_round_half_away(v), 0, n - 1).astype(np.int64)


def estimate_rank(model, x, n):
    if not math.isfinite(x):
        raise NonFiniteKeyError(0, x)
    r = estimate_ranks(model, np.array([x], dtype=np.float64), n)
    return RankEstimate(float(x), int(r[0]))


def bucket_place(data, model, n):
    """Scatter every key into bucket ``estimate_rank(model, key, n)``.

    Keys keep their input order inside a bucket.
    """
    data = check_keys(data, allow_empty=True)
    ranks = estimate_ranks(model, data, n)
    offsets, placed = _kernels.counting_place(ranks, data, int(n))
    return BucketArray(offsets, placed)


def _concat_sorted_buckets(buckets):
    keys = buckets.keys.copy()
    _kernels.sort_buckets(buckets.offsets, keys)
    return keys


def fixup_buckets(buckets, order="ascending"):
    """Insertion-sort each bucket and concatenate in label order.

    Only correct when the buckets came from a monotone model.
    """
    out = _concat_sorted_buckets(buckets)
    return out[::-1].copy() if check_order(order) == "descending" else out


def _comb(seq, window):
    if window < 2:
        raise ValueError(f"comb window must be >= 2, got {window}")
    out = np.array(seq, dtype=np.float64, copy=True)
    _kernels.windowed_insertion(out, window)
    escalations = 0
    max_doublings = max(1, math.ceil(math.log2(max(out.size, 2))))
    while not _kernels.is_sorted_asc(out):
        if escalations == max_doublings:
            logger.info("comb fix-up gave up at window %d; full comparison sort", window)
            out.sort()
            return out, escalations + 1
        escalations += 1
        window *= 2
        _kernels.windowed_insertion(out, window)
    return out, escalations


def comb_fixup(nearly_sorted, l):
    """Sort a nearly sorted sequence with a sliding window of ``l`` elements.

    If a pass leaves the sequence unsorted the window doubles, up to
    ``log2(N)`` times, after which a comparison sort finishes the job.
    """
    return _comb(nearly_sorted, int(l))[0]


def split_tails(data, sample_lo, sample_hi):
    """Split keys into (body, low_tail, high_tail); the tails come back sorted.

    Warns with ``DistributionDriftWarning`` when either tail holds more than
    10% of the keys.
    """
    if not sample_lo <= sample_hi:
        raise ValueError(f"sample_lo must be <= sample_hi, got {sample_lo}, {sample_hi}")
    data = np.asarray(data, dtype=np.float64)
    low_mask = data < sample_lo
    high_mask = data > sample_hi
    low = np.sort(data[low_mask])
    high = np.sort(data[high_mask])
    body = data[~(low_mask | high_mask)]
    limit = DRIFT_FRACTION * data.size
    if low.size > limit or high.size > limit:
        warnings.warn(
            f"{low.size} keys below and {high.size} keys above the training sample's range "
            f"(N={data.size}); the input does not look like the sampled distribution",
            DistributionDriftWarning,
            stacklevel=2,
        )
    return body, low, high


def _sample_bounds(sample, tail_fraction):
    n0 = sample.size
    lo_i = int(math.floor(tail_fraction * (n0 - 1)))
    return float(sample[lo_i]), float(sample[n0 - 1 - lo_i])


def _make_model(cfg):
    if cfg.model_kind == "pl":
        return PiecewiseLinearCDF()
    return GVMRegressor.from_config(cfg.train, n_jobs=cfg.n_jobs)


def _fit(data, cfg):
    n0 = min(DEFAULT_N0, data.size) if cfg.n0 is None else cfg.n0
    sample = draw_training_set(data, n0, cfg.seed)
    lo, hi = _sample_bounds(sample, cfg.tail_fraction)
    if sample[0] == sample[-1]:
        return None, lo, hi, n0
    keys, targets = build_rank_pairs(sample)
    model = _make_model(cfg).fit(keys, targets)
    return model, lo, hi, n0


def _sort_with_model(data, model, lo, hi, n0, cfg, train_ns=0):
    t0 = time.perf_counter_ns()
    n = data.size
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DistributionDriftWarning)
        body, low, high = split_tails(data, lo, hi)
    drift = any(issubclass(w.category, DistributionDriftWarning) for w in caught)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)

    buckets = ranks = None
    escalations = 0
    if model is None:
        # degenerate sample: every body key equals the single sampled value
        t1 = time.perf_counter_ns()
        body_sorted = body
        path = "constant"
    else:
        ranks = estimate_ranks(model, body, n)
        offsets, placed = _kernels.counting_place(ranks, body, n)
        buckets = BucketArray(offsets, placed)
        t1 = time.perf_counter_ns()
        body_sorted = _concat_sorted_buckets(buckets)
        if model.is_monotone:
            path = "monotone"
        else:
            path = "comb"
            body_sorted, escalations = _comb(body_sorted, max(2, cfg.comb_size))

    out = np.concatenate([low, body_sorted, high])
    if not _kernels.is_sorted_asc(out):
        # floating-point corner cases only; the comb path always terminates sorted
        logger.warning("bucket concatenation left the output unsorted; repairing with comb")
        out, extra = _comb(out, max(2, cfg.comb_size))
        escalations += extra
    if not _kernels.is_sorted_asc(out):
        raise VerificationError("output failed final sortedness check")
    if cfg.order == "descending":
        out = out[::-1].copy()
    t2 = time.perf_counter_ns()
    timings = {
        "train_ns": int(train_ns),
        "infer_place_ns": t1 - t0,
        "fixup_ns": t2 - t1,
        "sort_ns": t2 - t0,
        "total_ns": int(train_ns) + t2 - t0,
    }
    return SortRun(
        output=out, model=model, buckets=buckets, ranks=ranks, body=body, n0=n0, path=path,
        low_tail=low.size, high_tail=high.size, drift=drift, escalations=escalations,
        timings_ns=timings,
    )


def run_ml_sort(data, cfg=SortConfig()):
    """Sort ``data`` and return the full ``SortRun`` record."""
    data = check_keys(data)
    if cfg.n0 is not None and cfg.n0 > data.size:
        raise ValueError(f"n0={cfg.n0} exceeds the number of keys N={data.size}")
    if data.size == 1:
        return SortRun(output=data.copy(), model=None, buckets=None, ranks=None, body=data.copy(),
                       n0=1, path="trivial",
                       timings_ns=dict.fromkeys(("train_ns", "infer_place_ns", "fixup_ns", "sort_ns", "total_ns"), 0))
    t0 = time.perf_counter_ns()
    model, lo, hi, n0 = _fit(data, cfg)
    train_ns = time.perf_counter_ns() - t0
    return _sort_with_model(data, model, lo, hi, n0, cfg, train_ns)


def ml_sort(data, cfg=SortConfig()):
    """Return a sorted copy of ``data`` (ascending unless ``cfg.order`` says otherwise)."""
    return run_ml_sort(data, cfg).output


class MLSorter(TransformerMixin, BaseEstimator):
    """Estimator front end for Machine-Learning Sort.

    ``fit`` learns the key distribution from a random sample of ``X``;
    ``transform`` sorts any key vector with the learned model (keys outside
    the sample's range go through a comparison sort); ``predict`` returns the
    estimated rank of each key among ``len(X)`` keys.

    The per-bucket insertion sort is stable, so equal keys keep their input
    order in ascending output.  Stability is not part of the contract.
    """

    def __init__(self, n0=None, model="gvm", n_neurons=50, iterations=2000, perturb_scale=0.1,
                 target_loss=0.0, enforce_monotone=True, comb_size=4, order="ascending",
                 tail_fraction=0.0, random_state=0, n_jobs=1):
        self.n0 = n0
        self.model = model
        self.n_neurons = n_neurons
        self.iterations = iterations
        self.perturb_scale = perturb_scale
        self.target_loss = target_loss
        self.enforce_monotone = enforce_monotone
        self.comb_size = comb_size
        self.order = order
        self.tail_fraction = tail_fraction
        self.random_state = random_state
        self.n_jobs = n_jobs

    @classmethod
    def from_config(cls, cfg):
        t = cfg.train
        return cls(
            n0=cfg.n0, model=cfg.model_kind, n_neurons=t.m, iterations=t.iterations,
            perturb_scale=t.perturb_scale, target_loss=t.target_loss,
            enforce_monotone=t.enforce_monotone, comb_size=cfg.comb_size, order=cfg.order,
            tail_fraction=cfg.tail_fraction, random_state=cfg.seed, n_jobs=cfg.n_jobs,
        )

    def get_config(self):
        train = TrainConfig(
            m=self.n_neurons, iterations=self.iterations, perturb_scale=self.perturb_scale,
            target_loss=self.target_loss, seed=self.random_state,
            enforce_monotone=self.enforce_monotone,
        )
        return SortConfig(
            n0=self.n0, model_kind=self.model, train=train, comb_size=self.comb_size,
            order=self.order, seed=self.random_state, tail_fraction=self.tail_fraction,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        cfg = self.get_config()
        X = check_keys(X)
        if cfg.n0 is not None and cfg.n0 > X.size:
            raise ValueError(f"n0={cfg.n0} exceeds the number of keys N={X.size}")
        t0 = time.perf_counter_ns()
        self.model_, self.sample_lo_, self.sample_hi_, self.n0_ = _fit(X, cfg)
        self.train_ns_ = time.perf_counter_ns() - t0
        return self

    def transform(self, X):
        check_is_fitted(self, "n0_")
        X = check_keys(X)
        self.run_ = _sort_with_model(
            X, self.model_, self.sample_lo_, self.sample_hi_, self.n0_, self.get_config(),
        )
        return self.run_.output

    def fit_transform(self, X, y=None):
        X = check_keys(X)
        self.fit(X)
        self.run_ = _sort_with_model(
            X, self.model_, self.sample_lo_, self.sample_hi_, self.n0_, self.get_config(),
            self.train_ns_,
        )
        return self.run_.output

    def predict(self, X):
        check_is_fitted(self, "n0_")
        X = check_keys(X)
        if self.model_ is None:
            return np.zeros(X.size, dtype=np.int64)
        return estimate_ranks(self.model_, X, X.size)
