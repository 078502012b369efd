"""Learned rank index.

Keys are sorted once, a GVM is trained on ``(key, position / N)`` pairs and
the largest prediction error over the stored keys is recorded.  A lookup then
costs one forward pass plus a binary search inside a window of that radius
around the predicted position.  This is the "sparse hash table" use of
learned sorting: the key's code is its rank, no hashing is involved.

On disk an index is two files: ``<stem>.json`` (versioned header with the
model parameters) and ``<stem>.keys`` (raw little-endian float64 keys).
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from ._validation import check_keys
from .distributions import make_rng
from .exceptions import NonFiniteKeyError, VerificationError
from .models import GVMRegressor, GvmParams
from .sorter import SortConfig, estimate_ranks, ml_sort

__all__ = ["LookupResult", "RankIndex", "build_index", "query"]

INDEX_FORMAT = "mlsort.rank-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class LookupResult:
    """Positions ``[lo, hi)`` holding the probe; ``lo == hi`` is the insertion point."""

    found: bool
    lo: int
    hi: int

    @property
    def insertion_point(self):
        return self.lo


class RankIndex:
    """Sorted keys plus a rank model and its measured worst-case error."""

    def __init__(self, sorted_keys, model, max_observed_deviation):
        self.sorted_keys = sorted_keys
        self.model = model
        self.max_observed_deviation = int(max_observed_deviation)
        self.fallbacks = 0

    def __len__(self):
        return self.sorted_keys.size

    def predicted_positions(self, x):
        if self.model is None:
            return np.zeros(np.size(x), dtype=np.int64)
        return estimate_ranks(self.model, x, len(self))

    def search(self, probes):
        """Vectorized lookup; returns ``(first, stop)`` position arrays."""
        probes = check_keys(probes, allow_empty=True, name="probes")
        centres = self.predicted_positions(probes)
        first = np.empty(probes.size, dtype=np.int64)
        stop = np.empty(probes.size, dtype=np.int64)
        self.fallbacks += _kernels.window_search(
            self.sorted_keys, probes, centres, self.max_observed_deviation, first, stop
        )
        return first, stop

    def query(self, x):
        if not np.isfinite(x):
            raise NonFiniteKeyError(0, x)
        first, stop = self.search(np.array([x], dtype=np.float64))
        return LookupResult(bool(stop[0] > first[0]), int(first[0]), int(stop[0]))

    def save(self, stem):
        stem = Path(stem)
        keys_path = stem.with_suffix(".keys")
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "n": len(self),
            "max_observed_deviation": self.max_observed_deviation,
            "keys_file": keys_path.name,
            "dtype": "<f8",
            "model": None if self.model is None else self.model.params_.to_dict(),
        }
        self.sorted_keys.astype("<f8").tofile(keys_path)
        stem.with_suffix(".json").write_text(json.dumps(header, indent=2))
        return stem.with_suffix(".json"), keys_path

    @classmethod
    def load(cls, stem):
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text())
        if header.get("format") != INDEX_FORMAT:
            raise ValueError(f"not a rank index header: format={header.get('format')!r}")
        if header.get("version") != INDEX_VERSION:
            raise ValueError(f"unsupported rank index version {header.get('version')!r}")
        keys = np.fromfile(stem.with_name(header["keys_file"]), dtype="<f8").astype(np.float64)
        if keys.size != header["n"]:
            raise ValueError(f"header says {header['n']} keys, file holds {keys.size}")
        model = None
        if header["model"] is not None:
            model = GVMRegressor.from_params(GvmParams.from_dict(header["model"]))
        return cls(keys, model, header["max_observed_deviation"])


def build_index(data, cfg=SortConfig()):
    """Sort ``data``, train the rank model and measure its worst error.

    Every stored key is looked up through its window before returning; a miss
    raises ``VerificationError``.
    """
    data = check_keys(data)
    keys = ml_sort(data, SortConfig(**{**cfg.__dict__, "order": "ascending"}))
    n = keys.size
    model = None
    if keys[0] != keys[-1]:
        n0 = min(n, cfg.n0 or 10_000)
        pos = np.sort(make_rng(cfg.seed).choice(n, size=n0, replace=False))
        model = GVMRegressor.from_config(cfg.train, n_jobs=cfg.n_jobs)
        model.fit(keys[pos], pos / n)
    index = RankIndex(keys, model, 0)
    r_hat = index.predicted_positions(keys)
    first = np.searchsorted(keys, keys, side="left")
    last = np.searchsorted(keys, keys, side="right") - 1
    index.max_observed_deviation = int(np.max(np.maximum(r_hat - first, last - r_hat)).clip(0))

    got_first, got_stop = index.search(keys)
    if index.fallbacks or not (np.array_equal(got_first, first) and np.array_equal(got_stop, last + 1)):
        raise VerificationError("rank window does not contain every stored key's position")
    return index


def query(index, x):
    return index.query(x)
