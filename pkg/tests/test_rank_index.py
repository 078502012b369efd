import json

import numpy as np
import pytest

from mlsort.distributions import generate, preset
from mlsort.exceptions import NonFiniteKeyError
from mlsort.models import TrainConfig
from mlsort.rank_index import RankIndex, build_index, query
from mlsort.sorter import SortConfig

CFG = SortConfig(train=TrainConfig(m=10, iterations=1000))


@pytest.fixture(scope="module")
def index():
    return build_index(generate(preset("bimodal", seed=3), 20_000), CFG)


def full_search(keys, x):
    return int(np.searchsorted(keys, x, "left")), int(np.searchsorted(keys, x, "right"))


class TestQueries:
    def test_stored_keys(self, index):
        for x in index.sorted_keys[::97]:
            res = query(index, x)
            assert res.found and (res.lo, res.hi) == full_search(index.sorted_keys, x)

    def test_absent_and_outside(self, index):
        keys = index.sorted_keys
        probes = [keys[0] - 1.0, keys[-1] + 1.0, (keys[100] + keys[101]) / 2, -1e300, 1e300]
        for x in probes:
            res = query(index, x)
            if keys[100] < x < keys[101]:
                assert not res.found
            assert (res.lo, res.hi) == full_search(keys, x)
            assert res.insertion_point == res.lo

    def test_vectorized_random_probes(self, index):
        probes = np.random.default_rng(1).uniform(-1100, 1100, 5000)
        first, stop = index.search(probes)
        assert np.array_equal(first, np.searchsorted(index.sorted_keys, probes, "left"))
        assert np.array_equal(stop, np.searchsorted(index.sorted_keys, probes, "right"))

    def test_non_finite_probe(self, index):
        with pytest.raises(NonFiniteKeyError):
            query(index, float("nan"))

    def test_stored_keys_need_no_fallback(self, index):
        before = index.fallbacks
        index.search(index.sorted_keys)
        assert index.fallbacks == before

    def test_wrong_radius_falls_back_but_stays_correct(self, index):
        narrow = RankIndex(index.sorted_keys, index.model, 0)
        probes = index.sorted_keys[::13]
        first, stop = narrow.search(probes)
        assert np.array_equal(first, np.searchsorted(index.sorted_keys, probes, "left"))
        assert np.array_equal(stop, np.searchsorted(index.sorted_keys, probes, "right"))
        if index.max_observed_deviation > 0:
            assert narrow.fallbacks > 0


class TestEdgeCases:
    def test_duplicates_only(self):
        idx = build_index(np.full(100, 7.0), CFG)
        res = query(idx, 7.0)
        assert res.found and (res.lo, res.hi) == (0, 100)
        assert query(idx, 6.0).hi == 0 and query(idx, 8.0).lo == 100

    def test_single_key(self):
        idx = build_index([3.0], CFG)
        assert idx.max_observed_deviation == 0
        assert query(idx, 3.0) == query(idx, 3.0)
        assert (query(idx, 3.0).lo, query(idx, 3.0).hi) == (0, 1)

    def test_heavy_duplicates(self):
        data = np.repeat(np.arange(50.0), 40)
        idx = build_index(np.random.default_rng(0).permutation(data), CFG)
        res = query(idx, 17.0)
        assert (res.lo, res.hi) == (680, 720)


class TestPersistence:
    def test_round_trip(self, index, tmp_path):
        header_path, keys_path = index.save(tmp_path / "idx")
        header = json.loads(header_path.read_text())
        assert header["format"] == "mlsort.rank-index" and header["version"] == 1
        assert keys_path.stat().st_size == 8 * len(index)
        loaded = RankIndex.load(tmp_path / "idx")
        assert loaded.max_observed_deviation == index.max_observed_deviation
        probes = np.random.default_rng(2).uniform(-1000, 1000, 1000)
        assert all(np.array_equal(a, b) for a, b in zip(loaded.search(probes), index.search(probes)))

    def test_rejects_foreign_header(self, tmp_path):
        (tmp_path / "x.json").write_text(json.dumps({"format": "nope"}))
        with pytest.raises(ValueError, match="format"):
            RankIndex.load(tmp_path / "x")
