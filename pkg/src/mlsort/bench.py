"""Benchmark matrix: distributions x sizes x repeats, one CSV row per run.

The ``sort_ns`` column excludes model training, which is reported on its own
in ``train_ns``; ``total_ns`` is their sum.
"""
import csv
import logging
import time
from dataclasses import replace

import numpy as np

from .analysis import deviation_stats, occupancy_histogram, occupancy_fit, verify_sorted
from .distributions import generate, preset, spawn_seeds
from .sorter import estimate_ranks, run_ml_sort

logger = logging.getLogger(__name__)

COLUMNS = (
    "distribution",
    "n",
    "n0",
    "m",
    "model",
    "repeat",
    "seed",
    "train_ns",
    "infer_place_ns",
    "fixup_ns",
    "sort_ns",
    "total_ns",
    "baseline_numpy_ns",
    "baseline_python_ns",
    "occupancy_fit",
    "dev_max",
    "dev_mean",
    "low_tail",
    "high_tail",
    "verified",
    "error",
)

DESK_MAX_N = 10**6


def warm_up(cfg):
    """Compile every kernel once so the first timed run is not charged for it."""
    x = generate(preset("uniform", seed=1), 2048)
    run_ml_sort(x, replace(cfg, n0=None, train=replace(cfg.train, iterations=1)))


def bench_one(dist, n, repeat, seed, cfg, python_baseline=True):
    row = dict.fromkeys(COLUMNS, "")
    row.update(distribution=dist, n=n, repeat=repeat, seed=seed, model=cfg.model_kind,
               m=cfg.train.m if cfg.model_kind == "gvm" else 0)
    try:
        data = generate(preset(dist, seed=seed), n)
        run_cfg = replace(cfg, seed=seed, train=replace(cfg.train, seed=seed))
        run = run_ml_sort(data, run_cfg)

        t0 = time.perf_counter_ns()
        truth = np.sort(data, kind="quicksort")
        row["baseline_numpy_ns"] = time.perf_counter_ns() - t0
        if python_baseline:
            as_list = data.tolist()
            t0 = time.perf_counter_ns()
            sorted(as_list)
            row["baseline_python_ns"] = time.perf_counter_ns() - t0

        row.update(run.timings_ns)
        row.update(n0=run.n0, low_tail=run.low_tail, high_tail=run.high_tail)
        if run.buckets is not None:
            row["occupancy_fit"] = occupancy_fit(occupancy_histogram(run.buckets))
            dev = deviation_stats(data, estimate_ranks(run.model, data, n), truth)
            row.update(dev_max=dev.max_abs, dev_mean=dev.mean_abs)
        expected = truth[::-1] if cfg.order == "descending" else truth
        row["verified"] = bool(verify_sorted(run.output, cfg.order) and np.array_equal(run.output, expected))
    except Exception as exc:  # recorded per row; the matrix keeps going
        logger.exception("bench run %s n=%d repeat=%d failed", dist, n, repeat)
        row["verified"] = False
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_bench(dists, sizes, repeats, cfg, seed=0, python_baseline=True):
    """Yield one row dict per (distribution, size, repeat)."""
    warm_up(cfg)
    seeds = spawn_seeds(seed, repeats)
    for dist in dists:
        for n in sizes:
            for rep in range(repeats):
                row = bench_one(dist, n, rep, seeds[rep], cfg, python_baseline)
                logger.info("%s n=%d rep=%d sort_ns=%s verified=%s", dist, n, rep, row["sort_ns"], row["verified"])
                yield row


def write_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def loglog_slope(ns, times):
    """Least-squares slope of log(time) against log(n)."""
    ns = np.asarray(ns, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    slope, _ = np.polyfit(np.log(ns), np.log(times), 1)
    return float(slope)


def scaling_slope(rows, column="sort_ns", distribution=None):
    """Slope over the per-size mean of ``column`` for rows that succeeded."""
    by_n = {}
    for row in rows:
        if row["error"] or (distribution and row["distribution"] != distribution):
            continue
        by_n.setdefault(int(row["n"]), []).append(float(row[column]))
    if len(by_n) < 2:
        return None
    ns = sorted(by_n)
    return loglog_slope(ns, [np.mean(by_n[n]) for n in ns])
