"""``mlsort`` command line: gen, sort, bench, analyze.

Every option can also be set through an environment variable named
``MLSORT_<COMMAND>_<OPTION>``, e.g. ``MLSORT_SORT_M=10``.

Exit codes: 0 success, 1 invalid input or flags, 2 I/O error,
3 internal verification failure.
"""
import json
import logging
import sys
import warnings

import click
import numpy as np

from . import analysis, bench, io
from .distributions import PRESETS, generate, preset, truncated_normal
from .exceptions import DistributionDriftWarning, NonFiniteKeyError, VerificationError
from .models import TrainConfig
from .sorter import SortConfig, estimate_ranks, run_ml_sort
from ._validation import check_keys

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3
ENV_PREFIX = "MLSORT"

logger = logging.getLogger("mlsort")


def _emit_json(doc):
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _train_options(f):
    f = click.option("--model", type=click.Choice(["gvm", "pl"]), default="gvm", show_default=True)(f)
    f = click.option("--m", "m", type=click.IntRange(min=1), default=50, show_default=True,
                     help="Hidden neurons (10 suits near-uniform data).")(f)
    f = click.option("--n0", type=click.IntRange(min=1), default=None,
                     help="Training sample size [default: min(10000, N)].")(f)
    f = click.option("--iterations", type=click.IntRange(min=1), default=2000, show_default=True,
                     help="Monte-Carlo proposals.")(f)
    f = click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=0, show_default=True)(f)
    f = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                     help="Shards for the inference pass; output does not depend on it.")(f)
    return f


def _sort_config(n0, model, m, iterations, seed, threads, order="ascending", comb_size=4,
                 tail_fraction=0.0, monotone=True):
    train = TrainConfig(m=m, iterations=iterations, seed=seed, enforce_monotone=monotone)
    return SortConfig(n0=n0, model_kind=model, train=train, comb_size=comb_size, order=order,
                      seed=seed, tail_fraction=tail_fraction, n_jobs=threads)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress to stderr (-vv for debug).")
def cli(verbose):
    """Machine-Learning Sort: learned-CDF bucket sorting and its statistics."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command()
@click.option("--dist", type=click.Choice(sorted(PRESETS)), default="uniform", show_default=True)
@click.option("--lo", type=float, default=-1000.0, show_default=True)
@click.option("--hi", type=float, default=1000.0, show_default=True)
@click.option("--mean", type=float, default=None, help="truncnorm only [default: midpoint].")
@click.option("--std", type=float, default=None, help="truncnorm only [default: 0.15 * (hi - lo)].")
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(io.FORMATS), default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True)
def gen(dist, lo, hi, mean, std, n, seed, fmt, out):
    """Write N keys drawn from a named distribution."""
    if not lo < hi:
        raise click.BadParameter(f"--lo ({lo}) must be smaller than --hi ({hi})", param_hint="--lo/--hi")
    if dist == "truncnorm" and (mean is not None or std is not None):
        mean = (lo + hi) / 2 if mean is None else mean
        std = 0.15 * (hi - lo) if std is None else std
        if not std > 0:
            raise click.BadParameter(f"must be positive, got {std}", param_hint="--std")
        spec = truncated_normal(mean, std, lo, hi, seed)
    else:
        spec = preset(dist, seed=seed, lo=lo, hi=hi)
    keys = generate(spec, n)
    io.write_keys(out, keys, fmt)
    logger.info("wrote %d %s keys to %s", n, dist, out)


@cli.command("sort")
@click.option("--in", "in_path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True)
@click.option("--format", "fmt", type=click.Choice(io.FORMATS), default="text", show_default=True,
              help="Format of both input and output files.")
@click.option("--order", type=click.Choice(["asc", "desc"]), default="asc", show_default=True)
@_train_options
@click.option("--comb-size", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--tail-fraction", type=click.FloatRange(0.0, 0.5, max_open=True), default=0.0, show_default=True)
@click.option("--no-monotone", is_flag=True, help="Train without the sign constraint (comb repair path).")
@click.option("--estimates-out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Also write 'key rank' lines for every input key (for `analyze`).")
@click.option("--omit-timings", is_flag=True, help="Leave wall-clock timings out of the stats JSON.")
def sort_cmd(in_path, out, fmt, order, model, m, n0, iterations, seed, threads, comb_size,
             tail_fraction, no_monotone, estimates_out, omit_timings):
    """Sort a key file; print run statistics as JSON."""
    keys = io.read_keys(in_path, fmt)
    if keys.size == 0:
        raise click.BadParameter(f"{in_path} holds no keys", param_hint="--in")
    keys = check_keys(keys)
    if n0 is not None and n0 > keys.size:
        raise click.BadParameter(f"{n0} exceeds the {keys.size} input keys", param_hint="--n0")
    cfg = _sort_config(n0, model, m, iterations, seed, threads, order, comb_size, tail_fraction,
                       not no_monotone)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DistributionDriftWarning)
        run = run_ml_sort(keys, cfg)
    drift = [str(w.message) for w in caught if issubclass(w.category, DistributionDriftWarning)]
    for msg in drift:
        click.echo(f"warning: {msg}", err=True)

    io.write_keys(out, run.output, fmt)
    back = io.read_keys(out, fmt)
    verified = back.size == keys.size and analysis.verify_sorted(back, cfg.order)
    if not verified:
        raise VerificationError(f"{out} failed the read-back sortedness check")

    stats = {
        "n": int(keys.size),
        "n0": run.n0,
        "model": cfg.model_kind,
        "m": cfg.train.m if cfg.model_kind == "gvm" else 0,
        "iterations": cfg.train.iterations,
        "seed": seed,
        "order": cfg.order,
        "threads": threads,
        "path": run.path,
        "low_tail": run.low_tail,
        "high_tail": run.high_tail,
        "drift_warning": bool(drift),
        "escalations": run.escalations,
        "final_loss": getattr(getattr(run.model, "params_", None), "final_loss", None),
        "verified": bool(verified),
    }
    if run.buckets is not None:
        hist = analysis.occupancy_histogram(run.buckets)
        stats["occupancy"] = {**hist.to_dict(), "fit_error": analysis.occupancy_fit(hist)}
    if not omit_timings:
        stats["timings_ns"] = run.timings_ns
    if estimates_out is not None:
        ranks = (estimate_ranks(run.model, keys, keys.size) if run.model is not None
                 else np.zeros(keys.size, dtype=np.int64))
        io.write_estimates(estimates_out, keys, ranks)
    _emit_json(stats)


@cli.command("bench")
@click.option("--dist", "dists", type=click.Choice(sorted(PRESETS)), multiple=True,
              default=("uniform", "truncnorm"), show_default=True)
@click.option("--sizes", default="1000,10000,100000,1000000", show_default=True,
              help="Comma-separated list of N.")
@click.option("--repeats", type=click.IntRange(min=1), default=10, show_default=True)
@_train_options
@click.option("--full-scale", is_flag=True, help=f"Allow N above {bench.DESK_MAX_N}.")
@click.option("--no-python-baseline", is_flag=True, help="Skip the built-in sorted() baseline.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="CSV path [default: stdout].")
def bench_cmd(dists, sizes, repeats, model, m, n0, iterations, seed, threads, full_scale,
              no_python_baseline, out):
    """Run the distributions x sizes x repeats matrix and write CSV."""
    try:
        size_list = [int(float(s)) for s in sizes.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"not a list of integers: {sizes!r}", param_hint="--sizes") from None
    if not size_list or min(size_list) < 1:
        raise click.BadParameter("sizes must be positive", param_hint="--sizes")
    if max(size_list) > bench.DESK_MAX_N and not full_scale:
        raise click.BadParameter(f"N above {bench.DESK_MAX_N} needs --full-scale", param_hint="--sizes")
    if n0 is not None and n0 > min(size_list):
        raise click.BadParameter(f"{n0} exceeds the smallest size {min(size_list)}", param_hint="--n0")
    cfg = _sort_config(n0, model, m, iterations, seed, threads)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DistributionDriftWarning)
        gen_rows = bench.run_bench(dists, size_list, repeats, cfg, seed, not no_python_baseline)
        if out is None:
            bench.write_csv((rows.append(r) or r for r in gen_rows), sys.stdout)
        else:
            with open(out, "w", newline="") as fh:
                bench.write_csv((rows.append(r) or r for r in gen_rows), fh)
    for dist in dists:
        slope = bench.scaling_slope(rows, "sort_ns", dist)
        if slope is not None:
            click.echo(f"{dist}: log-log slope of sort time vs N = {slope:.3f}", err=True)
    failed = sum(1 for r in rows if not r["verified"])
    if failed:
        click.echo(f"{failed} of {len(rows)} runs failed; see the error column", err=True)


@cli.command("analyze")
@click.option("--estimates", "est_path", type=click.Path(dir_okay=False), required=True,
              help="'key rank' lines, or keys listed in estimated-rank order.")
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), required=True,
              help="The same keys fully sorted ascending.")
@click.option("--format", "fmt", type=click.Choice(io.FORMATS), default="text", show_default=True)
def analyze_cmd(est_path, truth_path, fmt):
    """Occupancy histogram, occupancy fit and rank deviation as JSON."""
    keys, ranks = io.read_estimates(est_path, fmt)
    truth = io.read_keys(truth_path, fmt)
    if keys.size != truth.size:
        raise click.BadParameter(
            f"{keys.size} estimates but {truth.size} truth keys", param_hint="--estimates/--truth"
        )
    if keys.size == 0:
        raise click.BadParameter("no keys", param_hint="--estimates")
    keys = check_keys(keys)
    truth = check_keys(truth)
    if not analysis.verify_sorted(truth):
        raise click.BadParameter(f"{truth_path} is not sorted ascending", param_hint="--truth")
    if ranks.min() < 0 or ranks.max() >= keys.size:
        raise click.BadParameter(f"ranks must lie in [0, {keys.size - 1}]", param_hint="--estimates")
    hist = analysis.occupancy_histogram(np.bincount(ranks, minlength=keys.size))
    dev = analysis.deviation_stats(keys, ranks, truth)
    expected = {str(q): analysis.expected_occupancy(keys.size, q) for q in analysis.FIT_QS if q <= keys.size}
    _emit_json({
        "n": int(keys.size),
        "occupancy": hist.to_dict(),
        "expected_occupancy": expected,
        "occupancy_fit": analysis.occupancy_fit(hist),
        "deviation": dev.to_dict(),
    })


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="mlsort", auto_envvar_prefix=ENV_PREFIX, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_VALIDATION
    except click.ClickException as exc:
        exc.show()
        return EXIT_VALIDATION
    except NonFiniteKeyError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except VerificationError as exc:
        click.echo(f"verification failed: {exc}", err=True)
        return EXIT_VERIFY
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
