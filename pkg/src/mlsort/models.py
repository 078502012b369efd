"""CDF models: the piecewise-linear interpolant and the one-hidden-layer GVM.

Both map a key to a normalized rank in the ascending convention: a key at
empirical quantile ``p`` predicts roughly ``p``.  The GVM is trained by a
seeded Monte-Carlo coordinate search instead of back-propagation; with
``enforce_monotone`` every accepted parameter set satisfies the per-neuron
sign condition ``w1 * w2 * beta >= 0``, which makes the network
non-decreasing on the whole real line.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_keys, check_positive_int
from .distributions import make_rng
from .exceptions import NonFiniteKeyError, TrainingError

__all__ = [
    "CdfModel",
    "GvmParams",
    "TrainConfig",
    "PiecewiseLinearModel",
    "gvm_forward",
    "check_monotone",
    "train_gvm",
    "pl_fit",
    "pl_predict",
    "GVMRegressor",
    "PiecewiseLinearCDF",
]

PARAMS_FORMAT = "mlsort.gvm"
PARAMS_VERSION = 1


class CdfModel(Protocol):
    """What the sorter needs from a model."""

    def predict(self, X) -> np.ndarray: ...

    @property
    def is_monotone(self) -> bool: ...

    @property
    def n_neurons(self) -> int: ...


@dataclass(frozen=True, eq=False)
class GvmParams:
    """Weights of ``y = sum_j w2[j] * f0(beta[j] * (w1[j] * xh - b[j]))``.

    ``xh`` is the key rescaled from ``[input_lo, input_hi]`` to ``[-1, 1]``.
    """

    w1: np.ndarray
    w2: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    input_lo: float
    input_hi: float
    activation: str = "logistic"
    final_loss: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("w1", "w2", "b", "beta"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = self.w1.shape[0]
        if m < 1 or any(getattr(self, k).shape != (m,) for k in ("w2", "b", "beta")):
            raise ValueError("w1, w2, b, beta must be 1-D arrays of one common length >= 1")
        if not self.input_lo < self.input_hi:
            raise ValueError(f"input_lo must be < input_hi, got {self.input_lo}, {self.input_hi}")
        if self.activation != "logistic":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def m(self):
        return self.w1.shape[0]

    @property
    def scale(self):
        return 2.0 / (self.input_hi - self.input_lo)

    def __eq__(self, other):
        if not isinstance(other, GvmParams):
            return NotImplemented
        return (
            all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("w1", "w2", "b", "beta"))
            and (self.input_lo, self.input_hi, self.activation) == (other.input_lo, other.input_hi, other.activation)
        )

    def to_dict(self):
        return {
            "format": PARAMS_FORMAT,
            "version": PARAMS_VERSION,
            "m": self.m,
            "activation": self.activation,
            "input_lo": self.input_lo,
            "input_hi": self.input_hi,
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
            "b": self.b.tolist(),
            "beta": self.beta.tolist(),
            "final_loss": self.final_loss,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != PARAMS_FORMAT:
            raise ValueError(f"not a GVM parameter document: format={doc.get('format')!r}")
        if doc.get("version") != PARAMS_VERSION:
            raise ValueError(f"unsupported GVM parameter version {doc.get('version')!r}")
        params = cls(
            w1=doc["w1"], w2=doc["w2"], b=doc["b"], beta=doc["beta"],
            input_lo=float(doc["input_lo"]), input_hi=float(doc["input_hi"]),
            activation=doc.get("activation", "logistic"),
            final_loss=doc.get("final_loss"), seed=doc.get("seed"),
        )
        if params.m != doc["m"]:
            raise ValueError(f"m={doc['m']} does not match array length {params.m}")
        return params

    # json's float repr round-trips IEEE doubles exactly
    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrainConfig:
    """Monte-Carlo search settings.

    ``init="quantile"`` centres neuron j on the key where the targets cross
    ``(j + 1/2) / m``; ``init="random"`` draws every parameter uniformly from a
    sign-feasible box.
    """

    m: int = 50
    iterations: int = 2000
    perturb_scale: float = 0.1
    target_loss: float = 0.0
    seed: int = 0
    enforce_monotone: bool = True
    init: str = "quantile"

    def __post_init__(self):
        check_positive_int(self.m, "m")
        check_positive_int(self.iterations, "iterations")
        if not self.perturb_scale > 0:
            raise ValueError(f"perturb_scale must be > 0, got {self.perturb_scale!r}")
        if self.init not in ("quantile", "random"):
            raise ValueError(f"init must be 'quantile' or 'random', got {self.init!r}")


def check_monotone(params):
    """Sufficient condition for a non-decreasing network: every w1*w2*beta >= 0."""
    return bool(np.all(params.w1 * params.w2 * params.beta >= 0.0))


def _forward(params, x, n_jobs=1):
    out = np.empty_like(x)
    args = (params.w1, params.w2, params.b, params.beta, float(params.input_lo), params.scale)
    if n_jobs <= 1 or x.size < 2 * n_jobs:
        evals = _kernels.gvm_forward(*args, x, out)
        return out, evals
    bounds = np.linspace(0, x.size, n_jobs + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futures = [
            pool.submit(_kernels.gvm_forward, *args, x[lo:hi], out[lo:hi])
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        evals = sum(f.result() for f in futures)
    return out, evals


def gvm_forward(params, x):
    """Network output for a scalar or an array of keys (no finiteness check)."""
    scalar = np.ndim(x) == 0
    xa = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    y, _ = _forward(params, xa)
    return float(y[0]) if scalar else y


def _check_pairs(keys, targets):
    keys = check_keys(keys)
    targets = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    if targets.shape != keys.shape:
        raise ValueError(f"got {keys.size} keys but {targets.size} targets")
    bad = np.flatnonzero(~np.isfinite(targets))
    if bad.size:
        raise NonFiniteKeyError(bad[0], float(targets[bad[0]]), what="target")
    return keys, targets


def _initial_params(xh, t, cfg, rng):
    m = cfg.m
    if cfg.init == "random":
        w1 = 1.0 - rng.random(m)  # (0, 1]
        beta = 1.0 - rng.random(m)
        w2 = rng.uniform(0.0, 1.0 / m, m)
        b = rng.uniform(-1.0, 1.0, m)
        return np.column_stack([w1, w2, b, beta])
    order = np.argsort(xh, kind="stable")
    xs = xh[order]
    ts = np.maximum.accumulate(t[order])
    t_lo, t_hi = ts[0], ts[-1]
    span = t_hi - t_lo
    if span <= 0:
        # flat targets: one neuron carries the level, the rest start idle
        w2 = np.zeros(m)
        w2[0] = t_lo / 0.5 if t_lo else 0.0
        return np.column_stack([np.ones(m), w2, np.zeros(m), np.ones(m)])
    levels = t_lo + span * np.linspace(0.0, 1.0, 2 * m + 1)
    # xs ascending, ts non-decreasing; interp needs increasing abscissae, so
    # collapse runs of equal targets to their first key
    first = np.concatenate([[True], np.diff(ts) > 0])
    crossings = np.interp(levels, ts[first], xs[first])
    b = crossings[1::2]
    width = np.maximum(crossings[2::2] - crossings[0:-1:2], 1e-3)
    beta = 4.0 / width
    w2 = np.full(m, span / m)
    return np.column_stack([np.ones(m), w2, b, beta])


def _train(keys, targets, cfg):
    keys, targets = _check_pairs(keys, targets)
    lo, hi = float(keys.min()), float(keys.max())
    if keys.size == 1:
        # one pair is always fittable; centre it in the input window
        lo, hi = lo - 1.0, hi + 1.0
    elif not lo < hi:
        raise TrainingError(f"all {keys.size} training keys equal {lo!r}; cannot normalize inputs")
    scale = 2.0 / (hi - lo)
    xh = (keys - lo) * scale - 1.0
    rng = make_rng(cfg.seed)
    P = np.ascontiguousarray(_initial_params(xh, targets, cfg, rng))
    S = np.full_like(P, cfg.perturb_scale)
    js = rng.integers(0, cfg.m, cfg.iterations)
    ks = rng.integers(0, 4, cfg.iterations)
    zs = rng.standard_normal(cfg.iterations)
    history = np.empty(cfg.iterations)
    loss, n_acc, n_iter = _kernels.mc_train(
        xh, targets, P, S, js, ks, zs, float(cfg.target_loss), bool(cfg.enforce_monotone), history
    )
    params = GvmParams(
        w1=P[:, 0], w2=P[:, 1], b=P[:, 2], beta=P[:, 3],
        input_lo=lo, input_hi=hi, final_loss=float(loss), seed=int(cfg.seed),
    )
    return params, history[:n_acc].copy(), int(n_iter)


def train_gvm(keys, targets, cfg=TrainConfig()):
    """Fit GVM parameters to ``(key, target)`` pairs by Monte-Carlo search.

    Each proposal perturbs one scalar of one neuron by
    ``N(0, 1) * step * (1 + |value|)`` and is kept only if the mean squared
    error strictly drops (and, when ``cfg.enforce_monotone``, the sign
    condition still holds).  ``step`` starts at ``cfg.perturb_scale`` and is
    adapted per coordinate: x1.5 after an acceptance, x0.95 after a rejection.
    """
    params, _, _ = _train(keys, targets, cfg)
    return params


@dataclass(frozen=True)
class PiecewiseLinearModel:
    knots: np.ndarray = field(repr=False)

    @property
    def n0(self):
        return self.knots.shape[0]


def pl_fit(sorted_sample):
    knots = check_keys(sorted_sample, name="sorted_sample").copy()
    if knots.size < 2:
        raise ValueError(f"need at least 2 knots, got {knots.size}")
    if np.any(np.diff(knots) < 0):
        raise ValueError("sample must be sorted ascending")
    knots.setflags(write=False)
    return PiecewiseLinearModel(knots)


def pl_predict(model, x):
    """Linear interpolation of ``i / N0`` between consecutive knots.

    0 below the first knot, 1 above the last.  With repeated knots the
    interval starts at the last copy, so the map stays non-decreasing.
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
    k = model.knots
    n0 = k.shape[0]
    i = np.searchsorted(k, xa, side="right") - 1
    inner = (i >= 0) & (i < n0 - 1)
    out = np.where(i < 0, 0.0, 1.0)
    ii = i[inner]
    left, right = k[ii], k[ii + 1]
    width = right - left
    frac = np.divide(xa[inner] - left, width, out=np.zeros_like(width), where=width > 0)
    out[inner] = (ii + frac) / n0
    out[i == n0 - 1] = np.where(xa[i == n0 - 1] == k[-1], (n0 - 1) / n0, 1.0)
    return float(out[0]) if scalar else out


class GVMRegressor(RegressorMixin, BaseEstimator):
    """Single-hidden-layer logistic network fit by Monte-Carlo search.

    Parameters
    ----------
    n_neurons : int
        Hidden-layer width M.  50 suits multi-modal data, 10 is enough for
        near-uniform CDFs.
    iterations : int
        Maximum number of proposals.
    perturb_scale : float
        Initial relative proposal step.
    target_loss : float
        Stop as soon as the training MSE is at or below this value.
    enforce_monotone : bool
        Reject proposals that break ``w1 * w2 * beta >= 0``.
    init : {"quantile", "random"}
    random_state : int
        Seed for the Philox generator driving initialization and proposals.
    n_jobs : int
        Threads used by ``predict``; results do not depend on it.
    """

    def __init__(self, n_neurons=50, iterations=2000, perturb_scale=0.1, target_loss=0.0,
                 enforce_monotone=True, init="quantile", random_state=0, n_jobs=1):
        self.n_neurons = n_neurons
        self.iterations = iterations
        self.perturb_scale = perturb_scale
        self.target_loss = target_loss
        self.enforce_monotone = enforce_monotone
        self.init = init
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self):
        return TrainConfig(
            m=self.n_neurons, iterations=self.iterations, perturb_scale=self.perturb_scale,
            target_loss=self.target_loss, seed=self.random_state,
            enforce_monotone=self.enforce_monotone, init=self.init,
        )

    @classmethod
    def from_config(cls, cfg, n_jobs=1):
        return cls(
            n_neurons=cfg.m, iterations=cfg.iterations, perturb_scale=cfg.perturb_scale,
            target_loss=cfg.target_loss, enforce_monotone=cfg.enforce_monotone,
            init=cfg.init, random_state=cfg.seed, n_jobs=n_jobs,
        )

    @classmethod
    def from_params(cls, params, **kwargs):
        """Wrap already-trained parameters (e.g. loaded from JSON)."""
        est = cls(n_neurons=params.m, **kwargs)
        est.params_ = params
        est.loss_history_ = np.empty(0)
        est.n_iter_ = 0
        est.activation_evals_ = 0
        return est

    def fit(self, X, y):
        self.params_, self.loss_history_, self.n_iter_ = _train(X, y, self._config())
        self.activation_evals_ = 0
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        x = check_keys(X, allow_empty=True)
        out, evals = _forward(self.params_, x, self.n_jobs)
        self.activation_evals_ += evals
        return out

    @property
    def is_monotone(self):
        check_is_fitted(self, "params_")
        return check_monotone(self.params_)

    @property
    def final_loss_(self):
        return self.params_.final_loss


class PiecewiseLinearCDF(RegressorMixin, BaseEstimator):
    """Empirical CDF of a sample, linearly interpolated between order statistics.

    ``fit`` sorts the sample itself; ``y`` is ignored (targets are ``i / N0``).
    """

    n_neurons = 0

    def fit(self, X, y=None):
        self.model_ = pl_fit(np.sort(check_keys(X)))
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return pl_predict(self.model_, check_keys(X, allow_empty=True))

    @property
    def is_monotone(self):
        return True
