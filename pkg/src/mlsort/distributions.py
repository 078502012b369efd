"""Seeded synthetic key generators and their exact CDFs.

Every generator draws from a Philox counter-based bit generator keyed by the
spec's 64-bit seed, so ``generate(spec, n)`` is a pure function of its
arguments.  Shards for parallel generation come from ``spawn_seeds``.
"""
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import ndtr

__all__ = [
    "Kind",
    "DistributionSpec",
    "uniform",
    "truncated_normal",
    "mixture",
    "preset",
    "PRESETS",
    "generate",
    "exact_cdf",
    "make_rng",
    "spawn_seeds",
]

_WEIGHT_TOL = 1e-12
_SEED_MASK = (1 << 64) - 1


class Kind(str, Enum):
    UNIFORM = "uniform"
    TRUNCATED_NORMAL = "truncnorm"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class DistributionSpec:
    """Key distribution on ``[lo, hi]``.

    ``mean``/``std`` are used by truncated normals only.  A mixture holds
    ``components`` as ``(weight, spec)`` pairs whose own bounds must lie
    inside the mixture's; component seeds are ignored.
    """

    kind: Kind
    lo: float
    hi: float
    mean: float = 0.0
    std: float = 1.0
    components: tuple = field(default=())
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        self.validate()

    def validate(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"bounds must satisfy lo < hi, got lo={self.lo!r} hi={self.hi!r}")
        if not 0 <= int(self.seed) <= _SEED_MASK:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if self.kind is Kind.TRUNCATED_NORMAL:
            if not (np.isfinite(self.std) and self.std > 0):
                raise ValueError(f"std must be positive, got {self.std!r}")
            if not np.isfinite(self.mean):
                raise ValueError(f"mean must be finite, got {self.mean!r}")
        if self.kind is Kind.MIXTURE:
            if not self.components:
                raise ValueError("mixture needs at least one component")
            weights = [w for w, _ in self.components]
            if any(not w > 0 for w in weights):
                raise ValueError(f"mixture weights must be positive, got {weights}")
            if abs(sum(weights) - 1.0) > _WEIGHT_TOL:
                raise ValueError(f"mixture weights must sum to 1, got {sum(weights)!r}")
            for _, comp in self.components:
                if comp.kind is Kind.MIXTURE:
                    raise ValueError("nested mixtures are not supported")
                if comp.lo < self.lo or comp.hi > self.hi:
                    raise ValueError(
                        f"component bounds [{comp.lo}, {comp.hi}] exceed mixture "
                        f"bounds [{self.lo}, {self.hi}]"
                    )

    @property
    def weights(self):
        return np.array([w for w, _ in self.components])

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def uniform(lo=-1000.0, hi=1000.0, seed=0):
    return DistributionSpec(Kind.UNIFORM, float(lo), float(hi), seed=seed, name="uniform")


def truncated_normal(mean=0.0, std=1.0, lo=-3.0, hi=3.0, seed=0):
    return DistributionSpec(
        Kind.TRUNCATED_NORMAL, float(lo), float(hi), mean=float(mean), std=float(std),
        seed=seed, name="truncnorm",
    )


def mixture(components, lo=None, hi=None, seed=0, name="mixture"):
    components = tuple((float(w), c) for w, c in components)
    lo = min(c.lo for _, c in components) if lo is None else float(lo)
    hi = max(c.hi for _, c in components) if hi is None else float(hi)
    return DistributionSpec(Kind.MIXTURE, lo, hi, components=components, seed=seed, name=name)


def _gauss_mixture(parts, lo, hi, seed, name):
    # parts: (weight, centre, std) in units of the half-width around the midpoint
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    comps = [
        (w, truncated_normal(mid + c * half, s * half, lo, hi)) for w, c, s in parts
    ]
    return mixture(comps, lo, hi, seed=seed, name=name)


def _preset_uniform(lo, hi, seed):
    return uniform(lo, hi, seed)


def _preset_truncnorm(lo, hi, seed):
    spec = truncated_normal((lo + hi) / 2.0, 0.3 * (hi - lo) / 2.0, lo, hi, seed)
    return spec


def _preset_bimodal(lo, hi, seed):
    return _gauss_mixture([(0.5, -0.4, 0.12), (0.5, 0.4, 0.12)], lo, hi, seed, "bimodal")


def _preset_trimodal(lo, hi, seed):
    # skewed: one narrow dominant mode, one broad, one very narrow
    parts = [(0.5, -0.5, 0.08), (0.3, 0.1, 0.2), (0.2, 0.6, 0.05)]
    return _gauss_mixture(parts, lo, hi, seed, "trimodal")


def _preset_comb5(lo, hi, seed):
    parts = [(0.2, c, 0.03) for c in (-0.8, -0.4, 0.0, 0.4, 0.8)]
    return _gauss_mixture(parts, lo, hi, seed, "comb5")


# The three mixtures are stand-ins for "nontrivial" multi-modal densities.
PRESETS = {
    "uniform": _preset_uniform,
    "truncnorm": _preset_truncnorm,
    "bimodal": _preset_bimodal,
    "trimodal": _preset_trimodal,
    "comb5": _preset_comb5,
}


def preset(name, seed=0, lo=-1000.0, hi=1000.0):
    """Named distribution on ``[lo, hi]`` (default the [-1000, 1000] window)."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    spec = factory(float(lo), float(hi), int(seed))
    return replace(spec, name=name)


def make_rng(seed):
    """The library's generator: Philox-4x64 keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & _SEED_MASK))


def spawn_seeds(seed, k):
    """``k`` independent 64-bit child seeds, for sharded generation."""
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(k)]


def _draw_truncnorm(rng, spec, n):
    out = np.empty(n)
    filled = 0
    accept = max(_truncnorm_mass(spec), 1e-3)
    while filled < n:
        need = n - filled
        batch = rng.normal(spec.mean, spec.std, int(need / accept * 1.1) + 16)
        batch = batch[(batch >= spec.lo) & (batch <= spec.hi)][:need]
        out[filled:filled + batch.size] = batch
        filled += batch.size
    return out


def _truncnorm_mass(spec):
    a = (spec.lo - spec.mean) / spec.std
    b = (spec.hi - spec.mean) / spec.std
    return float(ndtr(b) - ndtr(a))


def _draw(rng, spec, n):
    if spec.kind is Kind.UNIFORM:
        # uniform() draws from [lo, hi); the closed upper bound is not needed
        return rng.uniform(spec.lo, spec.hi, n)
    if spec.kind is Kind.TRUNCATED_NORMAL:
        return _draw_truncnorm(rng, spec, n)
    which = rng.choice(len(spec.components), size=n, p=spec.weights)
    out = np.empty(n)
    for i, (_, comp) in enumerate(spec.components):
        mask = which == i
        out[mask] = _draw(rng, comp, int(mask.sum()))
    return out


def generate(spec, n):
    """Draw ``n`` keys from ``spec``; identical ``(spec, n)`` gives identical output."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    spec.validate()
    return _draw(make_rng(spec.seed), spec, int(n))


def _cdf(spec, x):
    if spec.kind is Kind.UNIFORM:
        return (x - spec.lo) / (spec.hi - spec.lo)
    if spec.kind is Kind.TRUNCATED_NORMAL:
        a = ndtr((spec.lo - spec.mean) / spec.std)
        b = ndtr((spec.hi - spec.mean) / spec.std)
        return (ndtr((x - spec.mean) / spec.std) - a) / (b - a)
    total = np.zeros_like(x)
    for w, comp in spec.components:
        total += w * np.clip(_cdf(comp, np.clip(x, comp.lo, comp.hi)), 0.0, 1.0)
    return total


def exact_cdf(spec, x):
    """F(x) of ``spec``; clamps to 0 below ``lo`` and 1 above ``hi``.

    Accepts a scalar or an array and returns the same shape.
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.clip(_cdf(spec, np.clip(xa, spec.lo, spec.hi)), 0.0, 1.0)
    out[xa <= spec.lo] = 0.0
    out[xa >= spec.hi] = 1.0
    return float(out[0]) if scalar else out
