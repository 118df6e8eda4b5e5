"""Benchmark instance generation and real-confidence computation.

Two families are produced:

``LAB``
    Every item draws a distribution family uniformly from uniform,
    truncated normal (at 0), fatigue-life, bimodal and gamma, then a target
    mean and variance, then solves the family parameters to match them.
    Costs are ``U(1, 10)``.
``APP``
    Per-transmission delays built from LAB-style draws scaled into
    ``(0, 10]`` by the largest raw sample of the instance (later truth
    draws beyond it clamp to 10); an attempt number in 1..4 with
    probabilities ``0.9, 0.09, 0.009, 0.001`` adds ``10 * (attempt - 1)``.
    Costs are
    ``10 / (mean + std) * U(0.8, 1.2)`` from the item's samples.

The :class:`TruthModel` keeps the generating distributions.  Solvers only
ever see the :class:`~ccmckp.instance.Instance`; the truth model is used to
compute real confidence levels.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Any, Sequence

import numpy as np
from scipy import optimize, special, stats

from .instance import Instance, Item, Solution, validate_solution

log = logging.getLogger(__name__)

__all__ = [
    "FAMILIES",
    "DistributionSpec",
    "ItemTruth",
    "TruthModel",
    "BenchmarkSpec",
    "GenerationError",
    "solve_distribution",
    "generate_lab",
    "generate_app",
    "generate",
    "sample_true_delay",
    "real_confidence",
    "preset_benchmarks",
    "preset",
    "APP_ATTEMPT_PROBS",
]

FAMILIES = ("uniform", "truncnorm", "fatiguelife", "bimodal", "gamma")

LAB_MEAN = (2.0, 8.0)
LAB_VAR = (1.0, 19.0)
GAMMA_MEAN = (0.5, 2.5)
GAMMA_VAR = (0.05, 0.625)
COST_RANGE = (1.0, 10.0)

APP_WINDOW = 10.0
_RAW_ATTEMPT = (0.9, 0.09, 0.009, 0.001)
APP_ATTEMPT_PROBS = tuple(p / math.fsum(_RAW_ATTEMPT) for p in _RAW_ATTEMPT)
APP_COST_NOISE = (0.8, 1.2)

BIMODAL_SPREAD = 0.5  # component sd as a fraction of the half-distance between modes
MAX_REDRAWS = 1000


class GenerationError(RuntimeError):
    pass


# ---------------------------------------------------------------- distributions

def _mills(a: float) -> float:
    """phi(a) / (1 - Phi(a)), stable for large ``a``."""
    return math.exp(-0.5 * a * a - 0.5 * math.log(2 * math.pi) - special.log_ndtr(-a))


def _truncnorm_std_moments(a: float) -> tuple[float, float]:
    """Mean and variance of a standard normal truncated to ``[a, inf)``."""
    lam = _mills(a)
    return lam, 1.0 + a * lam - lam * lam


def _truncnorm_params(mean: float, var: float) -> tuple[float, float]:
    """Pre-truncation ``(loc, scale)`` of a normal truncated at 0 with the
    given moments.  Requires ``var < mean**2``."""
    cv2 = var / mean**2
    if not 0 < cv2 < 0.98:
        raise GenerationError("truncated normal cannot reach this coefficient of variation")

    def f(a):
        lam, v = _truncnorm_std_moments(a)
        return v / (lam - a) ** 2 - cv2

    a = optimize.brentq(f, -40.0, 40.0, xtol=1e-14, rtol=1e-15, maxiter=500)
    lam, v = _truncnorm_std_moments(a)
    scale = math.sqrt(var / v)
    return -a * scale, scale


def _truncnorm_moments(loc: float, scale: float) -> tuple[float, float]:
    a = -loc / scale
    lam, v = _truncnorm_std_moments(a)
    return loc + scale * lam, scale * scale * v


def _bimodal_moments(c: float, d: float, s: float) -> tuple[float, float]:
    m1, v1 = _truncnorm_moments(c - d, s)
    m2, v2 = _truncnorm_moments(c + d, s)
    mean = 0.5 * (m1 + m2)
    second = 0.5 * (v1 + m1 * m1 + v2 + m2 * m2)
    return mean, second - mean * mean


def _bimodal_params(mean: float, var: float) -> tuple[float, float, float]:
    """Centre, half-distance and component sd of an equal two-component
    mixture of zero-truncated normals hitting the target moments."""
    k = BIMODAL_SPREAD
    d0 = math.sqrt(var / (1 + k * k))

    def resid(x):
        c, logd = x
        d = math.exp(logd)
        mu, v = _bimodal_moments(c, d, k * d)
        return [mu - mean, (v - var) / max(var, 1e-12)]

    # judged by residuals: hybr may report failure after converging to roundoff
    sol = optimize.root(resid, [mean, math.log(d0)], method="hybr", tol=1e-14)
    c, d = sol.x[0], math.exp(sol.x[1])
    mu, v = _bimodal_moments(c, d, k * d)
    if not (abs(mu - mean) < 1e-9 and abs(v - var) < 1e-9 and c > 0):
        raise GenerationError("bimodal moment matching failed")
    return c, d, k * d


def _fatiguelife_params(mean: float, var: float) -> tuple[float, float]:
    cv2 = var / mean**2
    if cv2 >= 5:
        raise GenerationError("fatigue-life cannot reach this coefficient of variation")
    # (5/4 - cv2/4) t^2 + (1 - cv2) t - cv2 = 0 with t = alpha^2
    a, b, c = 1.25 - cv2 / 4, 1 - cv2, -cv2
    t = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    alpha = math.sqrt(t)
    beta = mean / (1 + t / 2)
    return alpha, beta


@dataclass(frozen=True)
class DistributionSpec:
    """A fitted single-attempt weight distribution."""

    family: str
    mean: float
    var: float
    params: tuple[float, ...]

    def frozen(self):
        f, p = self.family, self.params
        if f == "uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if f == "truncnorm":
            loc, scale = p
            return stats.truncnorm(-loc / scale, np.inf, loc=loc, scale=scale)
        if f == "fatiguelife":
            return stats.fatiguelife(p[0], scale=p[1])
        if f == "gamma":
            return stats.gamma(p[0], scale=p[1])
        raise ValueError(f"no frozen scipy distribution for {f}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        f, p = self.family, self.params
        if f == "uniform":
            return rng.uniform(p[0], p[1], size)
        if f == "gamma":
            return rng.gamma(p[0], p[1], size)
        if f == "bimodal":
            c, d, s = p
            upper = rng.random(size) < 0.5
            lo = stats.truncnorm.rvs(-(c - d) / s, np.inf, loc=c - d, scale=s,
                                     size=size, random_state=rng)
            hi = stats.truncnorm.rvs(-(c + d) / s, np.inf, loc=c + d, scale=s,
                                     size=size, random_state=rng)
            return np.where(upper, hi, lo)
        return self.frozen().rvs(size=size, random_state=rng)

    def true_moments(self) -> tuple[float, float]:
        if self.family == "bimodal":
            return _bimodal_moments(*self.params)
        m, v = self.frozen().stats(moments="mv")
        return float(m), float(v)

    def quantile(self, q: float) -> float:
        if self.family == "bimodal":
            c, d, s = self.params
            comps = [stats.truncnorm(-(c - d) / s, np.inf, loc=c - d, scale=s),
                     stats.truncnorm(-(c + d) / s, np.inf, loc=c + d, scale=s)]
            return float(optimize.brentq(
                lambda x: 0.5 * (comps[0].cdf(x) + comps[1].cdf(x)) - q,
                0.0, c + d + 40 * s))
        return float(self.frozen().ppf(q))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "mean": self.mean, "var": self.var,
                "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DistributionSpec":
        return cls(d["family"], float(d["mean"]), float(d["var"]),
                   tuple(float(x) for x in d["params"]))


def solve_distribution(family: str, mean: float, var: float) -> DistributionSpec:
    """Fit ``family`` to the target moments or raise :class:`GenerationError`."""
    if family == "uniform":
        half = math.sqrt(3 * var)
        if mean - half < 0:
            raise GenerationError("uniform support would go negative")
        params = (mean - half, mean + half)
    elif family == "truncnorm":
        params = _truncnorm_params(mean, var)
    elif family == "fatiguelife":
        params = _fatiguelife_params(mean, var)
    elif family == "bimodal":
        params = _bimodal_params(mean, var)
    elif family == "gamma":
        params = (mean**2 / var, var / mean)
    else:
        raise ValueError(f"unknown family {family!r}")
    return DistributionSpec(family, float(mean), float(var), tuple(float(x) for x in params))


def _draw_lab_spec(rng: np.random.Generator) -> DistributionSpec:
    family = FAMILIES[int(rng.integers(len(FAMILIES)))]
    mean_rng, var_rng = (GAMMA_MEAN, GAMMA_VAR) if family == "gamma" else (LAB_MEAN, LAB_VAR)
    for _ in range(MAX_REDRAWS):
        mean = rng.uniform(*mean_rng)
        var = rng.uniform(*var_rng)
        try:
            return solve_distribution(family, mean, var)
        except GenerationError:
            continue
    raise GenerationError(f"could not fit {family} after {MAX_REDRAWS} redraws")


# ---------------------------------------------------------------- truth model

@dataclass(frozen=True)
class ItemTruth:
    """Generating distribution of one item.

    For APP items ``squash`` is the divisor mapping a base draw into the
    transmission window and ``attempt_probs`` the retransmission law.
    """

    base: DistributionSpec
    retransmission: bool = False
    squash: float = 1.0
    window: float = APP_WINDOW
    attempt_probs: tuple[float, ...] = ()

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        x = self.base.sample(rng, size)
        return self.retransmit(x, rng) if self.retransmission else x

    def retransmit(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Map raw single-attempt draws to delays with retransmissions."""
        base = np.minimum(self.window * x / self.squash, self.window)
        # keep exact zeros inside the (0, window] interval
        base = np.maximum(base, np.finfo(float).tiny)
        attempt = rng.choice(len(self.attempt_probs), size=x.shape[0], p=self.attempt_probs)
        return base + self.window * attempt

    def to_dict(self) -> dict[str, Any]:
        d = {"base": self.base.to_dict(), "retransmission": self.retransmission}
        if self.retransmission:
            d.update(squash=self.squash, window=self.window,
                     attempt_probs=list(self.attempt_probs))
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ItemTruth":
        if d.get("retransmission"):
            return cls(DistributionSpec.from_dict(d["base"]), True, float(d["squash"]),
                       float(d["window"]), tuple(float(p) for p in d["attempt_probs"]))
        return cls(DistributionSpec.from_dict(d["base"]))


@dataclass(frozen=True)
class TruthModel:
    family: str
    items: tuple[tuple[ItemTruth, ...], ...]
    capacity: float
    seed: int

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "W": self.capacity, "seed": self.seed,
                "items": [[it.to_dict() for it in c] for c in self.items]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TruthModel":
        return cls(d["family"], tuple(tuple(ItemTruth.from_dict(it) for it in c)
                                      for c in d["items"]),
                   float(d["W"]), int(d["seed"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def load(cls, source: IO[str] | IO[bytes] | str) -> "TruthModel":
        if isinstance(source, str):
            with open(source, "rb") as fh:
                return cls.from_dict(json.loads(fh.read()))
        return cls.from_dict(json.loads(source.read()))


@dataclass(frozen=True)
class BenchmarkSpec:
    family: str  # "LAB" or "APP"
    m: int
    N: int
    L: int
    capacity: float
    P0: float = 0.99
    name: str = ""

    def __post_init__(self) -> None:
        if self.family not in ("LAB", "APP"):
            raise ValueError("family must be LAB or APP")
        if min(self.m, self.N, self.L) < 1:
            raise ValueError("m, N and L must be positive")


def _clamp_capacity(classes, capacity: float, label: str) -> float:
    lo = sum(min(float(it.samples.min()) for it in c) for c in classes)
    hi = sum(max(float(it.samples.max()) for it in c) for c in classes)
    if capacity < lo or capacity > hi:
        clamped = min(max(capacity, lo), hi)
        log.warning("%s: capacity %g outside non-trivial band [%g, %g]; clamped to %g",
                    label, capacity, lo, hi, clamped)
        return clamped
    return capacity


def generate_lab(spec: BenchmarkSpec, seed: int) -> tuple[Instance, TruthModel]:
    if spec.family != "LAB":
        raise ValueError("generate_lab needs a LAB spec")
    rng = np.random.default_rng(seed)
    classes, truth = [], []
    for _ in range(spec.m):
        items, tr = [], []
        for _ in range(spec.N):
            d = _draw_lab_spec(rng)
            cost = rng.uniform(*COST_RANGE)
            it = ItemTruth(d)
            items.append(Item.from_samples(cost, it.sample(rng, spec.L)))
            tr.append(it)
        classes.append(tuple(items))
        truth.append(tuple(tr))
    W = _clamp_capacity(classes, spec.capacity, spec.name or "LAB")
    inst = Instance(tuple(classes), float(W), spec.P0, spec.name)
    return inst, TruthModel("LAB", tuple(truth), float(W), int(seed))


def generate_app(spec: BenchmarkSpec, seed: int) -> tuple[Instance, TruthModel]:
    if spec.family != "APP":
        raise ValueError("generate_app needs an APP spec")
    rng = np.random.default_rng(seed)
    specs = [[_draw_lab_spec(rng) for _ in range(spec.N)] for _ in range(spec.m)]
    raw = [[d.sample(rng, spec.L) for d in row] for row in specs]
    # one divisor for the whole instance: the largest raw single-attempt sample
    squash = max(float(x.max()) for row in raw for x in row)
    classes, truth = [], []
    for row_specs, row_raw in zip(specs, raw):
        items, tr = [], []
        for d, x in zip(row_specs, row_raw):
            it = ItemTruth(d, True, squash, APP_WINDOW, APP_ATTEMPT_PROBS)
            samples = it.retransmit(x, rng)
            cost = 10.0 / (samples.mean() + samples.std()) * rng.uniform(*APP_COST_NOISE)
            items.append(Item.from_samples(cost, samples))
            tr.append(it)
        classes.append(tuple(items))
        truth.append(tuple(tr))
    W = _clamp_capacity(classes, spec.capacity, spec.name or "APP")
    inst = Instance(tuple(classes), float(W), spec.P0, spec.name)
    return inst, TruthModel("APP", tuple(truth), float(W), int(seed))


def generate(spec: BenchmarkSpec, seed: int) -> tuple[Instance, TruthModel]:
    return (generate_lab if spec.family == "LAB" else generate_app)(spec, seed)


def sample_true_delay(truth: TruthModel, cls: int, item: int,
                      rng: np.random.Generator, size: int | None = None):
    """Draw from item ``(cls, item)``'s generating distribution."""
    x = truth.items[cls][item].sample(rng, 1 if size is None else size)
    return float(x[0]) if size is None else x


def real_confidence(truth: TruthModel, solution: Solution, draws: int = 10**7,
                    rng_seed: int = 0, capacity: float | None = None) -> float:
    """Fraction of ``draws`` fresh totals from the true generators within capacity."""
    if draws < 1:
        raise ValueError("draws must be positive")
    if len(solution.picks) != len(truth.items):
        raise ValueError("solution does not match truth model")
    W = truth.capacity if capacity is None else capacity
    rng = np.random.default_rng(rng_seed)
    chunk = 1 << 18
    hits = done = 0
    while done < draws:
        n = min(chunk, draws - done)
        tot = np.zeros(n)
        for i, j in enumerate(solution.picks):
            tot += truth.items[i][j].sample(rng, n)
        hits += int(np.count_nonzero(tot <= W))
        done += n
    return hits / draws


# ---------------------------------------------------------------- presets

# name: (m, N, L, LAB capacities, APP capacities)
_TABLE = {
    "ss1": (3, 5, 30, (11, 14), (21, 27)),
    "ss2": (4, 5, 30, (18, 26), (47, 49)),
    "ss3": (5, 5, 30, (11, 20), (27, 38)),
    "ss4": (5, 10, 30, (10, 16), (16, 27)),
    "ls1": (10, 10, 500, (19, 23), (32, 37)),
    "ls2": (10, 20, 500, (12, 15), (13, 16)),
    "ls3": (20, 10, 500, (25, 32), (43, 48)),
    "ls4": (30, 10, 500, (43, 52), (58, 70)),
    "ls5": (40, 10, 500, (55, 63), (85, 95)),
    "ls6": (50, 10, 500, (63, 75), (91, 100)),
}


def preset_benchmarks() -> list[BenchmarkSpec]:
    """All 40 (benchmark, capacity) settings of the two families."""
    out = []
    for family, col in (("LAB", 3), ("APP", 4)):
        for name, row in _TABLE.items():
            m, N, L = row[:3]
            for W in row[col]:
                out.append(BenchmarkSpec(family, m, N, L, float(W), 0.99,
                                         f"{family}-{name}-W{W}"))
    return out


def preset(name: str) -> BenchmarkSpec:
    """Look up a preset such as ``"LAB-ss1-W11"``."""
    for spec in preset_benchmarks():
        if spec.name == name:
            return spec
    raise KeyError(f"unknown preset {name!r}")
