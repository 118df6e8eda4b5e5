"""Chance-constraint evaluation from raw sample data.

For a solution the random total weight is modelled by its empirical
(bootstrap) distribution: one sample drawn uniformly from each picked item.
There are ``L**m`` equally likely index tuples.  The solution is feasible
when at most ``floor((1 - P0) * L**m)`` of them have a sum strictly above
the capacity; a sum equal to the capacity counts as fitting.  The same rule
is used by every evaluator here.

Evaluators
----------
brute_force_confidence
    Full enumeration, the test oracle.  Refuses above a guard limit.
exact_feasibility
    Max-heap walk over tuple sums in non-increasing order; stops as soon as
    the verdict is known.
monte_carlo_confidence, accelerated_mc
    Bootstrap simulation, optionally preceded by a cheap screening test
    that proves infeasibility from a handful of sorted-sample tuples.
bernstein_lower_bound, hoeffding_lower_bound, gaussian_feasibility
    Moment-based surrogates.
"""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._heapwalk import heap_walk
from .instance import Instance, Solution, validate_solution

__all__ = [
    "Method",
    "EvalOutcome",
    "MomentSummary",
    "GuardLimitExceeded",
    "violation_allowance",
    "brute_force_count",
    "brute_force_confidence",
    "brute_force_feasible",
    "exact_feasibility",
    "popped_sums_prefix",
    "monte_carlo_confidence",
    "build_screen_tuples",
    "fast_screen",
    "accelerated_mc",
    "moment_summary",
    "picked_moments",
    "bernstein_lower_bound",
    "hoeffding_lower_bound",
    "norm_cdf",
    "norm_ppf",
    "gaussian_feasibility",
    "required_sample_size",
    "Evaluator",
]

BRUTE_FORCE_LIMIT = 10**7
DEFAULT_MC_DRAWS = 10**6
SCREEN_CAP = 64
_MC_CHUNK = 1 << 16


class Method(str, enum.Enum):
    EXACT_HEAP = "exact"
    BRUTE_FORCE = "brute"
    MONTE_CARLO = "mc"
    ACCELERATED_MC = "amc"
    GAUSSIAN_QUANTILE = "gauss"


@dataclass(frozen=True)
class EvalOutcome:
    """Verdict of one evaluation.

    ``confidence`` is ``None`` when the evaluator stopped knowing only the
    verdict.  ``work`` counts heap pops, screening tuples or simulation
    draws depending on ``method``; ``draws`` counts simulation draws only.
    """

    feasible: bool
    confidence: float | None
    method: Method
    work: int = 0
    draws: int = 0
    screened: bool = False

    @property
    def verdict(self) -> str:
        return "Feasible" if self.feasible else "Infeasible"


class GuardLimitExceeded(RuntimeError):
    pass


def _p0_fraction(p0: float) -> Fraction:
    # decimal reading of P0 so that e.g. 0.99 * 100 is exactly 99
    return Fraction(repr(float(p0)))


def violation_allowance(p0: float, total: int) -> int:
    """Largest number of violating tuples a feasible solution may have."""
    return math.floor((1 - _p0_fraction(p0)) * total)


# ---------------------------------------------------------------- brute force

def brute_force_count(instance: Instance, solution: Solution,
                      limit: int = BRUTE_FORCE_LIMIT) -> tuple[int, int]:
    """Return ``(n_fitting, L**m)`` by enumerating every index tuple."""
    validate_solution(instance, solution)
    L, m = instance.sample_count, instance.num_classes
    total = L**m
    if total > limit:
        raise GuardLimitExceeded(f"L**m = {total} exceeds brute-force limit {limit}")
    rows = instance.picked_samples(solution)
    sums = rows[0]
    for r in rows[1:]:
        sums = np.add.outer(sums, r).ravel()
    return int(np.count_nonzero(sums <= instance.capacity)), total


def brute_force_confidence(instance: Instance, solution: Solution,
                           limit: int = BRUTE_FORCE_LIMIT) -> float:
    fit, total = brute_force_count(instance, solution, limit)
    return fit / total


def brute_force_feasible(instance: Instance, solution: Solution,
                         limit: int = BRUTE_FORCE_LIMIT) -> bool:
    fit, total = brute_force_count(instance, solution, limit)
    return total - fit <= violation_allowance(instance.confidence_level, total)


# ---------------------------------------------------------------- exact heap

def _python_walk(desc: np.ndarray, capacity: float, max_pops: int,
                 stop_at_or_below: bool, record: bool):
    """Reference walk: push all ``m`` neighbours, de-duplicate with a set."""
    m, L = desc.shape

    def tsum(t):
        s = 0.0
        for i in range(m):
            s += desc[i, t[i]]
        return s

    root = (0,) * m
    heap = [(-tsum(root), root)]
    seen = {root}
    rec: list[float] = []
    above = pops = 0
    stopped = False
    while heap and pops < max_pops:
        neg, t = heapq.heappop(heap)
        s = -neg
        pops += 1
        if record:
            rec.append(s)
        if s <= capacity:
            if stop_at_or_below:
                stopped = True
                break
        else:
            above += 1
        for j in range(m):
            if t[j] + 1 < L:
                nt = t[:j] + (t[j] + 1,) + t[j + 1:]
                if nt not in seen:
                    seen.add(nt)
                    heapq.heappush(heap, (-tsum(nt), nt))
    return above, stopped, np.array(rec), len(seen)


def _walk(desc, capacity, max_pops, stop, record, engine):
    if engine == "compiled":
        return heap_walk(np.ascontiguousarray(desc, dtype=np.float64),
                         float(capacity), int(max_pops), stop, record)
    if engine == "python":
        return _python_walk(desc, capacity, max_pops, stop, record)
    raise ValueError(f"unknown engine {engine!r}")


SPLIT_LIMIT = 1 << 22


def _split_violations(desc: np.ndarray, capacity: float) -> int | None:
    """Exact count of tuple sums above ``capacity`` by meet-in-the-middle.

    Prefix sums over the first half of the classes are matched against the
    sorted sums of the second half.  Regrouping changes rounding, so any
    tuple within a few ulps of ``capacity`` makes the count ambiguous and
    ``None`` is returned; callers then fall back to the heap walk.
    """
    m, L = desc.shape
    h = m // 2
    if L ** (m - h) > SPLIT_LIMIT:
        return None
    a = np.zeros(1)
    for r in desc[:h]:
        a = np.add.outer(a, r).ravel()
    b = desc[h]
    for r in desc[h + 1:]:
        b = np.add.outer(b, r).ravel()
    b = np.sort(b)
    scale = abs(capacity) + float(a.max()) + float(b[-1])
    tol = 8 * m * np.finfo(float).eps * scale
    sure = int(np.searchsorted(b, capacity - a - tol, side="right").sum())
    maybe = int(np.searchsorted(b, capacity - a + tol, side="right").sum())
    if sure != maybe:
        return None
    return a.size * b.size - sure


def exact_feasibility(instance: Instance, solution: Solution,
                      engine: str = "compiled") -> EvalOutcome:
    """Exact verdict on the empirical data.

    The heap engines pop sums largest first and stop on the first sum that
    fits (every remaining sum fits too, so the confidence is then known
    exactly) or once one more violation than the allowance has been seen.
    ``engine="split"`` counts violations directly and always reports the
    exact confidence; it defers to the compiled walk on near-ties.
    """
    validate_solution(instance, solution)
    L, m = instance.sample_count, instance.num_classes
    total = L**m
    allow = violation_allowance(instance.confidence_level, total)
    desc = instance.picked_desc(solution)
    if engine == "split":
        bad = _split_violations(desc, instance.capacity)
        if bad is not None:
            return EvalOutcome(bad <= allow, 1.0 - bad / total, Method.EXACT_HEAP, total)
        engine = "compiled"
    above, stopped, _, _ = _walk(desc, instance.capacity, allow + 1, True, False, engine)
    pops = above + int(stopped)
    if stopped:
        return EvalOutcome(True, 1.0 - above / total, Method.EXACT_HEAP, pops)
    return EvalOutcome(False, None, Method.EXACT_HEAP, pops)


def popped_sums_prefix(instance: Instance, solution: Solution, k: int,
                       engine: str = "compiled") -> list[float]:
    """First ``k`` sums popped by the heap walk (the ``k`` largest sums)."""
    validate_solution(instance, solution)
    total = instance.sample_count ** instance.num_classes
    if not 1 <= k <= total:
        raise ValueError(f"k must lie in [1, {total}], got {k}")
    desc = instance.picked_desc(solution)
    _, _, rec, _ = _walk(desc, instance.capacity, k, False, True, engine)
    return [float(x) for x in rec]


# ---------------------------------------------------------------- Monte Carlo

def _bootstrap_hits(desc: np.ndarray, capacity: float, draws: int, rng) -> int:
    m, L = desc.shape
    hits = 0
    done = 0
    while done < draws:
        n = min(_MC_CHUNK, draws - done)
        idx = rng.integers(0, L, size=(m, n))
        tot = np.zeros(n)
        for i in range(m):
            tot += desc[i, idx[i]]
        hits += int(np.count_nonzero(tot <= capacity))
        done += n
    return hits


def monte_carlo_confidence(instance: Instance, solution: Solution,
                           draws: int = DEFAULT_MC_DRAWS,
                           rng_seed: int | np.random.SeedSequence = 0) -> EvalOutcome:
    """Bootstrap estimate of the confidence level.

    Each draw sums one uniformly resampled value per picked item.
    """
    if draws <= 0:
        raise ValueError("draws must be positive")
    validate_solution(instance, solution)
    rng = np.random.default_rng(rng_seed)
    hits = _bootstrap_hits(instance.picked_desc(solution), instance.capacity, draws, rng)
    est = hits / draws
    return EvalOutcome(est >= instance.confidence_level, est, Method.MONTE_CARLO,
                       draws, draws)


# ---------------------------------------------------------------- screening

def _small_prime_factors(n: int, bound: int) -> tuple[list[int], int]:
    """Prime factors of ``n`` up to ``bound`` (with multiplicity) and the rest."""
    out = []
    p = 2
    while p <= bound and n > 1:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1 if p == 2 else 2
    return out, n


def _split_factors(factors: list[int], m: int, L: int, limit: int) -> list[tuple[int, ...]]:
    """Distribute prime factors over ``m`` bins with bin products <= ``L``."""
    factors = sorted(factors, reverse=True)
    found: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    bins = [1] * m

    def rec(k: int) -> bool:
        if len(found) >= limit:
            return True
        if k == len(factors):
            t = tuple(bins)
            if t not in seen:
                seen.add(t)
                found.append(t)
            return len(found) >= limit
        f = factors[k]
        tried = set()
        # least-loaded bins first keeps the early splits balanced
        for b in sorted(range(m), key=lambda b: (bins[b], b)):
            if bins[b] in tried or bins[b] * f > L:
                continue
            tried.add(bins[b])
            bins[b] *= f
            stop = rec(k + 1)
            bins[b] //= f
            if stop:
                return True
        return False

    rec(0)
    return found


def build_screen_tuples(num_classes: int, sample_count: int, confidence_level: float,
                        cap: int = SCREEN_CAP) -> list[tuple[int, ...]]:
    """Index tuples whose position products exceed the violation allowance.

    For every returned tuple ``(l_1..l_m)``, ``prod(l_i + 1)`` is larger than
    ``(1 - P0) * L**m``.  If the sorted-sample sum at such a tuple is above
    the capacity, so is the sum at every coordinatewise-smaller tuple, which
    already exceeds the allowance.
    """
    m, L = num_classes, sample_count
    target = violation_allowance(confidence_level, L**m) + 1  # need prod >= target
    # balanced tuple: smallest b with b**m >= target
    b = max(1, math.ceil(math.exp(math.log(target) / m)) - 1) if target > 1 else 1
    while b**m < target:
        b += 1
    while b > 1 and (b - 1) ** m >= target:
        b -= 1
    balanced = (b - 1,) * m
    out = [balanced]
    seen = {balanced}

    def add(pos: tuple[int, ...]) -> None:
        t = tuple(p - 1 for p in pos)
        if len(out) < cap and t not in seen:
            seen.add(t)
            out.append(t)

    # trimmed variants of the balanced tuple, one per starting position
    for start in range(m):
        pos = [b] * m
        prod = b**m
        for r in range(m):
            i = (start + r) % m
            while pos[i] > 1 and prod // pos[i] * (pos[i] - 1) >= target:
                prod = prod // pos[i] * (pos[i] - 1)
                pos[i] -= 1
        add(tuple(pos))
    factors, rest = _small_prime_factors(target, L)
    if rest == 1 and len(out) < cap:
        splits = _split_factors(factors, m, L, 4 * cap)
        splits.sort(key=lambda t: (max(t), t))
        for t in splits:
            add(t)
    return out


def fast_screen(instance: Instance, solution: Solution,
                tuples: Sequence[Sequence[int]]) -> bool:
    """True when some screening tuple's sorted-sample sum exceeds capacity.

    A ``True`` result proves the solution infeasible on the empirical data.
    """
    if len(tuples) == 0:
        return False
    desc = instance.picked_desc(solution)
    t = np.asarray(tuples, dtype=np.intp)
    s = np.zeros(t.shape[0])
    for i in range(desc.shape[0]):
        s += desc[i, t[:, i]]
    return bool(np.any(s > instance.capacity))


def accelerated_mc(instance: Instance, solution: Solution,
                   draws: int = DEFAULT_MC_DRAWS,
                   rng_seed: int | np.random.SeedSequence = 0,
                   tuples: Sequence[Sequence[int]] | None = None) -> EvalOutcome:
    """Screen first; simulate only solutions the screen cannot reject."""
    if draws <= 0:
        raise ValueError("draws must be positive")
    if tuples is None:
        tuples = build_screen_tuples(instance.num_classes, instance.sample_count,
                                     instance.confidence_level)
    if fast_screen(instance, solution, tuples):
        return EvalOutcome(False, None, Method.ACCELERATED_MC, len(tuples), 0, True)
    out = monte_carlo_confidence(instance, solution, draws, rng_seed)
    return EvalOutcome(out.feasible, out.confidence, Method.ACCELERATED_MC,
                       len(tuples) + out.work, out.draws)


# ---------------------------------------------------------------- moments

@dataclass(frozen=True)
class MomentSummary:
    mean: float
    std: float
    min: float
    max: float
    raw_moments: tuple[float, ...] = ()

    @property
    def var(self) -> float:
        return self.std**2

    @property
    def range(self) -> float:
        return self.max - self.min


def moment_summary(samples: np.ndarray, order: int = 4) -> MomentSummary:
    s = np.asarray(samples, dtype=np.float64)
    raw = tuple(float(np.mean(s**k)) for k in range(1, order + 1))
    return MomentSummary(float(s.mean()), float(s.std()), float(s.min()), float(s.max()), raw)


def picked_moments(instance: Instance, solution: Solution) -> list[MomentSummary]:
    validate_solution(instance, solution)
    return [moment_summary(instance.classes[i][j].samples)
            for i, j in enumerate(solution.picks)]


def bernstein_lower_bound(moments: Sequence[MomentSummary], capacity: float) -> float:
    """Bernstein lower bound on P(total <= capacity).

    Ranges come from sample min/max; ``V`` is the sum of sample variances
    and ``C`` the widest range.
    """
    alpha = capacity - sum(mo.mean for mo in moments)
    if alpha <= 0:
        return 0.0
    V = sum(mo.var for mo in moments)
    C = max(mo.range for mo in moments)
    denom = V + C * alpha / 3.0
    if denom == 0:
        return 1.0
    return 1.0 - math.exp(-(alpha**2 / 2.0) / denom)


def hoeffding_lower_bound(moments: Sequence[MomentSummary], capacity: float) -> float:
    """First-order Hoeffding lower bound on P(total <= capacity)."""
    alpha = capacity - sum(mo.mean for mo in moments)
    if alpha <= 0:
        return 0.0
    spread = sum(mo.range**2 for mo in moments)
    if spread == 0:
        return 1.0
    return 1.0 - math.exp(-2.0 * alpha**2 / spread)


# ---------------------------------------------------------------- Gaussian

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Standard normal quantile: Acklam's rational approximation plus one
    Halley correction step."""
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError("p must lie in [0, 1]")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    elif p <= 1 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    # upper-tail residual avoids cancellation in 1 - p
    if p > 0.5:
        e = 0.5 * math.erfc(x / math.sqrt(2)) - (1 - p)
        e = -e
    else:
        e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def gaussian_feasibility(moments: Sequence[MomentSummary], capacity: float,
                         p0: float) -> EvalOutcome:
    """Normal-approximation test: mean + z(P0) * sd of the total <= capacity."""
    mu = sum(mo.mean for mo in moments)
    var = sum(mo.var for mo in moments)
    sd = math.sqrt(var)
    feasible = mu + norm_ppf(p0) * sd <= capacity
    if sd > 0:
        conf = norm_cdf((capacity - mu) / sd)
    else:
        conf = 1.0 if mu <= capacity else 0.0
    return EvalOutcome(feasible, conf, Method.GAUSSIAN_QUANTILE, 1)


# ---------------------------------------------------------------- sample size

def required_sample_size(epsilon: float) -> int:
    """Samples needed so a one-sided Hoeffding error of ``epsilon`` holds
    with probability at least one half."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return math.ceil(math.log(2) / (2 * epsilon**2))


# ---------------------------------------------------------------- evaluator

def solution_seed(base: int, solution: Solution) -> np.random.SeedSequence:
    """Per-solution seed so that re-evaluating a solution is reproducible."""
    return np.random.SeedSequence([int(base) & 0xFFFFFFFF, *solution.picks])


class Evaluator:
    """Counting, memoising feasibility oracle used by the solvers.

    ``calls`` increases on every call, cached or not; it is the ET metric.
    ``computed`` counts evaluations that actually ran.
    """

    def __init__(self, instance: Instance, method: str | Method = Method.EXACT_HEAP,
                 draws: int = DEFAULT_MC_DRAWS, seed: int = 0,
                 engine: str = "split", backfill_draws: int = 10**5):
        self.instance = instance
        self.method = Method(method)
        self.draws = draws
        self.seed = seed
        self.engine = engine
        self.backfill_draws = backfill_draws
        self.calls = 0
        self.computed = 0
        self.sim_draws = 0
        self._memo: dict[Solution, EvalOutcome] = {}
        self._tuples = None
        if self.method is Method.ACCELERATED_MC:
            self._tuples = build_screen_tuples(instance.num_classes, instance.sample_count,
                                               instance.confidence_level)
        self._fn: Callable[[Solution], EvalOutcome] = {
            Method.EXACT_HEAP: self._exact,
            Method.BRUTE_FORCE: self._brute,
            Method.MONTE_CARLO: self._mc,
            Method.ACCELERATED_MC: self._amc,
            Method.GAUSSIAN_QUANTILE: self._gauss,
        }[self.method]

    def _exact(self, s: Solution) -> EvalOutcome:
        return exact_feasibility(self.instance, s, self.engine)

    def _brute(self, s: Solution) -> EvalOutcome:
        fit, total = brute_force_count(self.instance, s)
        ok = total - fit <= violation_allowance(self.instance.confidence_level, total)
        return EvalOutcome(ok, fit / total, Method.BRUTE_FORCE, total)

    def _mc(self, s: Solution) -> EvalOutcome:
        return monte_carlo_confidence(self.instance, s, self.draws,
                                      solution_seed(self.seed, s))

    def _amc(self, s: Solution) -> EvalOutcome:
        return accelerated_mc(self.instance, s, self.draws, solution_seed(self.seed, s),
                              self._tuples)

    def _gauss(self, s: Solution) -> EvalOutcome:
        return gaussian_feasibility(picked_moments(self.instance, s),
                                    self.instance.capacity,
                                    self.instance.confidence_level)

    def __call__(self, solution: Solution) -> EvalOutcome:
        self.calls += 1
        out = self._memo.get(solution)
        if out is None:
            out = self._fn(solution)
            self.computed += 1
            self.sim_draws += out.draws
            self._memo[solution] = out
        return out

    def outcome(self, solution: Solution) -> EvalOutcome:
        """Outcome of an already evaluated solution; a fresh one counts as a call."""
        out = self._memo.get(solution)
        return out if out is not None else self(solution)

    def confidence(self, solution: Solution) -> float:
        """Confidence estimate, simulating when the evaluator gave only a verdict.

        The backfill simulation does not count toward ``calls``.
        """
        out = self.outcome(solution)
        if out.confidence is not None:
            return out.confidence
        est = monte_carlo_confidence(self.instance, solution, self.backfill_draws,
                                     solution_seed(self.seed + 1, solution)).confidence
        self._memo[solution] = EvalOutcome(out.feasible, est, out.method, out.work,
                                           out.draws, out.screened)
        return est
