"""Adaptive local search with surrogate weights and data-driven evaluation.

The search ranks items by a deterministic surrogate weight
``mean + lam * std`` computed from each item's samples, and delegates every
feasibility question to an :class:`~ccmckp.evaluate.Evaluator`.

One run:

1. constructive start (greedy by cost/surrogate-weight ratio, repaired by
   lightening the heaviest pick);
2. ``max_iter`` rounds of local swap search followed by a random degrade
   move that keeps the current solution feasible;
3. a pairwise swap search on the best solution found;
4. output selection from two archives of feasible solutions (lowest cost
   and highest estimated confidence).
"""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field

import numpy as np

from .evaluate import DEFAULT_MC_DRAWS, Evaluator, Method
from .instance import Instance, Solution, total_cost

log = logging.getLogger(__name__)

__all__ = [
    "SurrogateTable",
    "build_surrogates",
    "ArchiveEntry",
    "SolutionArchive",
    "DdalsParams",
    "DdalsResult",
    "SearchState",
    "constructive_procedure",
    "random_start",
    "local_swap_search",
    "degrade",
    "further_swap_search",
    "sfe_select",
    "sfe_threshold",
    "ddals",
]

ARCHIVE_CAPACITY = 30
SFE_VARIANTS = ("o", "v1", "v2", "v3")


@dataclass(frozen=True)
class SurrogateTable:
    weights: tuple[np.ndarray, ...]
    utility: tuple[np.ndarray, ...]
    by_utility: tuple[np.ndarray, ...]
    by_weight: tuple[np.ndarray, ...]
    lam: float


def build_surrogates(instance: Instance, lam: float = 1.0) -> SurrogateTable:
    """Per-item ``mean + lam * std`` (population std) and cost/weight ratios."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    weights, util, by_u, by_w = [], [], [], []
    for mu, sd, c in zip(instance.means, instance.stds, instance.costs):
        w = mu + lam * sd
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(w > 0, c / np.where(w > 0, w, 1.0), np.inf)
        weights.append(w)
        util.append(u)
        by_u.append(np.lexsort((np.arange(len(u)), -u)))
        by_w.append(np.lexsort((np.arange(len(w)), w)))
    return SurrogateTable(tuple(weights), tuple(util), tuple(by_u), tuple(by_w), lam)


# ---------------------------------------------------------------- archives

@dataclass(frozen=True)
class ArchiveEntry:
    solution: Solution
    cost: float
    confidence: float


class SolutionArchive:
    """Two bounded lists of feasible solutions: cheapest and most confident."""

    def __init__(self, capacity: int = ARCHIVE_CAPACITY):
        self.capacity = capacity
        self.cost_list: list[ArchiveEntry] = []
        self.mc_list: list[ArchiveEntry] = []
        self._cost_keys: list[tuple] = []
        self._mc_keys: list[tuple] = []

    @staticmethod
    def _insert(entries, keys, entry, key, cap) -> None:
        if any(e.solution == entry.solution for e in entries):
            return
        pos = bisect.bisect_left(keys, key)
        if pos >= cap:
            return
        entries.insert(pos, entry)
        keys.insert(pos, key)
        del entries[cap:], keys[cap:]

    def offer(self, solution: Solution, cost: float, confidence: float) -> None:
        e = ArchiveEntry(solution, cost, confidence)
        self._insert(self.cost_list, self._cost_keys, e,
                     (cost, solution.picks), self.capacity)
        self._insert(self.mc_list, self._mc_keys, e,
                     (-confidence, cost, solution.picks), self.capacity)

    def entries(self) -> list[ArchiveEntry]:
        seen, out = set(), []
        for e in self.cost_list + self.mc_list:
            if e.solution not in seen:
                seen.add(e.solution)
                out.append(e)
        return out

    def __len__(self) -> int:
        return len(self.entries())


# ---------------------------------------------------------------- state

@dataclass
class DdalsParams:
    lam: float = 1.0
    max_iter: int = 30
    sfe: str = "o"
    evaluator: str | Method = Method.EXACT_HEAP
    mc_draws: int = DEFAULT_MC_DRAWS
    seed: int = 0
    lss_fixpoint: bool = True
    init: str = "cp"
    use_lss: bool = True
    use_degrade: bool = True
    use_fss: bool = True

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.sfe not in SFE_VARIANTS:
            raise ValueError(f"sfe must be one of {SFE_VARIANTS}")
        if self.init not in ("cp", "random"):
            raise ValueError("init must be 'cp' or 'random'")


@dataclass
class SearchState:
    instance: Instance
    table: SurrogateTable
    evaluator: Evaluator
    rng: np.random.Generator
    archive: SolutionArchive = field(default_factory=SolutionArchive)
    current: Solution | None = None
    best: Solution | None = None
    best_cost: float = float("inf")
    iteration: int = 0

    def cost(self, s: Solution) -> float:
        return total_cost(self.instance, s)

    def feasible(self, s: Solution) -> bool:
        """Evaluate ``s``; feasible results are offered to the archives."""
        out = self.evaluator(s)
        if out.feasible:
            self.archive.offer(s, self.cost(s), self.evaluator.confidence(s))
        return out.feasible

    def consider_best(self, s: Solution) -> None:
        c = self.cost(s)
        if c < self.best_cost:
            self.best, self.best_cost = s, c


# ---------------------------------------------------------------- operators

def constructive_procedure(state: SearchState) -> tuple[Solution, bool]:
    """Greedy start repaired toward feasibility.

    Returns the solution and whether it is feasible.  When the class holding
    the heaviest pick has nothing lighter left, the all-lightest solution is
    returned, flagged infeasible if it still fails.
    """
    inst, tab = state.instance, state.table
    picks = [int(order[0]) for order in tab.by_utility]
    while True:
        sol = Solution(picks)
        if state.feasible(sol):
            return sol, True
        heavy = [tab.weights[i][p] for i, p in enumerate(picks)]
        i0 = int(np.argmax(heavy))
        w = tab.weights[i0]
        lighter = [j for j in range(len(w)) if w[j] < w[picks[i0]]]
        if not lighter:
            break
        # next-lighter: heaviest of the strictly lighter items
        picks[i0] = max(lighter, key=lambda j: (w[j], -j))
    fallback = Solution([int(order[0]) for order in tab.by_weight])
    if fallback == sol:
        return sol, False
    return fallback, state.feasible(fallback)


def random_start(state: SearchState) -> tuple[Solution, bool]:
    """Random picks; while infeasible, re-draw every pick among lighter items."""
    tab, rng = state.table, state.rng
    picks = [int(rng.integers(len(c))) for c in state.instance.classes]
    while True:
        sol = Solution(picks)
        if state.feasible(sol):
            return sol, True
        moved = False
        for i, p in enumerate(picks):
            w = tab.weights[i]
            lighter = np.flatnonzero(w < w[p])
            if lighter.size:
                picks[i] = int(rng.choice(lighter))
                moved = True
        if not moved:
            return sol, False


def local_swap_search(state: SearchState, sol: Solution) -> Solution | None:
    """Best feasible single-class swap to a cheaper item, or ``None``."""
    inst = state.instance
    base = state.cost(sol)
    best, best_cost = None, base
    for i, p in enumerate(sol.picks):
        ci = inst.costs[i]
        for j in range(len(ci)):
            if ci[j] < ci[p]:
                cand = sol.replace(i, j)
                c = state.cost(cand)
                if state.feasible(cand) and c < best_cost:
                    best, best_cost = cand, c
    return best


def _lss_until_stuck(state: SearchState, sol: Solution, fixpoint: bool) -> Solution:
    while True:
        nxt = local_swap_search(state, sol)
        if nxt is None:
            return sol
        sol = nxt
        if not fixpoint:
            return sol


def degrade(state: SearchState, sol: Solution) -> tuple[Solution, bool]:
    """Random feasible perturbation of ``sol``.

    Classes are visited in random order.  In each, a random other item is
    tried first; if that fails, items lighter than it are tried in random
    order.  Returns ``(sol, False)`` when no feasible move exists.
    """
    rng, tab = state.rng, state.table
    for i in rng.permutation(state.instance.num_classes):
        i = int(i)
        n = len(state.instance.classes[i])
        if n < 2:
            continue
        p = sol.picks[i]
        others = [j for j in range(n) if j != p]
        r = others[int(rng.integers(len(others)))]
        cand = sol.replace(i, r)
        if state.feasible(cand):
            return cand, True
        w = tab.weights[i]
        lighter = [j for j in range(n) if j != p and w[j] < w[r]]
        for k in rng.permutation(len(lighter)):
            cand = sol.replace(i, lighter[int(k)])
            if state.feasible(cand):
                return cand, True
    return sol, False


def further_swap_search(state: SearchState, sol: Solution) -> Solution:
    """Improve ``sol`` by feasible two-class swaps until none is cheaper."""
    inst = state.instance
    m = inst.num_classes
    inc, inc_cost = sol, state.cost(sol)
    improved = True
    while improved:
        improved = False
        for i0 in range(m):
            for i1 in range(i0 + 1, m):
                for j0 in range(len(inst.classes[i0])):
                    for j1 in range(len(inst.classes[i1])):
                        if j0 == inc.picks[i0] and j1 == inc.picks[i1]:
                            continue
                        cand = inc.replace(i0, j0).replace(i1, j1)
                        c = state.cost(cand)
                        if c < inc_cost and state.feasible(cand):
                            inc, inc_cost = cand, c
                            improved = True
    return inc


# ---------------------------------------------------------------- output selection

def sfe_threshold(p0: float) -> float:
    """Confidence demanded by variant 1: halve the allowed violation rate."""
    return 1.0 - (1.0 - p0) / 2.0


def _v2_scores(archive: SolutionArchive) -> dict[Solution, int]:
    scores: dict[Solution, int] = {}
    for lst in (archive.cost_list, archive.mc_list):
        for rank, e in enumerate(lst, start=1):
            scores[e.solution] = scores.get(e.solution, 0) + (ARCHIVE_CAPACITY + 1 - rank)
    return scores


def sfe_select(archive: SolutionArchive, best: Solution, variant: str, p0: float,
               cost_of=None) -> tuple[Solution, list[ArchiveEntry], bool]:
    """Pick the output solution.

    Returns ``(solution, shortlist, fell_back)``; ``shortlist`` is the top of
    the cost list for variant 3 and empty otherwise.  ``fell_back`` is set
    when the archives could not supply an answer and ``best`` was returned.
    """
    if variant not in SFE_VARIANTS:
        raise ValueError(f"unknown SFE variant {variant!r}")
    entries = archive.entries()
    if variant == "o":
        return best, [], False
    if not entries:
        return best, [], True
    if variant == "v1":
        thr = sfe_threshold(p0)
        ok = [e for e in entries if e.confidence >= thr]
        if not ok:
            return best, [], True
        e = min(ok, key=lambda e: (e.cost, e.solution.picks))
        return e.solution, [], False
    if variant == "v2":
        scores = _v2_scores(archive)
        by_sol = {e.solution: e for e in entries}
        sol = max(scores, key=lambda s: (scores[s], -by_sol[s].cost,
                                         tuple(-p for p in s.picks)))
        return sol, [], False
    short = archive.cost_list[:10]
    e = max(short, key=lambda e: (e.confidence, -e.cost, tuple(-p for p in e.solution.picks)))
    return e.solution, list(short), False


# ---------------------------------------------------------------- driver

@dataclass
class DdalsResult:
    solution: Solution
    cost: float
    feasible: bool
    confidence: float | None
    eval_count: int
    archive: SolutionArchive
    history: list[float]
    start: Solution
    start_feasible: bool
    shortlist: list[ArchiveEntry] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)


def make_evaluator(instance: Instance, params: DdalsParams) -> Evaluator:
    return Evaluator(instance, params.evaluator, draws=params.mc_draws, seed=params.seed)


def ddals(instance: Instance, params: DdalsParams | None = None,
          evaluator: Evaluator | None = None) -> DdalsResult:
    """Run the full search.  Deterministic for a given ``params.seed``."""
    params = params or DdalsParams()
    ev = evaluator or make_evaluator(instance, params)
    state = SearchState(instance, build_surrogates(instance, params.lam), ev,
                        np.random.default_rng(params.seed))
    start_fn = constructive_procedure if params.init == "cp" else random_start
    start, ok = start_fn(state)
    flags: list[str] = []
    if not ok:
        flags.append("no-feasible-start")
        log.info("no feasible start found; returning infeasible fallback")
        return DdalsResult(start, state.cost(start), False, ev.confidence(start), ev.calls,
                           state.archive, [], start, False, flags=flags)
    state.current = start
    state.consider_best(start)
    history = []
    for t in range(params.max_iter):
        state.iteration = t
        if params.use_lss:
            state.current = _lss_until_stuck(state, state.current, params.lss_fixpoint)
        state.consider_best(state.current)
        history.append(state.best_cost)
        if params.use_degrade:
            state.current, moved = degrade(state, state.current)
            if not moved and "degrade-stuck" not in flags:
                flags.append("degrade-stuck")
    best = state.best
    if params.use_fss:
        best = further_swap_search(state, best)
        state.consider_best(best)
    out, shortlist, fell_back = sfe_select(state.archive, state.best, params.sfe,
                                           instance.confidence_level)
    if fell_back:
        flags.append("sfe-fallback")
    return DdalsResult(out, state.cost(out), ev.outcome(out).feasible, ev.confidence(out), ev.calls,
                       state.archive, history, start, True, shortlist, flags)
