"""Comparison solvers: greedy start, a genetic algorithm, a univariate EDA
and the Gaussian-quantile variant of the local search."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .evaluate import Evaluator, Method
from .instance import Instance, Solution, total_cost
from .search import (DdalsParams, DdalsResult, SearchState, build_surrogates,
                     constructive_procedure, ddals)

__all__ = [
    "BaselineResult",
    "greedy",
    "GaParams",
    "genetic_algorithm",
    "EdaParams",
    "eda",
    "gaussian_baseline",
]


@dataclass
class BaselineResult:
    solution: Solution
    cost: float
    feasible: bool
    confidence: float
    eval_count: int
    flags: list[str] = field(default_factory=list)


def greedy(instance: Instance, lam: float = 1.0,
           evaluator: Evaluator | None = None) -> BaselineResult:
    """The constructive start on its own."""
    ev = evaluator or Evaluator(instance)
    state = SearchState(instance, build_surrogates(instance, lam), ev,
                        np.random.default_rng(0))
    sol, ok = constructive_procedure(state)
    flags = [] if ok else ["no-feasible-start"]
    return BaselineResult(sol, total_cost(instance, sol), ok, ev.confidence(sol),
                          ev.calls, flags)


def _rank_key(instance: Instance, ev: Evaluator, sol: Solution):
    # feasible first by cost, then infeasible by descending confidence
    out = ev.outcome(sol)
    if out.feasible:
        return (0, total_cost(instance, sol), sol.picks)
    return (1, -ev.confidence(sol), sol.picks)


class _Tracker:
    """Best individual seen so far, feasible ones preferred."""

    def __init__(self, instance: Instance, ev: Evaluator):
        self.instance, self.ev = instance, ev
        self.best: Solution | None = None
        self.key = None

    def see(self, sol: Solution) -> None:
        k = _rank_key(self.instance, self.ev, sol)
        if self.key is None or k < self.key:
            self.best, self.key = sol, k

    def result(self) -> BaselineResult:
        sol = self.best
        ok = self.ev.outcome(sol).feasible
        return BaselineResult(sol, total_cost(self.instance, sol), ok,
                              self.ev.confidence(sol), self.ev.calls,
                              [] if ok else ["no-feasible-found"])


def _random_solution(instance: Instance, rng: np.random.Generator) -> Solution:
    return Solution([int(rng.integers(n)) for n in instance.class_sizes])


@dataclass
class GaParams:
    population: int = 10
    elite: int = 6
    crossover: float = 0.1
    mutation: float | None = None  # None means 1/m
    budget: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.elite <= self.population:
            raise ValueError("need 1 <= elite <= population")
        if not 0 <= self.crossover <= 1:
            raise ValueError("crossover probability must lie in [0, 1]")
        if self.mutation is not None and not 0 <= self.mutation <= 1:
            raise ValueError("mutation probability must lie in [0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be positive")


def genetic_algorithm(instance: Instance, params: GaParams | None = None,
                      evaluator: Evaluator | None = None,
                      initial: list[Solution] | None = None) -> BaselineResult:
    """Elitist GA over pick vectors.

    Each generation keeps the ``elite`` best individuals and refills the
    population with children of two random elite parents: with probability
    ``crossover`` every class gene comes from either parent at random,
    otherwise the child copies the first parent; then each gene mutates to a
    random same-class item with probability ``mutation``.  Stops once the
    evaluator has been called ``budget`` times.
    """
    p = params or GaParams()
    ev = evaluator or Evaluator(instance)
    rng = np.random.default_rng(p.seed)
    m = instance.num_classes
    pm = 1.0 / m if p.mutation is None else p.mutation
    sizes = np.array(instance.class_sizes)
    track = _Tracker(instance, ev)

    pop = list(initial) if initial else [_random_solution(instance, rng)
                                          for _ in range(p.population)]
    for s in pop:
        ev(s)
        track.see(s)
    while ev.calls < p.budget:
        pop.sort(key=lambda s: _rank_key(instance, ev, s))
        elite = pop[:p.elite]
        children = []
        while len(elite) + len(children) < p.population and ev.calls < p.budget:
            a = elite[int(rng.integers(len(elite)))].picks
            b = elite[int(rng.integers(len(elite)))].picks
            genes = np.array(a)
            if rng.random() < p.crossover:
                take = rng.random(m) < 0.5
                genes = np.where(take, b, a)
            flip = rng.random(m) < pm
            if flip.any():
                genes = np.where(flip, rng.integers(0, sizes), genes)
            child = Solution(genes)
            ev(child)
            track.see(child)
            children.append(child)
        pop = elite + children
    return track.result()


@dataclass
class EdaParams:
    population: int = 10
    selection: int = 6
    epsilon: float | None = None  # None means 1 / (N * population)
    budget: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.selection <= self.population:
            raise ValueError("need 1 <= selection <= population")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.budget < 1:
            raise ValueError("budget must be positive")


def _sample_model(probs: list[np.ndarray], rng: np.random.Generator) -> Solution:
    return Solution([int(rng.choice(len(q), p=q)) for q in probs])


def _fit_model(selected: list[Solution], sizes, eps: float) -> list[np.ndarray]:
    out = []
    for i, n in enumerate(sizes):
        counts = np.bincount([s.picks[i] for s in selected], minlength=n).astype(float)
        q = counts / len(selected) + eps
        out.append(q / q.sum())
    return out


def eda(instance: Instance, params: EdaParams | None = None,
        evaluator: Evaluator | None = None,
        model: list[np.ndarray] | None = None) -> BaselineResult:
    """Univariate marginal EDA.

    The model is one categorical distribution per class.  Each generation
    samples ``population`` individuals, keeps the best ``selection`` of the
    new samples and the previous selection (feasible first), and refits the
    marginals to their frequencies plus ``epsilon`` before renormalising.
    """
    p = params or EdaParams()
    ev = evaluator or Evaluator(instance)
    rng = np.random.default_rng(p.seed)
    sizes = instance.class_sizes
    eps = p.epsilon if p.epsilon is not None else 1.0 / (max(sizes) * p.population)
    probs = model or [np.full(n, 1.0 / n) for n in sizes]
    track = _Tracker(instance, ev)
    selected: list[Solution] = []
    while True:
        pop = []
        for _ in range(p.population):
            if ev.calls >= p.budget and (pop or selected):
                break
            s = _sample_model(probs, rng)
            ev(s)
            track.see(s)
            pop.append(s)
        pool = list(dict.fromkeys(selected + pop))
        pool.sort(key=lambda s: _rank_key(instance, ev, s))
        selected = pool[:p.selection]
        if ev.calls >= p.budget:
            break
        probs = _fit_model(selected, sizes, eps)
    return track.result()


def gaussian_baseline(instance: Instance, params: DdalsParams | None = None) -> DdalsResult:
    """The local search with the normal-approximation feasibility test."""
    p = replace(params or DdalsParams(), evaluator=Method.GAUSSIAN_QUANTILE)
    return ddals(instance, p)
