"""Experiment orchestration: repeated runs, budget parity, ablations and
the screening speed probe.  Reports are plain CSV."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from .baselines import EdaParams, GaParams, eda, gaussian_baseline, genetic_algorithm, greedy
from .evaluate import Evaluator, Method, accelerated_mc, build_screen_tuples, monte_carlo_confidence
from .generator import TruthModel, real_confidence
from .instance import Instance, Solution, total_cost
from .search import SFE_VARIANTS, DdalsParams, ddals, sfe_select

__all__ = [
    "EXACT_WORK_CAP",
    "FEASIBILITY_MARGIN",
    "CSV_COLUMNS",
    "ALGORITHMS",
    "evaluator_selection",
    "RunRow",
    "RunConfig",
    "ExperimentReport",
    "feasible_ratio",
    "run_experiment",
    "ABLATION_VARIANTS",
    "AblationTable",
    "run_ablation",
    "ProbeRow",
    "amc_speed_probe",
]

EXACT_WORK_CAP = 10**6
FEASIBILITY_MARGIN = 0.005
CSV_COLUMNS = ("benchmark", "algorithm", "variant", "rep", "seed",
               "C", "ET", "ECL", "RCL", "feasible")
ALGORITHMS = ("ddals", "greedy", "ga", "eda", "gauss")


def evaluator_selection(instance: Instance, work_cap: int = EXACT_WORK_CAP,
                        override: str | None = None) -> Method:
    """Exact walk when its worst-case pop count stays under ``work_cap``."""
    if override not in (None, "auto"):
        return Method(override)
    total = instance.sample_count ** instance.num_classes
    work = math.ceil((1 - instance.confidence_level) * total)
    return Method.EXACT_HEAP if work <= work_cap else Method.ACCELERATED_MC


# ---------------------------------------------------------------- experiments

@dataclass(frozen=True)
class RunRow:
    benchmark: str
    algorithm: str
    variant: str
    rep: int
    seed: int
    cost: float
    evals: int
    ecl: float
    rcl: float | None
    feasible: bool | None

    def as_csv(self) -> list[str]:
        return [self.benchmark, self.algorithm, self.variant, str(self.rep), str(self.seed),
                _fmt(self.cost), str(self.evals), _fmt(self.ecl), _fmt(self.rcl),
                "" if self.feasible is None else str(int(self.feasible))]


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


@dataclass
class RunConfig:
    """One benchmark, run ``reps`` times per algorithm.

    Repetition ``r`` uses seed ``seed + r`` for every algorithm.  Baselines
    other than greedy receive the DDALS evaluation count of the same
    repetition as their budget.
    """

    instance: Instance
    truth: TruthModel | None = None
    benchmark: str = ""
    algorithms: Sequence[str] = ALGORITHMS
    ddals: DdalsParams = field(default_factory=DdalsParams)
    variants: Sequence[str] = SFE_VARIANTS
    reps: int = 10
    seed: int = 0
    evaluator: str = "auto"
    rcl_draws: int = 10**7
    want_rcl: bool = True

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if "ddals" not in self.algorithms and set(self.algorithms) & {"ga", "eda"}:
            raise ValueError("ga and eda need ddals for their evaluation budget")
        if self.want_rcl and self.truth is None:
            raise ValueError("real confidence requested but no truth model given")


def feasible_ratio(rcls: Iterable[float], p0: float) -> float:
    """Share of runs whose real confidence reaches ``p0`` minus the margin."""
    vals = list(rcls)
    # compare in a rounded frame so that 0.99 - 0.005 is exactly 0.985
    thr = round(p0 - FEASIBILITY_MARGIN, 12)
    return sum(v >= thr for v in vals) / len(vals)


@dataclass
class ExperimentReport:
    benchmark: str
    p0: float
    rcl_draws: int
    rows: list[RunRow]

    def groups(self) -> dict[tuple[str, str], list[RunRow]]:
        out: dict[tuple[str, str], list[RunRow]] = {}
        for r in self.rows:
            out.setdefault((r.algorithm, r.variant), []).append(r)
        return out

    def aggregate(self) -> dict[tuple[str, str], dict[str, tuple[float, float]]]:
        """Mean and population std of each metric per (algorithm, variant)."""
        agg = {}
        for key, rows in self.groups().items():
            d = {}
            for name, vals in (("C", [r.cost for r in rows]), ("ET", [r.evals for r in rows]),
                               ("ECL", [r.ecl for r in rows])):
                d[name] = (float(np.mean(vals)), float(np.std(vals)))
            rcl = [r.rcl for r in rows if r.rcl is not None]
            if rcl:
                d["RCL"] = (float(np.mean(rcl)), float(np.std(rcl)))
                d["FSR"] = (sum(bool(r.feasible) for r in rows) / len(rows), 0.0)
            agg[key] = d
        return agg

    def write_csv(self, fh: IO[str]) -> None:
        fh.write(f"# benchmark={self.benchmark} P0={self.p0!r} rcl_draws={self.rcl_draws}"
                 f" rcl_binomial_se<={0.5 / math.sqrt(self.rcl_draws):.2e}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.as_csv())
        for (alg, var), d in self.aggregate().items():
            for tag, k in (("agg", 0), ("agg_std", 1)):
                w.writerow([self.benchmark, alg, var, tag, "",
                            _fmt(d["C"][k]), _fmt(d["ET"][k]), _fmt(d["ECL"][k]),
                            _fmt(d["RCL"][k]) if "RCL" in d else "",
                            _fmt(d["FSR"][k]) if "FSR" in d else ""])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _rcl(cfg: RunConfig, sol: Solution, seed: int) -> float | None:
    if not cfg.want_rcl:
        return None
    return real_confidence(cfg.truth, sol, cfg.rcl_draws, seed)


def run_experiment(cfg: RunConfig) -> ExperimentReport:
    inst = cfg.instance
    method = evaluator_selection(inst, override=cfg.evaluator)
    p0 = inst.confidence_level
    rows: list[RunRow] = []

    def row(alg, variant, rep, seed, sol, evals, ecl, ok):
        # a run that never reached estimated feasibility counts as infeasible
        rcl = _rcl(cfg, sol, seed)
        feas = None if rcl is None else ok and feasible_ratio([rcl], p0) == 1.0
        rows.append(RunRow(cfg.benchmark, alg, variant, rep, seed,
                           total_cost(inst, sol), evals, ecl, rcl, feas))

    for rep in range(cfg.reps):
        seed = cfg.seed + rep
        params = replace(cfg.ddals, seed=seed, evaluator=method, sfe="o")
        budget = None
        if "ddals" in cfg.algorithms:
            ev = Evaluator(inst, method, draws=params.mc_draws, seed=seed)
            res = ddals(inst, params, ev)
            budget = res.eval_count
            for v in cfg.variants:
                if not res.start_feasible:
                    sol = res.solution
                else:
                    sol, _, _ = sfe_select(res.archive, res.solution, v, p0)
                row("ddals", v, rep, seed, sol, res.eval_count, ev.confidence(sol),
                    ev.outcome(sol).feasible)
        if "greedy" in cfg.algorithms:
            ev = Evaluator(inst, method, draws=params.mc_draws, seed=seed)
            g = greedy(inst, params.lam, ev)
            row("greedy", "", rep, seed, g.solution, g.eval_count, g.confidence, g.feasible)
        if "ga" in cfg.algorithms:
            ev = Evaluator(inst, method, draws=params.mc_draws, seed=seed)
            g = genetic_algorithm(inst, GaParams(budget=budget, seed=seed), ev)
            row("ga", "", rep, seed, g.solution, g.eval_count, g.confidence, g.feasible)
        if "eda" in cfg.algorithms:
            ev = Evaluator(inst, method, draws=params.mc_draws, seed=seed)
            g = eda(inst, EdaParams(budget=budget, seed=seed), ev)
            row("eda", "", rep, seed, g.solution, g.eval_count, g.confidence, g.feasible)
        if "gauss" in cfg.algorithms:
            g = gaussian_baseline(inst, params)
            row("gauss", "", rep, seed, g.solution, g.eval_count, g.confidence, g.feasible)
    order = {a: i for i, a in enumerate(ALGORITHMS)}
    rows.sort(key=lambda r: (order[r.algorithm], r.variant, r.rep))
    return ExperimentReport(cfg.benchmark, p0, cfg.rcl_draws if cfg.want_rcl else 0, rows)


# ---------------------------------------------------------------- ablation

ABLATION_VARIANTS = {
    "r-CP": {"init": "random"},
    "no-LSS": {"use_lss": False},
    "no-Degrade": {"use_degrade": False},
    "no-FSS": {"use_fss": False},
}


@dataclass
class AblationTable:
    """Relative cost increase of each variant over the full search.

    ``pdr[b][v]`` is ``(mean C_variant - mean C_full) / mean C_full`` on
    benchmark ``b`` over the matched seeds.
    """

    benchmarks: list[str]
    variants: list[str]
    pdr: dict[str, dict[str, float]]
    costs: dict[str, dict[str, list[float]]]

    def average(self) -> dict[str, float]:
        return {v: float(np.mean([self.pdr[b][v] for b in self.benchmarks]))
                for v in self.variants}

    def overall(self) -> float:
        return float(np.mean(list(self.average().values())))

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["benchmark", *self.variants])
        for b in self.benchmarks:
            w.writerow([b, *(repr(self.pdr[b][v]) for v in self.variants)])
        avg = self.average()
        w.writerow(["Avg.PDR", *(repr(avg[v]) for v in self.variants)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def run_ablation(suite: Sequence[tuple[str, Instance]], seeds: Sequence[int],
                 base: DdalsParams | None = None, evaluator: str = "auto",
                 variants: dict[str, dict] | None = None) -> AblationTable:
    base = base or DdalsParams()
    variants = ABLATION_VARIANTS if variants is None else variants
    pdr, costs = {}, {}
    for name, inst in suite:
        method = evaluator_selection(inst, override=evaluator)
        runs = {"original": {}}
        runs.update({v: dict(kw) for v, kw in variants.items()})
        c = {}
        for v, kw in runs.items():
            c[v] = [ddals(inst, replace(base, seed=s, evaluator=method, **kw)).cost
                    for s in seeds]
        c1 = float(np.mean(c["original"]))
        pdr[name] = {v: (float(np.mean(c[v])) - c1) / c1 for v in variants}
        costs[name] = c
    return AblationTable([n for n, _ in suite], list(variants), pdr, costs)


# ---------------------------------------------------------------- speed probe

@dataclass(frozen=True)
class ProbeRow:
    method: str
    evaluations: int
    seconds: float
    seconds_per_1000: float
    screened: int
    draws: int
    feasible: int


def amc_speed_probe(instance: Instance, n_solutions: int = 1000, seed: int = 0,
                    draws: int = 10**4) -> list[ProbeRow]:
    """Evaluate the same random solutions with plain and screened simulation."""
    rng = np.random.default_rng(seed)
    sols = [Solution([int(rng.integers(n)) for n in instance.class_sizes])
            for _ in range(n_solutions)]
    tuples = build_screen_tuples(instance.num_classes, instance.sample_count,
                                 instance.confidence_level)
    out = []
    for name in ("mc", "amc"):
        t0 = time.perf_counter()
        screened = total = feas = 0
        for k, s in enumerate(sols):
            ss = np.random.SeedSequence([seed, k])
            if name == "mc":
                r = monte_carlo_confidence(instance, s, draws, ss)
            else:
                r = accelerated_mc(instance, s, draws, ss, tuples)
            screened += r.screened
            total += r.draws
            feas += r.feasible
        dt = time.perf_counter() - t0
        out.append(ProbeRow(name, n_solutions, dt, 1000 * dt / n_solutions,
                            screened, total, feas))
    return out
