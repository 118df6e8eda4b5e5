"""Command-line entry point: ``python -m ccmckp <command> ...``.

Failures print one JSON line ``{"error": <kind>, "message": ...}`` to
stderr and exit nonzero (2 for bad input data, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import Sequence

from . import __version__
from .baselines import EdaParams, GaParams, eda, gaussian_baseline, genetic_algorithm, greedy
from .evaluate import Evaluator, brute_force_count, violation_allowance
from .generator import BenchmarkSpec, TruthModel, generate, preset, real_confidence
from .harness import (ALGORITHMS, RunConfig, amc_speed_probe, evaluator_selection,
                      run_ablation, run_experiment)
from .instance import (InstanceError, dumps_instance, dumps_solution, load_instance, load_solution,
                       total_cost, validate_solution)
from .search import SFE_VARIANTS, DdalsParams, ddals

EVALUATORS = ("auto", "exact", "mc", "amc", "gauss")


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = 1):
        super().__init__(message)
        self.kind, self.code = kind, code


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--evaluator", choices=EVALUATORS, default="auto")
    p.add_argument("--mc-draws", type=int, default=10**6)
    p.add_argument("--rcl-draws", type=int, default=10**7)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--sfe", choices=SFE_VARIANTS, default="o")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")


def _source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", help="instance file")
    p.add_argument("--truth", help="truth file for real confidence")
    p.add_argument("--preset", help="generate the instance from a preset, e.g. LAB-ss1-W11")
    p.add_argument("--instance-seed", type=int, default=0,
                   help="generator seed used with --preset")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ccmckp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance file and its truth file")
    _common(g)
    g.add_argument("--preset")
    g.add_argument("--family", choices=("LAB", "APP"))
    g.add_argument("--m", type=int)
    g.add_argument("--N", type=int)
    g.add_argument("--L", type=int)
    g.add_argument("--W", type=float)
    g.add_argument("--P0", type=float, default=0.99)
    g.add_argument("--truth-out", help="truth file path (default: <out>.truth.json)")

    s = sub.add_parser("solve", help="run one algorithm; --out receives the solution file")
    _common(s)
    _source(s)
    s.add_argument("--algorithm", choices=ALGORITHMS, default="ddals")
    s.add_argument("--budget", type=int, default=1000, help="evaluation budget for ga/eda")

    e = sub.add_parser("eval", help="evaluate a solution file")
    _common(e)
    _source(e)
    e.add_argument("--solution", required=True)
    e.add_argument("--brute", action="store_true", help="also enumerate every sum")

    x = sub.add_parser("experiment", help="repeated runs with budget parity, CSV report")
    _common(x)
    _source(x)
    x.add_argument("--algorithms", default=",".join(ALGORITHMS))

    a = sub.add_parser("ablate", help="performance degradation ratios, CSV table")
    _common(a)
    a.add_argument("--presets", default="LAB-ss1-W11,LAB-ss2-W18,LAB-ss3-W20,LAB-ss4-W16")
    a.add_argument("--instance-seed", type=int, default=0)

    q = sub.add_parser("probe-amc", help="time plain vs screened simulation")
    _common(q)
    _source(q)
    q.add_argument("--n", type=int, default=1000, help="number of random solutions")
    return ap


def _load_source(args, need_truth: bool = False):
    if args.preset:
        try:
            spec = preset(args.preset)
        except KeyError as exc:
            raise CliError("unknown-preset", str(exc.args[0]), 2) from None
        inst, truth = generate(spec, args.instance_seed)
        return inst, truth, args.preset
    if not args.instance:
        raise CliError("usage", "give --instance or --preset", 2)
    inst = load_instance(args.instance)
    truth = TruthModel.load(args.truth) if args.truth else None
    if need_truth and truth is None:
        raise CliError("missing-truth", "real confidence requested but no --truth file", 2)
    return inst, truth, args.instance


def _params(args) -> DdalsParams:
    return DdalsParams(lam=args.lam, max_iter=args.max_iter, sfe=args.sfe,
                       mc_draws=args.mc_draws, seed=args.seed)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> None:
    if args.preset:
        try:
            spec = preset(args.preset)
        except KeyError as exc:
            raise CliError("unknown-preset", str(exc.args[0]), 2) from None
    else:
        missing = [k for k in ("family", "m", "N", "L", "W") if getattr(args, k) is None]
        if missing:
            raise CliError("usage", f"missing {', '.join('--' + k for k in missing)}", 2)
        spec = BenchmarkSpec(args.family, args.m, args.N, args.L, args.W, args.P0)
    if not args.out:
        raise CliError("usage", "gen needs --out", 2)
    inst, truth = generate(spec, args.seed)
    with open(args.out, "w") as fh:
        fh.write(dumps_instance(inst))
    with open(args.truth_out or args.out + ".truth.json", "w") as fh:
        fh.write(truth.dumps())


def cmd_solve(args) -> None:
    inst, truth, _ = _load_source(args)
    method = evaluator_selection(inst, override=args.evaluator)
    params = _params(args)
    params.evaluator = method
    ev = Evaluator(inst, method, draws=args.mc_draws, seed=args.seed)
    alg = args.algorithm
    if alg == "ddals":
        r = ddals(inst, params, ev)
        sol, ok, conf, et, flags = r.solution, r.feasible, r.confidence, r.eval_count, r.flags
    elif alg == "gauss":
        r = gaussian_baseline(inst, params)
        sol, ok, conf, et, flags = r.solution, r.feasible, r.confidence, r.eval_count, r.flags
    else:
        if alg == "greedy":
            r = greedy(inst, args.lam, ev)
        elif alg == "ga":
            r = genetic_algorithm(inst, GaParams(budget=args.budget, seed=args.seed), ev)
        else:
            r = eda(inst, EdaParams(budget=args.budget, seed=args.seed), ev)
        sol, ok, conf, et, flags = r.solution, r.feasible, r.confidence, r.eval_count, r.flags
    doc = {"picks": list(sol.picks), "algorithm": alg, "evaluator": method.value,
           "cost": total_cost(inst, sol), "feasible": ok, "ECL": conf, "ET": et,
           "flags": flags}
    if truth is not None:
        doc["RCL"] = real_confidence(truth, sol, args.rcl_draws, args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps_solution(sol))
    sys.stdout.write(json.dumps(doc) + "\n")


def cmd_eval(args) -> None:
    inst, truth, _ = _load_source(args)
    sol = load_solution(args.solution)
    validate_solution(inst, sol)
    method = evaluator_selection(inst, override=args.evaluator)
    out = Evaluator(inst, method, draws=args.mc_draws, seed=args.seed)(sol)
    doc = {"picks": list(sol.picks), "cost": total_cost(inst, sol), "method": method.value,
           "verdict": out.verdict, "confidence": out.confidence, "work": out.work,
           "draws": out.draws, "screened": out.screened}
    if args.brute:
        fit, total = brute_force_count(inst, sol)
        doc["brute"] = {"confidence": fit / total,
                        "feasible": total - fit <= violation_allowance(
                            inst.confidence_level, total)}
    if truth is not None:
        doc["RCL"] = real_confidence(truth, sol, args.rcl_draws, args.seed)
    _emit(args, json.dumps(doc) + "\n")


def cmd_experiment(args) -> None:
    inst, truth, name = _load_source(args, need_truth=True)
    algs = [a for a in args.algorithms.split(",") if a]
    try:
        cfg = RunConfig(inst, truth, name, algs, _params(args), reps=args.reps,
                        seed=args.seed, evaluator=args.evaluator, rcl_draws=args.rcl_draws)
    except ValueError as exc:
        raise CliError("usage", str(exc), 2) from None
    _emit(args, run_experiment(cfg).to_csv())


def cmd_ablate(args) -> None:
    suite = []
    for name in args.presets.split(","):
        try:
            spec = preset(name)
        except KeyError as exc:
            raise CliError("unknown-preset", str(exc.args[0]), 2) from None
        suite.append((name, generate(spec, args.instance_seed)[0]))
    seeds = [args.seed + r for r in range(args.reps)]
    table = run_ablation(suite, seeds, _params(args), evaluator=args.evaluator)
    _emit(args, table.to_csv())


def cmd_probe(args) -> None:
    inst, _, _ = _load_source(args)
    rows = amc_speed_probe(inst, args.n, args.seed, args.mc_draws)
    lines = ["method,evaluations,seconds,seconds_per_1000,screened,draws,feasible"]
    for r in rows:
        lines.append(",".join(str(v) for v in asdict(r).values()))
    _emit(args, "\n".join(lines) + "\n")


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "eval": cmd_eval,
            "experiment": cmd_experiment, "ablate": cmd_ablate, "probe-amc": cmd_probe}


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CliError as exc:
        return _fail(exc.kind, str(exc), exc.code)
    except InstanceError as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
