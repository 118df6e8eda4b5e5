"""Run every solver on one generated benchmark and score the outputs
against the hidden generating distributions."""
from ccmckp.baselines import EdaParams, GaParams, eda, gaussian_baseline, genetic_algorithm, greedy
from ccmckp.evaluate import Evaluator
from ccmckp.generator import generate, preset, real_confidence
from ccmckp.search import DdalsParams, ddals

inst, truth = generate(preset("LAB-ss2-W26"), seed=0)
print(f"{inst.num_classes} classes, {inst.sample_count} samples per item, W={inst.capacity}")

ev = Evaluator(inst, "exact")
search = ddals(inst, DdalsParams(seed=0), ev)
budget = search.eval_count
results = {
    "local search": search,
    "greedy": greedy(inst, 1.0, Evaluator(inst, "exact")),
    "genetic": genetic_algorithm(inst, GaParams(budget=budget), Evaluator(inst, "exact")),
    "EDA": eda(inst, EdaParams(budget=budget), Evaluator(inst, "exact")),
    "gaussian": gaussian_baseline(inst, DdalsParams(seed=0)),
}
print(f"{'solver':14s} {'cost':>7s} {'evals':>6s} {'est.conf':>9s} {'real conf':>9s}")
for name, r in results.items():
    rcl = real_confidence(truth, r.solution, 10**6)
    print(f"{name:14s} {r.cost:7.2f} {r.eval_count:6d} {r.confidence:9.4f} {rcl:9.4f}")
print("search history (best cost per round):", [round(c, 2) for c in search.history[:8]], "...")
