"""How the feasibility evaluators see one solution.

Builds a two-class toy instance, lists its largest totals in heap order,
and compares the exact verdict with brute force, simulation, the screening
test and the two concentration bounds.
"""
from ccmckp import Instance, Item, Solution
from ccmckp.evaluate import (bernstein_lower_bound, brute_force_confidence, build_screen_tuples,
                             exact_feasibility, fast_screen, hoeffding_lower_bound,
                             monte_carlo_confidence, picked_moments, popped_sums_prefix)

inst = Instance(
    classes=((Item.from_samples(3.0, [4.0, 2.0, 1.0]), Item.from_samples(1.0, [7.0, 6.0, 5.0])),
             (Item.from_samples(2.0, [3.0, 1.0, 0.5]),)),
    capacity=6.0, confidence_level=0.75)
sol = Solution([0, 0])

print("largest totals, popped in order:", popped_sums_prefix(inst, sol, 9))
print("brute-force confidence:", brute_force_confidence(inst, sol))
out = exact_feasibility(inst, sol)
print("exact walk:", out.verdict, "after", out.work, "pops")
print("simulation (10^5 draws):", monte_carlo_confidence(inst, sol, 10**5, 0).confidence)

tuples = build_screen_tuples(2, 3, 0.75)
print("screen tuples:", tuples, "-> screened out:", fast_screen(inst, sol, tuples))

ms = picked_moments(inst, sol)
print(f"Bernstein bound {bernstein_lower_bound(ms, inst.capacity):.3f}, "
      f"Hoeffding bound {hoeffding_lower_bound(ms, inst.capacity):.3f}")

heavy = Solution([1, 0])
print("heavier pick:", exact_feasibility(inst, heavy).verdict,
      "screened out:", fast_screen(inst, heavy, tuples))
