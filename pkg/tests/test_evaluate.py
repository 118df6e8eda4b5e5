import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from ccmckp.evaluate import (Evaluator, GuardLimitExceeded, Method, MomentSummary,
                             accelerated_mc, bernstein_lower_bound, brute_force_confidence,
                             brute_force_count, brute_force_feasible, build_screen_tuples,
                             exact_feasibility, fast_screen, gaussian_feasibility,
                             hoeffding_lower_bound, monte_carlo_confidence, norm_ppf,
                             picked_moments, popped_sums_prefix, required_sample_size,
                             violation_allowance)
from ccmckp.instance import Solution

from conftest import instances, make_instance, random_instance, random_solution

ENGINES = ("compiled", "python", "split")


def ab(W, P0=0.9):
    return make_instance([[[4.0, 2.0]], [[3.0, 1.0]]], W, P0)


S0 = Solution([0, 0])


# ---------------------------------------------------------------- brute force

def test_brute_force_examples():
    one = make_instance([[[5.0, 3.0, 1.0]]], 3.0)
    assert brute_force_confidence(one, Solution([0])) == pytest.approx(2 / 3)
    assert brute_force_confidence(ab(5.0), S0) == 0.75
    assert brute_force_confidence(ab(7.0), S0) == 1.0


def test_brute_force_guard():
    inst = make_instance([[[1.0] * 10]] * 3, 3.0)
    with pytest.raises(GuardLimitExceeded):
        brute_force_count(inst, Solution([0, 0, 0]), limit=999)


def test_violation_allowance_decimal_reading():
    assert violation_allowance(0.99, 100) == 1
    assert violation_allowance(0.9, 10) == 1
    assert violation_allowance(0.99, 27000) == 270
    assert violation_allowance(0.99, 50) == 0


# ---------------------------------------------------------------- exact walk

@pytest.mark.parametrize("engine", ENGINES)
def test_exact_examples(engine):
    one = make_instance([[[5.0, 3.0, 1.0]]], 3.0, 0.6)
    assert exact_feasibility(one, Solution([0]), engine).feasible
    assert not exact_feasibility(ab(5.0, 0.80), S0, engine).feasible
    out = exact_feasibility(ab(7.0, 0.99), S0, engine)
    assert out.feasible and out.confidence == 1.0


@pytest.mark.parametrize("engine", ENGINES)
def test_exact_degenerate_allowance(engine):
    # fewer than one violation allowed: the first sum above W decides
    inst = make_instance([[[4.0, 2.0]], [[3.0, 1.0]]], 6.9, 0.99)
    assert not exact_feasibility(inst, S0, engine).feasible


@settings(max_examples=300, deadline=None)
@given(instances(max_m=4, max_n=2, max_L=5))
def test_exact_matches_brute_force(inst):
    sol = Solution([0] * inst.num_classes)
    truth = brute_force_feasible(inst, sol)
    fit, total = brute_force_count(inst, sol)
    for engine in ENGINES:
        out = exact_feasibility(inst, sol, engine)
        assert out.feasible == truth
        if out.confidence is not None:
            assert out.confidence == pytest.approx(fit / total, abs=1e-12)


def test_exact_ties_at_capacity_fit():
    inst = make_instance([[[0.1, 0.2]], [[0.2, 0.1]], [[0.3, 0.0]]], 0.6, 0.75)
    sol = Solution([0, 0, 0])
    for engine in ENGINES:
        assert exact_feasibility(inst, sol, engine).feasible == brute_force_feasible(inst, sol)


# ---------------------------------------------------------------- heap order

@pytest.mark.parametrize("engine", ("compiled", "python"))
def test_prefix_examples(engine):
    assert popped_sums_prefix(ab(5.0), S0, 4, engine) == [7.0, 5.0, 5.0, 3.0]
    assert popped_sums_prefix(ab(5.0), S0, 1, engine) == [7.0]
    with pytest.raises(ValueError):
        popped_sums_prefix(ab(5.0), S0, 5, engine)


@pytest.mark.parametrize("engine", ("compiled", "python"))
def test_prefix_is_sorted_sums(engine, rng):
    for _ in range(10):
        inst = random_instance(rng, 3, 1, 4)
        sol = Solution([0, 0, 0])
        rows = inst.picked_samples(sol)
        sums = [a + b + c for a, b, c in itertools.product(*rows)]
        got = popped_sums_prefix(inst, sol, 64, engine)
        assert got == sorted(sums, reverse=True)
        assert all(x >= y for x, y in zip(got, got[1:]))


def test_python_walk_never_pushes_twice():
    from ccmckp.evaluate import _python_walk
    from ccmckp._heapwalk import heap_walk
    desc = np.array([[5.0, 4.0, 1.0], [3.0, 2.0, 0.0], [2.0, 2.0, 1.0]])
    _, _, _, seen = _python_walk(desc, -1.0, 27, False, False)
    _, _, _, pushes = heap_walk(desc, -1.0, 27, False, False)
    assert seen == 27 and pushes == 27


# ---------------------------------------------------------------- Monte Carlo

def test_mc_trivial_bounds():
    assert monte_carlo_confidence(ab(7.0), S0, 1000, 3).confidence == 1.0
    # one of four sums fits; 4000 draws put the estimate within a few sd of 1/4
    est = monte_carlo_confidence(ab(3.0), S0, 4000, 3).confidence
    assert est == pytest.approx(0.25, abs=0.03)
    with pytest.raises(ValueError):
        monte_carlo_confidence(ab(5.0), S0, 0)


def test_mc_deterministic_and_close_to_brute(rng):
    inst = random_instance(rng, 2, 1, 6)
    sol = Solution([0, 0])
    a = monte_carlo_confidence(inst, sol, 10**6, 7)
    b = monte_carlo_confidence(inst, sol, 10**6, 7)
    assert a == b
    assert a.confidence == pytest.approx(brute_force_confidence(inst, sol), abs=0.005)


# ---------------------------------------------------------------- screening

def test_screen_examples():
    t = build_screen_tuples(2, 10, 0.9)
    assert (3, 3) in t
    for tup in t:
        assert math.prod(x + 1 for x in tup) > 10
    assert build_screen_tuples(1, 10, 0.9) == [(1,)]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(2, 40),
       st.sampled_from([0.5, 0.8, 0.9, 0.95, 0.99, 0.999]))
def test_screen_tuples_property(m, L, p0):
    total = L**m
    allow = violation_allowance(p0, total)
    tuples = build_screen_tuples(m, L, p0)
    assert len(tuples) <= 64
    for t in tuples:
        assert len(t) == m and all(0 <= x < L for x in t)
        assert math.prod(x + 1 for x in t) > allow


def test_screen_trivial_cases():
    # one violation allowed; sums 7, 5, 5 exceed W=3
    inst = make_instance([[[4.0, 2.0]], [[3.0, 1.0]]], 3.0, 0.75)
    t = build_screen_tuples(2, 2, 0.75)
    assert fast_screen(inst, S0, t)
    assert not fast_screen(inst.with_capacity(7.0), S0, t)


@settings(max_examples=200, deadline=None)
@given(instances(max_m=4, max_n=2, max_L=5))
def test_screen_sound(inst):
    sol = Solution([0] * inst.num_classes)
    t = build_screen_tuples(inst.num_classes, inst.sample_count, inst.confidence_level)
    if fast_screen(inst, sol, t):
        assert not brute_force_feasible(inst, sol)
        assert brute_force_confidence(inst, sol) < inst.confidence_level


def test_amc_delegation(rng):
    inst = random_instance(rng, 3, 1, 8)
    sol = Solution([0, 0, 0])
    loose = inst.with_capacity(inst.nontrivial_band()[1])
    assert accelerated_mc(loose, sol, 5000, 4).confidence == \
        monte_carlo_confidence(loose, sol, 5000, 4).confidence
    tight = inst.with_capacity(inst.nontrivial_band()[0])
    out = accelerated_mc(tight, sol, 5000, 4)
    assert not out.feasible and out.screened and out.draws == 0


# ---------------------------------------------------------------- bounds

def mo(mean, var, lo, hi):
    return MomentSummary(mean, math.sqrt(var), lo, hi)


def test_bound_examples():
    assert bernstein_lower_bound([mo(5, 1, 4.5, 5.5)], 5.0) == 0.0
    assert bernstein_lower_bound([mo(0, 1, 0, 1)], 3.0) == pytest.approx(1 - math.exp(-2.25))
    assert hoeffding_lower_bound([mo(0, 0.1, 0, 1)], 0.0) == 0.0
    assert hoeffding_lower_bound([mo(0, 0.1, 0, 1)], 1.0) == pytest.approx(1 - math.exp(-2))
    assert bernstein_lower_bound([mo(1, 0, 1, 1)], 2.0) == 1.0


@settings(max_examples=100, deadline=None)
@given(instances(max_m=3, max_n=1, max_L=6, integer=False))
def test_bounds_below_bootstrap_confidence(inst):
    sol = Solution([0] * inst.num_classes)
    exact = brute_force_confidence(inst, sol)
    ms = picked_moments(inst, sol)
    assert bernstein_lower_bound(ms, inst.capacity) <= exact + 1e-12
    assert hoeffding_lower_bound(ms, inst.capacity) <= exact + 1e-12


# ---------------------------------------------------------------- Gaussian

@pytest.mark.parametrize("p", [1e-12, 1e-6, 0.001, 0.02, 0.0243, 0.3, 0.5, 0.9, 0.975,
                               0.99, 0.995, 0.999999, 1 - 1e-12])
def test_norm_ppf_accuracy(p):
    assert norm_ppf(p) == pytest.approx(special.ndtri(p), abs=1e-8)


def test_gaussian_examples():
    ms = [mo(10.0, 4.0, 0, 20)]
    assert gaussian_feasibility(ms, 15.0, 0.99).feasible
    assert not gaussian_feasibility(ms, 14.6, 0.99).feasible
    flat = [mo(3.0, 0.0, 3, 3), mo(2.0, 0.0, 2, 2)]
    assert gaussian_feasibility(flat, 5.0, 0.99).feasible
    assert not gaussian_feasibility(flat, 4.99, 0.99).feasible
    assert gaussian_feasibility(ms, 10.0, 0.5).feasible
    assert not gaussian_feasibility(ms, 9.99, 0.5).feasible


# ---------------------------------------------------------------- sample size

def test_required_sample_size():
    assert required_sample_size(0.05) == 139
    assert required_sample_size(0.005) == 13863
    assert required_sample_size(0.0005) == 1386295
    with pytest.raises(ValueError):
        required_sample_size(0)


@given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5))
def test_required_sample_size_monotone(a, b):
    lo, hi = sorted((a, b))
    assert required_sample_size(lo) >= required_sample_size(hi)


# ---------------------------------------------------------------- evaluator

def test_evaluator_counts_and_memoises(rng):
    inst = random_instance(rng, 3, 3, 5)
    ev = Evaluator(inst, "exact")
    s = random_solution(rng, inst)
    a, b = ev(s), ev(s)
    assert a is b and ev.calls == 2 and ev.computed == 1
    ev.outcome(s)
    assert ev.calls == 2


@pytest.mark.parametrize("method", list(Method))
def test_evaluator_methods_run(method, rng):
    inst = random_instance(rng, 2, 2, 4)
    ev = Evaluator(inst, method, draws=2000, seed=3)
    out = ev(Solution([0, 0]))
    assert out.method is method
    assert 0.0 <= ev.confidence(Solution([0, 0])) <= 1.0


def test_mc_evaluator_reproducible_per_solution(rng):
    inst = random_instance(rng, 3, 3, 10)
    s = random_solution(rng, inst)
    a = Evaluator(inst, "mc", draws=3000, seed=9)
    b = Evaluator(inst, "mc", draws=3000, seed=9)
    b(random_solution(rng, inst))
    assert a(s).confidence == b(s).confidence
