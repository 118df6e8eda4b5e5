import io
import math

import numpy as np
import pytest
from scipy import stats

from ccmckp.generator import (APP_ATTEMPT_PROBS, APP_WINDOW, BenchmarkSpec, DistributionSpec,
                              FAMILIES, GenerationError, ItemTruth, TruthModel, generate,
                              preset, preset_benchmarks, real_confidence, sample_true_delay,
                              solve_distribution)
from ccmckp.instance import Solution, check_nontrivial, dumps_instance

TINY_LAB = BenchmarkSpec("LAB", 3, 4, 20, 12.0, 0.99, "tiny-lab")
TINY_APP = BenchmarkSpec("APP", 3, 4, 200, 25.0, 0.99, "tiny-app")


# ---------------------------------------------------------------- moment fitting

@pytest.mark.parametrize("family,mean,var", [
    ("uniform", 5.0, 3.0), ("truncnorm", 3.0, 4.0), ("truncnorm", 2.0, 3.5),
    ("fatiguelife", 4.0, 10.0), ("gamma", 1.5, 0.3), ("bimodal", 6.0, 8.0),
    ("bimodal", 3.0, 5.0)])
def test_true_moments_match_targets(family, mean, var):
    d = solve_distribution(family, mean, var)
    mu, v = d.true_moments()
    assert mu == pytest.approx(mean, abs=1e-6)
    assert v == pytest.approx(var, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_sample_moments_converge(family):
    mean, var = (1.5, 0.3) if family == "gamma" else (5.0, 4.0)
    d = solve_distribution(family, mean, var)
    x = d.sample(np.random.default_rng(1), 10**6)
    assert x.min() >= 0
    assert x.mean() == pytest.approx(mean, rel=0.01)
    assert x.var() == pytest.approx(var, rel=0.02)


def test_unreachable_targets_rejected():
    # a zero-truncated normal cannot exceed the exponential's unit CV
    with pytest.raises(GenerationError):
        solve_distribution("truncnorm", 2.0, 15.0)
    with pytest.raises(GenerationError):
        solve_distribution("fatiguelife", 1.0, 6.0)


def test_uniform_support_and_rejection():
    d = solve_distribution("uniform", 5.0, 3.0)
    x = d.sample(np.random.default_rng(0), 10000)
    assert x.min() >= d.params[0] and x.max() <= d.params[1]
    with pytest.raises(GenerationError):
        solve_distribution("uniform", 2.0, 19.0)


def test_quantile_inverts_cdf():
    d = solve_distribution("bimodal", 5.0, 6.0)
    x = d.sample(np.random.default_rng(2), 200000)
    assert np.mean(x <= d.quantile(0.9)) == pytest.approx(0.9, abs=0.005)
    g = solve_distribution("gamma", 1.0, 0.5)
    assert g.quantile(0.5) == pytest.approx(stats.gamma(2.0, scale=0.5).median())


# ---------------------------------------------------------------- LAB

def test_lab_determinism_and_ranges():
    a, ta = generate(TINY_LAB, 4)
    b, tb = generate(TINY_LAB, 4)
    assert dumps_instance(a) == dumps_instance(b) and ta == tb
    assert dumps_instance(generate(TINY_LAB, 5)[0]) != dumps_instance(a)
    for row in a.costs:
        assert np.all((row >= 1) & (row <= 10))
    check_nontrivial(a)


def test_lab_family_moment_ranges():
    means = []
    for seed in range(6):
        _, truth = generate(BenchmarkSpec("LAB", 5, 10, 5, 20.0), seed)
        for row in truth.items:
            for it in row:
                if it.base.family == "gamma":
                    assert 0.5 <= it.base.mean <= 2.5
                else:
                    assert 2 <= it.base.mean <= 8
                    assert 1 <= it.base.var <= 19
                    means.append(it.base.mean)
    assert len(means) > 200


def test_capacity_clamped_into_band(caplog):
    spec = BenchmarkSpec("LAB", 3, 3, 10, 1000.0)
    inst, truth = generate(spec, 0)
    assert inst.capacity == inst.nontrivial_band()[1] == truth.capacity
    assert "clamped" in caplog.text


# ---------------------------------------------------------------- APP

def test_app_attempt_frequencies():
    _, truth = generate(TINY_APP, 0)
    x = sample_true_delay(truth, 0, 0, np.random.default_rng(3), 10**6)
    assert x.max() <= 4 * APP_WINDOW and x.min() > 0
    attempts = np.ceil(x / APP_WINDOW) - 1
    freq = np.bincount(attempts.astype(int), minlength=4) / x.size
    for f, p in zip(freq, APP_ATTEMPT_PROBS):
        assert abs(f - p) <= 3 * math.sqrt(p * (1 - p) / x.size)


def test_app_samples_and_cost_direction():
    inst, _ = generate(BenchmarkSpec("APP", 10, 10, 100, 40.0), 1)
    assert max(float(d[:, 0].max()) for d in inst.desc) <= 40
    effort = np.concatenate([m + s for m, s in zip(inst.means, inst.stds)])
    cost = np.concatenate(inst.costs)
    assert stats.spearmanr(effort, cost).statistic < 0


# ---------------------------------------------------------------- truth model

def test_truth_round_trip(tmp_path):
    _, truth = generate(TINY_APP, 2)
    again = TruthModel.load(io.StringIO(truth.dumps()))
    assert again == truth
    p = tmp_path / "t.json"
    p.write_text(truth.dumps())
    assert TruthModel.load(str(p)) == truth


def test_real_confidence_edges():
    _, truth = generate(TINY_APP, 2)
    sol = Solution([0, 0, 0])
    assert real_confidence(truth, sol, 10**4, 0, capacity=40.0 * 3) == 1.0
    assert real_confidence(truth, sol, 10**4, 0, capacity=0.0) == 0.0
    assert real_confidence(truth, sol, 1000, 5) == real_confidence(truth, sol, 1000, 5)
    with pytest.raises(ValueError):
        real_confidence(truth, Solution([0]), 10)


def test_real_confidence_matches_convolution():
    # two U(0,1) items: P(X + Y <= w) = w^2 / 2 for w <= 1
    u = ItemTruth(DistributionSpec("uniform", 0.5, 1 / 12, (0.0, 1.0)))
    truth = TruthModel("LAB", ((u,), (u,)), 0.8, 0)
    n, p = 10**6, 0.32
    got = real_confidence(truth, Solution([0, 0]), n, 9)
    assert abs(got - p) <= 3 * math.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------- presets

def test_presets():
    assert len(preset_benchmarks()) == 40
    s = preset("LAB-ss1-W11")
    assert (s.m, s.N, s.L, s.capacity) == (3, 5, 30, 11.0)
    s = preset("APP-ls1-W37")
    assert (s.m, s.N, s.L, s.capacity) == (10, 10, 500, 37.0)
    s = preset("LAB-ls6-W75")
    assert (s.m, s.N, s.L) == (50, 10, 500)
    with pytest.raises(KeyError):
        preset("LAB-ss9-W1")
    with pytest.raises(ValueError):
        BenchmarkSpec("XYZ", 1, 1, 1, 1.0)
