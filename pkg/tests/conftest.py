import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from ccmckp.instance import Instance, Item, Solution


def make_instance(classes, W, P0=0.9, costs=None):
    """``classes`` is a list of classes, each a list of sample lists."""
    built = []
    for i, cls in enumerate(classes):
        row = []
        for j, samples in enumerate(cls):
            c = 1.0 if costs is None else costs[i][j]
            row.append(Item.from_samples(c, samples))
        built.append(tuple(row))
    return Instance(tuple(built), float(W), float(P0))


def random_instance(rng, m, n_max, L, P0=None, integer=False, cost_high=10.0):
    classes, costs = [], []
    for _ in range(m):
        n = int(rng.integers(1, n_max + 1))
        if integer:
            classes.append([rng.integers(0, 6, L).astype(float) for _ in range(n)])
        else:
            classes.append([rng.gamma(2.0, 1.5, L) for _ in range(n)])
        costs.append(list(rng.uniform(1, cost_high, n)))
    lo = sum(min(s.min() for s in c) for c in classes)
    hi = sum(max(s.max() for s in c) for c in classes)
    W = float(rng.uniform(lo, hi)) if not integer else float(rng.integers(int(lo), int(hi) + 1))
    if P0 is None:
        P0 = float(rng.choice([0.5, 0.6, 0.75, 0.8, 0.9, 0.95, 0.99]))
    return make_instance(classes, W, P0, costs)


def random_solution(rng, inst):
    return Solution([int(rng.integers(n)) for n in inst.class_sizes])


@st.composite
def instances(draw, max_m=3, max_n=3, max_L=4, integer=True):
    m = draw(st.integers(1, max_m))
    L = draw(st.integers(1, max_L))
    vals = st.integers(0, 6) if integer else st.floats(0, 10, allow_nan=False)
    classes = []
    for _ in range(m):
        n = draw(st.integers(1, max_n))
        classes.append([[float(v) for v in draw(st.lists(vals, min_size=L, max_size=L))]
                        for _ in range(n)])
    costs = [[float(draw(st.integers(1, 9))) for _ in c] for c in classes]
    lo = sum(min(min(s) for s in c) for c in classes)
    hi = sum(max(max(s) for s in c) for c in classes)
    W = draw(st.floats(lo, hi, allow_nan=False)) if hi > lo else lo
    if integer and hi > lo:
        W = float(draw(st.integers(int(lo), int(hi))))
    P0 = draw(st.sampled_from([0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95, 0.99]))
    return make_instance(classes, W, P0, costs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
