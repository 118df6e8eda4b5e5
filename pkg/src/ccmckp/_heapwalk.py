"""Compiled max-heap walk over index tuples in non-increasing sum order.

Each index tuple ``t`` (one descending-sample position per class) is pushed
by exactly one parent: the tuple obtained by decrementing the last nonzero
coordinate of ``t``.  A popped tuple with pivot ``p`` therefore only spawns
successors ``t + e_j`` for ``j >= p``.  Every tuple is reachable, none is
pushed twice, and a parent's sum is never below its child's, so pops come
out in non-increasing order without a visited set.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _tuple_sum(desc, idx, row, m):
    s = 0.0
    for i in range(m):
        s += desc[i, idx[row, i]]
    return s


@njit(cache=True)
def _sift_up(hs, hn, pos):
    s = hs[pos]
    n = hn[pos]
    while pos > 0:
        parent = (pos - 1) >> 1
        if hs[parent] >= s:
            break
        hs[pos] = hs[parent]
        hn[pos] = hn[parent]
        pos = parent
    hs[pos] = s
    hn[pos] = n


@njit(cache=True)
def _sift_down(hs, hn, size):
    pos = 0
    s = hs[0]
    n = hn[0]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and hs[child + 1] > hs[child]:
            child += 1
        if hs[child] <= s:
            break
        hs[pos] = hs[child]
        hn[pos] = hn[child]
        pos = child
    hs[pos] = s
    hn[pos] = n


@njit(cache=True)
def heap_walk(desc, capacity, max_pops, stop_at_or_below, record):
    """Pop up to ``max_pops`` sums in non-increasing order.

    Stops early (before counting) on the first popped sum ``<= capacity``
    when ``stop_at_or_below`` is set.  Returns ``(pops_above, stopped,
    recorded_sums, pushes)`` where ``pops_above`` counts popped sums
    strictly above ``capacity``.
    """
    m, L = desc.shape
    cap = 1024
    idx = np.zeros((cap, m), dtype=np.int32)
    pivot = np.zeros(cap, dtype=np.int32)
    hs = np.empty(cap, dtype=np.float64)
    hn = np.empty(cap, dtype=np.int64)
    n_nodes = 1
    hs[0] = _tuple_sum(desc, idx, 0, m)
    hn[0] = 0
    size = 1
    rec = np.empty(max_pops if record else 0, dtype=np.float64)
    pops = 0
    above = 0
    stopped = False
    pushes = 1
    while size > 0 and pops < max_pops:
        s = hs[0]
        node = hn[0]
        size -= 1
        if size > 0:
            hs[0] = hs[size]
            hn[0] = hn[size]
            _sift_down(hs, hn, size)
        if record:
            rec[pops] = s
        pops += 1
        if s <= capacity:
            if stop_at_or_below:
                stopped = True
                break
        else:
            above += 1
        for j in range(pivot[node], m):
            if idx[node, j] + 1 >= L:
                continue
            if n_nodes == idx.shape[0]:
                new_cap = 2 * idx.shape[0]
                idx2 = np.empty((new_cap, m), dtype=np.int32)
                idx2[:n_nodes] = idx[:n_nodes]
                idx = idx2
                piv2 = np.empty(new_cap, dtype=np.int32)
                piv2[:n_nodes] = pivot[:n_nodes]
                pivot = piv2
                hs2 = np.empty(new_cap, dtype=np.float64)
                hs2[:size] = hs[:size]
                hs = hs2
                hn2 = np.empty(new_cap, dtype=np.int64)
                hn2[:size] = hn[:size]
                hn = hn2
            for i in range(m):
                idx[n_nodes, i] = idx[node, i]
            idx[n_nodes, j] += 1
            pivot[n_nodes] = j
            hs[size] = _tuple_sum(desc, idx, n_nodes, m)
            hn[size] = n_nodes
            _sift_up(hs, hn, size)
            size += 1
            n_nodes += 1
            pushes += 1
    return above, stopped, rec[:pops] if record else rec, pushes
