"""Shared fixtures and an independent brute-force oracle.

``brute_ads`` walks all n! permutations and evaluates the weighted-permutation
probability from its definition (weight of the newcomer over the total weight
of the maximal-class members of the prefix), sharing no code with the package.
"""

import itertools
import math

import numpy as np
import pytest

from asymshap import Dataset, OrderedPartition


def brute_p(weights, classes, order):
    rank = {i: k for k, c in enumerate(classes) for i in c}
    ranks = [rank[i] for i in order]
    if any(a > b for a, b in zip(ranks, ranks[1:])):
        return 0.0
    p = 1.0
    for k in range(len(order)):
        prefix = order[: k + 1]
        top = max(rank[i] for i in prefix)
        p *= weights[order[k]] / sum(weights[i] for i in prefix if rank[i] == top)
    return p


def brute_ads(weights, classes, v):
    """v maps a frozenset of ids to a float."""
    n = len(weights)
    cache = {}

    def value(s):
        if s not in cache:
            cache[s] = v(s)
        return cache[s]

    terms = [[] for _ in range(n)]
    for order in itertools.permutations(range(n)):
        p = brute_p(weights, classes, order)
        if p == 0.0:
            continue
        seen = frozenset()
        for i in order:
            nxt = seen | {i}
            terms[i].append(p * (value(nxt) - value(seen)))
            seen = nxt
    return np.array([math.fsum(t) for t in terms])


def brute_knn_score(subset, x, y, tx, ty, k):
    """KNN score from scratch: sort the subset by (distance, id)."""
    if not subset:
        return 0.0
    total = 0.0
    for t in range(len(ty)):
        ranked = sorted(subset, key=lambda i: (float(np.linalg.norm(x[i] - tx[t])), i))
        total += sum(1 for i in ranked[:k] if y[i] == ty[t]) / k
    return total / len(ty)


def random_partition(rng, n, m):
    labels = np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    rng.shuffle(labels)
    return OrderedPartition(tuple(tuple(int(i) for i in np.flatnonzero(labels == c)) for c in range(m)))


def random_knn_instance(rng, n, n_test=3, dim=2, grid=True):
    """Points on a coarse grid so distance ties are common."""
    x = rng.integers(-3, 4, size=(n, dim)).astype(float) if grid else rng.normal(size=(n, dim))
    tx = rng.integers(-3, 4, size=(n_test, dim)).astype(float) if grid else rng.normal(size=(n_test, dim))
    return Dataset(x, rng.integers(0, 2, size=n), 2), Dataset(tx, rng.integers(0, 2, size=n_test), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
