"""Exact asymmetric data Shapley for the unweighted KNN score.

For each class V = S_k (with U the union of lower classes) and each test
point, the points of V are ranked by distance; the farthest one gets a closed
form value and every nearer one is obtained from its successor through one of
four difference rules, selected by comparing K with the beta counts (how many
U points outrank a V point). Per-test-point values are then averaged.

Ranks are 1-based inside the recursion to keep the index arithmetic readable:
``ctx.v_ids[i - 1]`` is the i-th closest V point and ``ctx.u_labels[r - 1]``
the label of the r-th closest U point.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Dataset, OrderedPartition
from .errors import (
    DimensionMismatchError,
    EmptyClassError,
    EmptyTestSetError,
    IndexOutOfRangeError,
    ValuationError,
)
from .report import ValueReport
from .utilities import pairwise_distances

# Binomial ratios switch from exact integers to log-gamma above this |V|.
EXACT_BINOMIAL_LIMIT = 30
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class RankContext:
    u_ids: np.ndarray  # U ids, closest first
    v_ids: np.ndarray  # V ids, closest first
    u_labels: np.ndarray
    v_labels: np.ndarray
    beta: np.ndarray  # beta[i-1]: U points ahead of the i-th closest V point

    @property
    def size_u(self) -> int:
        return len(self.u_ids)

    @property
    def size_v(self) -> int:
        return len(self.v_ids)


def _rank_context(ids_u: np.ndarray, ids_v: np.ndarray, dist: np.ndarray, labels: np.ndarray) -> RankContext:
    joint = np.sort(np.concatenate([ids_u, ids_v]))
    ranked = joint[np.argsort(dist[joint], kind="stable")]
    in_v = np.isin(ranked, ids_v)
    u_ranked = ranked[~in_v]
    v_ranked = ranked[in_v]
    # U points seen before each V point in the joint ranking
    beta = np.cumsum(~in_v)[in_v]
    return RankContext(u_ranked, v_ranked, labels[u_ranked], labels[v_ranked], beta.astype(np.int64))


def build_rank_context(dataset: Dataset, sigma: OrderedPartition, k: int, test_x, metric: str = "euclidean") -> RankContext:
    """Ranking data for class ``k`` (0-based) and one test point.

    Ties in distance are broken by the smaller id, across U and V alike.
    """
    if not 0 <= k < sigma.m:
        raise ValuationError(f"class index {k} outside 0..{sigma.m - 1}")
    if not sigma.classes[k]:
        raise EmptyClassError(f"class {k} is empty")
    dist = pairwise_distances(np.asarray(test_x, dtype=np.float64).reshape(1, -1), dataset.features, metric)[0]
    ids_u = np.asarray(sigma.prefix(k), dtype=np.int64)
    ids_v = np.asarray(sigma.classes[k], dtype=np.int64)
    return _rank_context(ids_u, ids_v, dist, dataset.labels)


@lru_cache(maxsize=64)
def _log_factorials(n: int) -> np.ndarray:
    return np.array([math.lgamma(x + 1.0) for x in range(n + 1)])


def _binom_in_range(n: int, r: int) -> bool:
    return n >= 0 and 0 <= r <= n


def hypergeom_ratio(k: int, m: int, size_v: int, i: int) -> float:
    """C(k, m) * C(|V|-2-k, i-1-m) / C(|V|-2, i-1); zero when any binomial is out of range."""
    n = size_v - 2
    if not (_binom_in_range(k, m) and _binom_in_range(n - k, i - 1 - m) and _binom_in_range(n, i - 1)):
        return 0.0
    if size_v <= EXACT_BINOMIAL_LIMIT:
        return math.comb(k, m) * math.comb(n - k, i - 1 - m) / math.comb(n, i - 1)
    lf = _log_factorials(n)
    log_ratio = (
        lf[k] - lf[m] - lf[k - m]
        + lf[n - k] - lf[i - 1 - m] - lf[n - k - i + 1 + m]
        - lf[n] + lf[i - 1] + lf[n - i + 1]
    )
    return math.exp(log_ratio)


def _ratio_mass(m: int, size_v: int, i: int, k_lo: int) -> float:
    """Sum of hypergeom_ratio(k, m, |V|, i) over k = k_lo..|V|-2."""
    n = size_v - 2
    lo = max(k_lo, m)
    # C(n-k, i-1-m) vanishes once n-k < i-1-m
    hi = n - (i - 1 - m)
    if m > i - 1 or lo > hi:
        return 0.0
    if size_v <= EXACT_BINOMIAL_LIMIT:
        num = sum(math.comb(k, m) * math.comb(n - k, i - 1 - m) for k in range(lo, hi + 1))
        return num / math.comb(n, i - 1)
    lf = _log_factorials(n)
    k = np.arange(lo, hi + 1)
    log_ratio = (
        lf[k] - lf[m] - lf[k - m]
        + lf[n - k] - lf[i - 1 - m] - lf[n - k - i + 1 + m]
        - lf[n] + lf[i - 1] + lf[n - i + 1]
    )
    terms = np.exp(log_ratio)
    return math.fsum(terms[terms >= UNDERFLOW])


def _u_match(ctx: RankContext, rank: int, y_test: int) -> int:
    """1 if the rank-th closest U point exists and carries the test label."""
    if 1 <= rank <= ctx.size_u:
        return int(ctx.u_labels[rank - 1] == y_test)
    return 0


def knn_ads_initial(ctx: RankContext, K: int, y_test: int) -> float:
    """Value of the farthest V point for one test point.

    Its marginal contribution to S ∪ U is nonzero only while fewer than K
    points outrank it (|S| < K - beta); it then gains its own label match and,
    when enough U points exist, evicts the (K - |S|)-th closest U point.
    Coalition sizes cannot exceed |V| - 1, hence the min(K - beta, |V|) cap.
    """
    size_v = ctx.size_v
    if size_v < 1:
        raise EmptyClassError("rank context has no V points")
    beta = int(ctx.beta[-1])
    if K <= beta:
        return 0.0
    reach = min(K - beta, size_v)
    own = int(ctx.v_labels[-1] == y_test)
    evicted = sum(_u_match(ctx, K - s, y_test) for s in range(reach))
    return (own * reach - evicted) / (K * size_v)


def step_case(ctx: RankContext, K: int, i: int) -> int:
    """Which of the four difference rules links ranks i and i+1 (1..4)."""
    if not 1 <= i <= ctx.size_v - 1:
        raise IndexOutOfRangeError(f"recursion index {i} outside 1..{ctx.size_v - 1}")
    b_i, b_next = int(ctx.beta[i - 1]), int(ctx.beta[i])
    if K <= b_i:
        return 1
    if b_i == b_next:
        return 2
    if b_next < K:
        return 3
    return 4


def knn_ads_difference(ctx: RankContext, K: int, i: int, y_test: int) -> tuple[float, int]:
    """phi(i-th closest V point) - phi((i+1)-th closest), and the rule used."""
    case = step_case(ctx, K, i)
    if case == 1:
        return 0.0, 1
    size_v = ctx.size_v
    b_i, b_next = int(ctx.beta[i - 1]), int(ctx.beta[i])
    a_i = int(ctx.v_labels[i - 1] == y_test)
    a_next = int(ctx.v_labels[i] == y_test)
    if case == 2:
        return (a_i - a_next) / K * min(K - b_i, i) / i, 2
    # Cases 3 and 4: coalitions with K - b_next <= |S1| < K - b_i (case 3) or
    # |S1| < K - b_i (case 4) let point i in, evicting the (K - m)-th closest
    # U point, while point i+1 changes nothing.
    m_lo = K - b_next if case == 3 else 0
    m_hi = K - b_i - 1
    extra = 0.0
    for m in range(m_lo, m_hi + 1):
        mass = _ratio_mass(m, size_v, i, k_lo=m_lo)
        if mass:
            extra += mass * (a_i - _u_match(ctx, K - m, y_test)) / K
    extra /= size_v - 1
    if case == 3:
        return (a_i - a_next) / K * min(K - b_next, i) / i + extra, 3
    return extra, 4


def knn_ads_step(ctx: RankContext, K: int, i: int, value_next: float, y_test: int) -> float:
    diff, _ = knn_ads_difference(ctx, K, i, y_test)
    return value_next + diff


def _single_class_values(v_labels: np.ndarray, K: int, y_test: int) -> np.ndarray:
    """Classical KNN-Shapley recursion (no lower classes), closest first."""
    size_v = len(v_labels)
    match = (v_labels == y_test).astype(np.float64)
    out = np.empty(size_v)
    out[-1] = match[-1] * min(K, size_v) / (K * size_v)
    for i in range(size_v - 1, 0, -1):
        out[i - 1] = out[i] + (match[i - 1] - match[i]) / K * min(K, i) / i
    return out


def class_values(ctx: RankContext, K: int, y_test: int, cases: Counter | None = None) -> np.ndarray:
    """Per-point values of one class for one test point, closest first."""
    size_v = ctx.size_v
    if ctx.size_u == 0:
        if cases is not None:
            cases[2] += size_v - 1
        return _single_class_values(ctx.v_labels, K, y_test)
    out = np.empty(size_v)
    out[-1] = knn_ads_initial(ctx, K, y_test)
    for i in range(size_v - 1, 0, -1):
        diff, case = knn_ads_difference(ctx, K, i, y_test)
        out[i - 1] = out[i] + diff
        if cases is not None:
            cases[case] += 1
    return out


def knn_ads(
    dataset: Dataset,
    sigma: OrderedPartition,
    test_set: Dataset,
    K: int,
    metric: str = "euclidean",
    empty_score: float = 0.0,
) -> ValueReport:
    """Exact KNN asymmetric data Shapley averaged over ``test_set``.

    ``empty_score`` is v of the empty training set; the KNN score gives 0,
    and any other choice only shifts the lowest class by ``-empty_score/|S_1|``.
    """
    if K < 1:
        raise ValuationError("K must be a positive integer")
    if len(test_set) == 0:
        raise EmptyTestSetError("test set is empty")
    if test_set.dim != dataset.dim:
        raise DimensionMismatchError(f"test dimension {test_set.dim} != training dimension {dataset.dim}")
    if sigma.n != len(dataset):
        raise ValuationError(f"partition covers {sigma.n} points, dataset has {len(dataset)}")
    dist = pairwise_distances(test_set.features, dataset.features, metric)
    n = len(dataset)
    total = np.zeros(n)
    comp = np.zeros(n)  # Kahan compensation
    cases: Counter = Counter()
    for k, members in enumerate(sigma.classes):
        ids_u = np.asarray(sigma.prefix(k), dtype=np.int64)
        ids_v = np.asarray(members, dtype=np.int64)
        for t in range(len(test_set)):
            ctx = _rank_context(ids_u, ids_v, dist[t], dataset.labels)
            vals = class_values(ctx, K, int(test_set.labels[t]), cases)
            idx = ctx.v_ids
            y = vals - comp[idx]
            s = total[idx] + y
            comp[idx] = (s - total[idx]) - y
            total[idx] = s
    values = total / len(test_set)
    if empty_score:
        first = list(sigma.classes[0])
        values[first] -= empty_score / len(first)
    meta = {
        "k": int(K),
        "metric": metric,
        "n_test": len(test_set),
        "empty_score": float(empty_score),
        "case_counts": {str(c): int(cases.get(c, 0)) for c in (1, 2, 3, 4)},
        "utility": {"kind": "knn", "k": int(K), "metric": metric, "empty_score": float(empty_score)},
    }
    return ValueReport(values, "knn-ads", sigma, meta=meta)
