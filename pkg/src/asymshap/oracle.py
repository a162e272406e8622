"""Brute-force exact values for small games.

These are the reference implementations every estimator is checked against,
so they favour transparency over speed and refuse inputs beyond their caps
instead of truncating.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .core import OrderedPartition, WeightSystem, permutation_weight
from .errors import DifferentClassesError, NotIcuwsError, TooLargeError
from .report import ValueReport
from .utilities import MAX_TABLE_PLAYERS, mask_to_ids, utility_table

MAX_PERMUTATION_PLAYERS = 9


def _mask_evaluator(utility) -> Callable[[int], float]:
    value = getattr(utility, "mask_value", None)
    if value is not None:
        return value
    return lambda mask: float(utility(mask_to_ids(mask)))


def _shapley_from_table(table: np.ndarray, n: int) -> np.ndarray:
    """Data Shapley of an ``n``-player game given v on every bitmask."""
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = np.array([bin(m).count("1") for m in range(1 << n)], dtype=np.int64)
    # weight of a coalition of size s not containing i: s!(n-s-1)!/n!
    weight = np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])
    phi = np.empty(n)
    for i in range(n):
        bit = np.int64(1) << i
        without = masks[(masks & bit) == 0]
        terms = weight[sizes[without]] * (table[without | bit] - table[without])
        phi[i] = math.fsum(terms)
    return phi


def exact_data_shapley(utility, n: int) -> ValueReport:
    """Classical data Shapley by enumerating all 2^n coalitions."""
    if n > MAX_TABLE_PLAYERS:
        raise TooLargeError(f"exact data Shapley is capped at n={MAX_TABLE_PLAYERS}, got {n}")
    phi = _shapley_from_table(utility_table(utility, n), n)
    return ValueReport(phi, "oracle-ds", OrderedPartition.single(n), meta=_meta(utility))


def _ordered_permutations(sigma: OrderedPartition):
    for parts in itertools.product(*(itertools.permutations(c) for c in sigma.classes)):
        yield tuple(i for part in parts for i in part)


def exact_ads_general(omega: WeightSystem, utility, all_permutations: bool = False) -> ValueReport:
    """Asymmetric data Shapley under an arbitrary weight system.

    Sums ``p_pi * marginal`` over permutations. Only ordered permutations can
    carry weight, so by default just those are enumerated; pass
    ``all_permutations=True`` to walk every one of the n! orders.
    """
    n = omega.n
    if n > MAX_PERMUTATION_PLAYERS:
        raise TooLargeError(f"permutation enumeration is capped at n={MAX_PERMUTATION_PLAYERS}, got {n}")
    table = utility_table(utility, n)
    orders = itertools.permutations(range(n)) if all_permutations else _ordered_permutations(omega.partition)
    terms: list[list[float]] = [[] for _ in range(n)]
    for order in orders:
        p = permutation_weight(omega, order)
        if p == 0.0:
            continue
        mask = 0
        for i in order:
            nxt = mask | (1 << i)
            terms[i].append(p * (table[nxt] - table[mask]))
            mask = nxt
    phi = np.array([math.fsum(t) for t in terms])
    return ValueReport(phi, "oracle-ads-general", omega.partition, meta=_meta(utility))


def _class_subgame(evaluate, base_mask: int, members: tuple[int, ...]) -> np.ndarray:
    """v(base ∪ S) for every S ⊆ members, indexed by the members-local bitmask."""
    size = len(members)
    out = np.empty(1 << size)
    for local in range(1 << size):
        full = base_mask
        for j in range(size):
            if local >> j & 1:
                full |= 1 << members[j]
        out[local] = evaluate(full)
    return out


def exact_ads_icuws(omega: WeightSystem, utility) -> ValueReport:
    """Asymmetric data Shapley under an intra-class uniform weight system.

    Point i in class k gets the data Shapley of the class-k game
    ``S -> v(S ∪ lower classes)``; the weights themselves never enter.
    """
    if not omega.is_icuws:
        raise NotIcuwsError("weights differ within a class")
    sigma = omega.partition
    too_big = [len(c) for c in sigma.classes if len(c) > MAX_TABLE_PLAYERS]
    if too_big:
        raise TooLargeError(f"per-class enumeration is capped at {MAX_TABLE_PLAYERS} points, got {too_big}")
    evaluate = _mask_evaluator(utility)
    phi = np.empty(sigma.n)
    base = 0
    for members in sigma.classes:
        local = _shapley_from_table(_class_subgame(evaluate, base, members), len(members))
        phi[list(members)] = local
        for i in members:
            base |= 1 << i
    return ValueReport(phi, "oracle-ads-icuws", sigma, meta=_meta(utility))


def exact_value_difference(omega: WeightSystem, utility, i: int, j: int) -> float:
    """phi_i - phi_j for two points of the same class, via the pairwise subset sum.

    Sums ``[v(S ∪ L ∪ {i}) - v(S ∪ L ∪ {j})] / C(|V|-2, |S|)`` over
    ``S ⊆ V \\ {i, j}``, divided by ``|V| - 1``, where V is the shared class
    and L the union of lower classes.
    """
    if not omega.is_icuws:
        raise NotIcuwsError("weights differ within a class")
    sigma = omega.partition
    k = sigma.rank(i)
    if sigma.rank(j) != k:
        raise DifferentClassesError(f"ids {i} and {j} are in classes {k} and {sigma.rank(j)}")
    if i == j:
        return 0.0
    evaluate = _mask_evaluator(utility)
    members = sigma.classes[k]
    base = 0
    for p in sigma.prefix(k):
        base |= 1 << p
    others = tuple(p for p in members if p not in (i, j))
    sub_i = _class_subgame(evaluate, base | 1 << i, others)
    sub_j = _class_subgame(evaluate, base | 1 << j, others)
    size = len(others)
    terms = [(sub_i[s] - sub_j[s]) / math.comb(size, bin(s).count("1")) for s in range(1 << size)]
    return math.fsum(terms) / (len(members) - 1)


def class_increments(utility, sigma: OrderedPartition) -> np.ndarray:
    """v(S_1 ∪..∪ S_k) - v(S_1 ∪..∪ S_{k-1}) for every class k."""
    out = []
    prev_ids: list[int] = []
    prev = float(utility(prev_ids))
    for members in sigma.classes:
        prev_ids = prev_ids + list(members)
        cur = float(utility(prev_ids))
        out.append(cur - prev)
        prev = cur
    return np.array(out)


def _meta(utility) -> dict:
    describe = getattr(utility, "describe", None)
    return {"utility": describe() if describe else {"kind": "callable"}}
