"""Datasets, ordered partitions, weight systems and permutation weights.

Class indices are 0-based in the Python API (``partition.classes[0]`` is the
lowest social class). Files and the CLI use 1-based ``class_rank`` values,
which are compacted on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyClassError,
    EmptySetError,
    MissingIdError,
    SizeMismatchError,
    UnknownIdError,
    ValuationError,
)

Permutation = tuple[int, ...]

# Products of more factors than this are accumulated in log-space.
LOG_SPACE_THRESHOLD = 20


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled feature vectors; row ``i`` is the point with id ``i``."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or (x.shape[0] > 0 and x.shape[1] < 1):
            raise DimensionMismatchError(f"features must be an (n, d) array with d >= 1, got shape {x.shape}")
        y = np.asarray(self.labels)
        if y.ndim != 1 or len(y) != len(x):
            raise SizeMismatchError(f"{len(y)} labels for {len(x)} feature rows")
        if len(y) and not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValuationError("labels must be integers")
        y = y.astype(np.int64)
        if self.num_classes < 1:
            raise ValuationError("num_classes must be >= 1")
        if len(y) and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValuationError(f"labels must lie in [0, {self.num_classes})")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def ids(self) -> range:
        return range(len(self))

    def subset(self, ids: Sequence[int]) -> "Dataset":
        ids = np.asarray(list(ids), dtype=np.int64)
        return Dataset(self.features[ids], self.labels[ids], self.num_classes)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.dim != self.dim:
            raise DimensionMismatchError(f"cannot concatenate d={self.dim} with d={other.dim}")
        return Dataset(
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
            max(self.num_classes, other.num_classes),
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


class Relation(Enum):
    EQUAL_CLASS = "equal-class"
    LESS = "less"
    GREATER = "greater"


@dataclass(frozen=True, eq=True)
class OrderedPartition:
    """Disjoint ordered classes S_1..S_m covering ids ``0..n-1``."""

    classes: tuple[tuple[int, ...], ...]
    class_of: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        classes = tuple(tuple(sorted(int(i) for i in c)) for c in self.classes)
        if not classes:
            raise EmptyClassError("an ordered partition needs at least one class")
        n = sum(len(c) for c in classes)
        owner = [-1] * n
        for k, members in enumerate(classes):
            if not members:
                raise EmptyClassError(f"class {k} is empty")
            for i in members:
                if not 0 <= i < n:
                    raise MissingIdError(f"id {i} outside 0..{n - 1}; the classes must cover exactly 0..n-1")
                if owner[i] != -1:
                    raise ValuationError(f"id {i} appears in classes {owner[i]} and {k}")
                owner[i] = k
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "class_of", tuple(owner))

    @classmethod
    def single(cls, n: int) -> "OrderedPartition":
        return cls((tuple(range(n)),))

    @property
    def n(self) -> int:
        return len(self.class_of)

    @property
    def m(self) -> int:
        return len(self.classes)

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.classes)

    def prefix(self, k: int) -> tuple[int, ...]:
        """Ids of every class strictly below class ``k``."""
        return tuple(i for c in self.classes[:k] for i in c)

    def rank(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise UnknownIdError(f"unknown id {i}")
        return self.class_of[i]


def make_ordered_partition(assignments: Mapping[int, int], compact: bool = True) -> OrderedPartition:
    """Group ids by class rank, lowest rank first.

    Ranks may be arbitrary integers; with ``compact`` they are renumbered to a
    contiguous range preserving order. Without it, ranks must already be
    ``1..m`` with no gaps.
    """
    n = len(assignments)
    missing = sorted(set(range(n)) - set(assignments))
    if missing:
        raise MissingIdError(f"ids missing from assignment: {missing[:10]}")
    ranks = sorted(set(assignments.values()))
    if not compact and ranks != list(range(1, len(ranks) + 1)):
        gaps = sorted(set(range(1, max(ranks) + 1)) - set(ranks))
        raise EmptyClassError(f"class ranks {gaps} have no members")
    position = {r: k for k, r in enumerate(ranks)}
    groups: list[list[int]] = [[] for _ in ranks]
    for i, r in assignments.items():
        groups[position[r]].append(i)
    return OrderedPartition(tuple(tuple(g) for g in groups))


def compare(sigma: OrderedPartition, i: int, j: int) -> Relation:
    ri, rj = sigma.rank(i), sigma.rank(j)
    if ri == rj:
        return Relation.EQUAL_CLASS
    return Relation.LESS if ri < rj else Relation.GREATER


def max_set(sigma: OrderedPartition, subset: Iterable[int]) -> frozenset[int]:
    """Members of ``subset`` lying in the highest class that meets it."""
    members = list(subset)
    if not members:
        raise EmptySetError("max_set of an empty set")
    top = max(sigma.rank(i) for i in members)
    return frozenset(i for i in members if sigma.class_of[i] == top)


def check_permutation(order: Sequence[int], n: int) -> Permutation:
    order = tuple(int(i) for i in order)
    if len(order) != n:
        raise SizeMismatchError(f"permutation has {len(order)} entries, expected {n}")
    if sorted(order) != list(range(n)):
        raise ValuationError(f"not a permutation of 0..{n - 1}: {order}")
    return order


def is_ordered_permutation(sigma: OrderedPartition, order: Sequence[int]) -> bool:
    order = check_permutation(order, sigma.n)
    ranks = [sigma.class_of[i] for i in order]
    return all(a <= b for a, b in zip(ranks, ranks[1:]))


def num_ordered_permutations(sigma: OrderedPartition) -> int:
    return math.prod(math.factorial(s) for s in sigma.sizes())


@dataclass(frozen=True, eq=False)
class WeightSystem:
    """Positive per-point weights together with an ordered partition."""

    weights: np.ndarray
    partition: OrderedPartition

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(w) != self.partition.n:
            raise SizeMismatchError(f"{len(w)} weights for {self.partition.n} points")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValuationError("weights must be finite and strictly positive")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def icu(cls, partition: OrderedPartition, class_weights: Sequence[float] | None = None) -> "WeightSystem":
        """Intra-class uniform system; one weight per class (default all 1)."""
        if class_weights is None:
            class_weights = [1.0] * partition.m
        if len(class_weights) != partition.m:
            raise SizeMismatchError(f"{len(class_weights)} class weights for {partition.m} classes")
        w = np.empty(partition.n)
        for k, members in enumerate(partition.classes):
            w[list(members)] = class_weights[k]
        return cls(w, partition)

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def is_icuws(self) -> bool:
        return all(len(set(self.weights[list(c)].tolist())) == 1 for c in self.partition.classes)

    def scaled(self, factor: float) -> "WeightSystem":
        return WeightSystem(self.weights * factor, self.partition)


def permutation_weight(omega: WeightSystem, order: Sequence[int]) -> float:
    """Probability the weight system assigns to one permutation.

    Zero off the ordered permutations. On them, each step contributes
    ``w[o_k] / sum(w over the maximal prefix points)``; for an ordered
    permutation the maximal prefix points are the prefix members sharing the
    class of ``o_k``, so a running per-class sum suffices.
    """
    sigma = omega.partition
    order = check_permutation(order, omega.n)
    if not is_ordered_permutation(sigma, order):
        return 0.0
    w = omega.weights
    running = [0.0] * sigma.m
    if omega.n > LOG_SPACE_THRESHOLD:
        log_p = 0.0
        for i in order:
            running[sigma.class_of[i]] += w[i]
            log_p += math.log(w[i]) - math.log(running[sigma.class_of[i]])
        return math.exp(log_p)
    p = 1.0
    for i in order:
        running[sigma.class_of[i]] += w[i]
        p *= w[i] / running[sigma.class_of[i]]
    return p


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox generator for stream ``stream`` of ``seed``.

    Distinct streams of one seed are statistically independent, which is what
    the parallel estimators rely on.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def sample_ordered_permutation(sigma: OrderedPartition, rng: np.random.Generator) -> Permutation:
    """Uniform draw from the ordered permutations of ``sigma``."""
    out: list[int] = []
    for members in sigma.classes:
        out.extend(int(i) for i in rng.permutation(np.asarray(members)))
    return tuple(out)


def sample_ordered_permutations(sigma: OrderedPartition, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent uniform ordered permutations as a (size, n) array."""
    blocks = []
    for members in sigma.classes:
        block = np.tile(np.asarray(members, dtype=np.int64), (size, 1))
        blocks.append(rng.permuted(block, axis=1) if len(members) > 1 else block)
    return np.hstack(blocks)
