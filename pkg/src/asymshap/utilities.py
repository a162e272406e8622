"""Score functions v(S) over subsets of the training set.

A utility is any callable mapping an iterable of training ids to a float.
The classes here also expose ``n`` (training-set size) and
``mask_value(mask)`` for bitmask-indexed evaluation, which the exact oracles
and the Monte Carlo estimator use to memoize.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Dataset
from .errors import DimensionMismatchError, EmptyTestSetError, TooLargeError, ValuationError

METRICS = ("euclidean", "manhattan", "cosine")
MAX_TABLE_PLAYERS = 20


def pairwise_distances(a: np.ndarray, b: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Distances between rows of ``a`` (queries) and rows of ``b``, shape (len(a), len(b)).

    Cosine distance involving a zero vector is +inf so such points rank last.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(f"query dimension {a.shape[1]} != training dimension {b.shape[1]}")
    if metric == "euclidean":
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric == "manhattan":
        return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)
    if metric == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            sim = (a @ b.T) / np.outer(na, nb)
        d = 1.0 - sim
        d[(na == 0)[:, None] | (nb == 0)[None, :]] = np.inf
        return d
    raise ValuationError(f"unknown metric {metric!r}; expected one of {METRICS}")


def rank_order(distances: np.ndarray) -> np.ndarray:
    """Row-wise ranking of training ids by (distance, id) ascending."""
    return np.argsort(distances, axis=-1, kind="stable")


def mask_to_ids(mask: int) -> list[int]:
    ids = []
    i = 0
    while mask:
        if mask & 1:
            ids.append(i)
        mask >>= 1
        i += 1
    return ids


def ids_to_mask(ids: Iterable[int]) -> int:
    mask = 0
    for i in ids:
        mask |= 1 << int(i)
    return mask


class Utility:
    """Base class: subclasses implement ``_score(ids: np.ndarray)``."""

    n: int

    def __call__(self, subset: Iterable[int]) -> float:
        ids = np.fromiter((int(i) for i in subset), dtype=np.int64)
        return self._score(ids)

    def mask_value(self, mask: int) -> float:
        return self._score(np.asarray(mask_to_ids(mask), dtype=np.int64))

    def _score(self, ids: np.ndarray) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


class KNNUtility(Utility):
    """Mean KNN probability-of-the-right-label over a test set.

    Per test point the score is ``(1/K) * #{label matches among the
    min(K, |S|) nearest members of S}``; an empty subset scores
    ``empty_score`` (0 by default, the empty sum).
    """

    def __init__(self, train: Dataset, test: Dataset, k: int = 5, metric: str = "euclidean", empty_score: float = 0.0):
        if k < 1:
            raise ValuationError("K must be a positive integer")
        if len(test) == 0:
            raise EmptyTestSetError("test set is empty")
        if test.dim != train.dim:
            raise DimensionMismatchError(f"test dimension {test.dim} != training dimension {train.dim}")
        self.train = train
        self.test = test
        self.k = int(k)
        self.metric = metric
        self.empty_score = float(empty_score)
        self.n = len(train)
        self.distances = pairwise_distances(test.features, train.features, metric)
        self.order = rank_order(self.distances)
        # match[t, r]: does the r-th nearest training point share test point t's label
        self.match = train.labels[self.order] == test.labels[:, None]

    def _score(self, ids: np.ndarray) -> float:
        if len(ids) == 0:
            return self.empty_score
        return float(np.mean(self.scores(ids)))

    def scores(self, ids: np.ndarray) -> np.ndarray:
        """Per-test-point KNN score of subset ``ids`` (0 for an empty subset)."""
        member = np.zeros(self.n, dtype=bool)
        member[ids] = True
        in_s = member[self.order]
        kept = in_s & (np.cumsum(in_s, axis=1) <= self.k)
        return (kept & self.match).sum(axis=1) / self.k

    def describe(self) -> dict:
        return {"kind": "knn", "k": self.k, "metric": self.metric, "empty_score": self.empty_score}


def knn_score_single(subset: Iterable[int], train: Dataset, x_test, y_test: int, k: int, metric: str = "euclidean") -> float:
    """KNN score of one test point for the training subset ``subset``."""
    ids = np.asarray(sorted(int(i) for i in subset), dtype=np.int64)
    if len(ids) == 0:
        return 0.0
    x_test = np.asarray(x_test, dtype=np.float64).reshape(1, -1)
    d = pairwise_distances(x_test, train.features[ids], metric)[0]
    nearest = ids[rank_order(d)][:k]
    return float(np.sum(train.labels[nearest] == y_test)) / k


def knn_utility(subset: Iterable[int], train: Dataset, test: Dataset, k: int, metric: str = "euclidean") -> float:
    if len(test) == 0:
        raise EmptyTestSetError("test set is empty")
    ids = list(subset)
    return float(np.mean([knn_score_single(ids, train, test.features[t], test.labels[t], k, metric) for t in range(len(test))]))


class CentroidUtility(Utility):
    """Accuracy of a nearest-class-centroid classifier trained on the subset.

    Centroids are per-label feature means, so duplicating points never moves
    them. Labels absent from the subset cannot be predicted; distance ties go
    to the smaller label.
    """

    def __init__(self, train: Dataset, test: Dataset, empty_score: float | None = None):
        if len(test) == 0:
            raise EmptyTestSetError("test set is empty")
        if test.dim != train.dim:
            raise DimensionMismatchError(f"test dimension {test.dim} != training dimension {train.dim}")
        self.train = train
        self.test = test
        self.n = len(train)
        self.num_classes = max(train.num_classes, test.num_classes)
        self.empty_score = 1.0 / self.num_classes if empty_score is None else float(empty_score)

    def _score(self, ids: np.ndarray) -> float:
        if len(ids) == 0:
            return self.empty_score
        return float(np.mean(self.predict(ids) == self.test.labels))

    def predict(self, ids: np.ndarray) -> np.ndarray:
        x = self.train.features[ids]
        y = self.train.labels[ids]
        dist = np.full((len(self.test), self.num_classes), np.inf)
        for c in np.unique(y):
            centroid = x[y == c].mean(axis=0)
            dist[:, c] = np.linalg.norm(self.test.features - centroid, axis=1)
        return np.argmin(dist, axis=1)

    def describe(self) -> dict:
        return {"kind": "centroid", "empty_score": self.empty_score}


class TableUtility(Utility):
    """Explicit game: ``table[mask]`` is v of the subset encoded by ``mask``."""

    def __init__(self, n: int, table: Sequence[float] | Mapping[int, float] | np.ndarray):
        if n > MAX_TABLE_PLAYERS:
            raise TooLargeError(f"table utilities support at most {MAX_TABLE_PLAYERS} points, got {n}")
        self.n = int(n)
        size = 1 << self.n
        if isinstance(table, Mapping):
            arr = np.zeros(size)
            for mask, value in table.items():
                if not 0 <= mask < size:
                    raise ValuationError(f"mask {mask} out of range for n={n}")
                arr[mask] = value
        else:
            arr = np.asarray(table, dtype=np.float64)
            if arr.shape != (size,):
                raise ValuationError(f"table needs {size} entries, got {arr.shape}")
        self.table = arr
        self.table.setflags(write=False)

    @classmethod
    def from_function(cls, n: int, fn: Callable[[frozenset], float]) -> "TableUtility":
        return cls(n, [fn(frozenset(mask_to_ids(mask))) for mask in range(1 << n)])

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "TableUtility":
        return cls(n, rng.uniform(0.0, 1.0, size=1 << n))

    def mask_value(self, mask: int) -> float:
        return float(self.table[mask])

    def _score(self, ids: np.ndarray) -> float:
        return float(self.table[ids_to_mask(ids)])

    def describe(self) -> dict:
        return {"kind": "custom-table", "n": self.n}


def utility_table(utility, n: int) -> np.ndarray:
    """v over every bitmask of ``n`` players, indexed by mask."""
    if n > MAX_TABLE_PLAYERS:
        raise TooLargeError(f"subset enumeration is capped at n={MAX_TABLE_PLAYERS}, got {n}")
    if isinstance(utility, TableUtility) and utility.n == n:
        return np.asarray(utility.table)
    value = getattr(utility, "mask_value", None)
    if value is None:
        return np.array([utility(mask_to_ids(mask)) for mask in range(1 << n)], dtype=np.float64)
    return np.array([value(mask) for mask in range(1 << n)], dtype=np.float64)


def make_utility(cfg: Mapping[str, object], train: Dataset, test: Dataset) -> Utility:
    """Build a utility from ``utility.*`` config keys."""
    kind = str(cfg.get("utility.kind", "knn"))
    empty = cfg.get("utility.empty_score")
    if kind == "knn":
        return KNNUtility(
            train,
            test,
            k=int(cfg.get("utility.k", cfg.get("knn.k", 5))),
            metric=str(cfg.get("utility.metric", cfg.get("knn.metric", "euclidean"))),
            empty_score=0.0 if empty is None else float(empty),
        )
    if kind == "centroid":
        return CentroidUtility(train, test, empty_score=None if empty is None else float(empty))
    raise ValuationError(f"utility.kind must be 'knn' or 'centroid' for dataset runs, got {kind!r}")
