"""Synthetic scenarios, removal/addition curves and allocation summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Dataset, OrderedPartition, WeightSystem
from .errors import (
    EmptyAfterRemovalError,
    InvalidClassOrderError,
    InvalidSpecError,
    PartitionMismatchError,
    TooLargeError,
    ValuationError,
)
from .knn import knn_ads
from .oracle import class_increments, exact_ads_icuws, exact_data_shapley
from .report import ValueReport
from .utilities import MAX_TABLE_PLAYERS, CentroidUtility, KNNUtility

GENERATORS = ("two-gaussians", "drift-stream", "jitter-augment", "replicate")
DIRECTIONS = ("remove-low", "remove-high", "add-low", "add-high", "random")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic scenario.

    ``n`` is points per label for ``two-gaussians``/``jitter-augment``, points
    per label per period for ``drift-stream``, and the total number of
    original points for ``replicate``. ``noise`` is the augmentation jitter
    scale for ``jitter-augment`` and the within-cluster spread otherwise.
    """

    generator: str = "two-gaussians"
    n: int = 50
    dim: int = 2
    noise: float = 1.0
    seed: int = 0
    n_test: int | None = None
    separation: float = 3.0
    spread: float = 1.0
    corrupt: float = 0.0
    copies: int = 1
    periods: int = 3
    drift: float = 1.5

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidSpecError(f"unknown generator {self.generator!r}; expected one of {GENERATORS}")
        if self.n < 1 or self.dim < 1 or self.periods < 1 or (self.n_test is not None and self.n_test < 1):
            raise InvalidSpecError("counts and dimensions must be >= 1")
        if self.copies < 0:
            raise InvalidSpecError("copies must be >= 0")
        if self.noise < 0 or self.spread < 0:
            raise InvalidSpecError("noise and spread must be non-negative")
        if not 0.0 <= self.corrupt <= 1.0:
            raise InvalidSpecError("corrupt must be a fraction in [0, 1]")


def _gaussians(rng, per_label: int, dim: int, separation: float, spread: float, shift=None):
    centers = np.zeros((2, dim))
    centers[0, 0] = -separation / 2
    centers[1, 0] = separation / 2
    if shift is not None:
        centers = centers + shift
    x = np.vstack([rng.normal(centers[c], spread, size=(per_label, dim)) for c in (0, 1)])
    y = np.repeat([0, 1], per_label)
    order = rng.permutation(len(y))
    return x[order], y[order]


def _flip(rng, labels: np.ndarray, fraction: float) -> np.ndarray:
    labels = labels.copy()
    count = int(round(fraction * len(labels)))
    if count:
        idx = rng.choice(len(labels), size=count, replace=False)
        labels[idx] = 1 - labels[idx]
    return labels


def generate(spec: SyntheticSpec) -> tuple[Dataset, OrderedPartition, Dataset]:
    """Training set, ordered partition and test set for ``spec``; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n_test = spec.n_test if spec.n_test is not None else spec.n
    g = spec.generator

    if g == "two-gaussians":
        x, y = _gaussians(rng, spec.n, spec.dim, spec.separation, spec.noise)
        tx, ty = _gaussians(rng, n_test, spec.dim, spec.separation, spec.noise)
        return Dataset(x, y, 2), OrderedPartition.single(len(y)), Dataset(tx, ty, 2)

    if g == "jitter-augment":
        x, y = _gaussians(rng, spec.n, spec.dim, spec.separation, spec.spread)
        aug_x = x + rng.normal(0.0, 1.0, size=x.shape) * spec.noise
        aug_y = _flip(rng, y, spec.corrupt)
        tx, ty = _gaussians(rng, n_test, spec.dim, spec.separation, spec.spread)
        n0 = len(y)
        train = Dataset(np.vstack([x, aug_x]), np.concatenate([y, aug_y]), 2)
        sigma = OrderedPartition((tuple(range(n0)), tuple(range(n0, 2 * n0))))
        return train, sigma, Dataset(tx, ty, 2)

    if g == "drift-stream":
        xs, ys, classes = [], [], []
        start = 0
        direction = np.zeros(spec.dim)
        direction[-1] = 1.0
        for t in range(spec.periods):
            x, y = _gaussians(rng, spec.n, spec.dim, spec.separation, spec.noise, shift=direction * spec.drift * t)
            if t > 0:
                y = _flip(rng, y, spec.corrupt)
            xs.append(x)
            ys.append(y)
            classes.append(tuple(range(start, start + len(y))))
            start += len(y)
        # the test distribution is the latest period's
        last = direction * spec.drift * (spec.periods - 1)
        tx, ty = _gaussians(rng, n_test, spec.dim, spec.separation, spec.noise, shift=last)
        return Dataset(np.vstack(xs), np.concatenate(ys), 2), OrderedPartition(tuple(classes)), Dataset(tx, ty, 2)

    # replicate
    per_label = math.ceil(spec.n / 2)
    x, y = _gaussians(rng, per_label, spec.dim, spec.separation, spec.noise)
    x, y = x[: spec.n], y[: spec.n]
    tx, ty = _gaussians(rng, n_test, spec.dim, spec.separation, spec.noise)
    blocks = spec.copies + 1
    train = Dataset(np.vstack([x] * blocks), np.concatenate([y] * blocks), 2)
    sigma = OrderedPartition(tuple(tuple(range(b * spec.n, (b + 1) * spec.n)) for b in range(blocks)))
    return train, sigma, Dataset(tx, ty, 2)


@dataclass
class Curve:
    fractions: np.ndarray
    relative_accuracy: np.ndarray
    direction: str
    seed: int | None = None

    def __post_init__(self):
        self.fractions = np.asarray(self.fractions, dtype=np.float64)
        self.relative_accuracy = np.asarray(self.relative_accuracy, dtype=np.float64)
        if self.direction not in DIRECTIONS:
            raise ValuationError(f"unknown direction {self.direction!r}")
        if np.any(np.diff(self.fractions) <= 0):
            raise ValuationError("curve fractions must be strictly increasing")

    def to_csv(self) -> str:
        lines = ["fraction,relative_accuracy"]
        lines += [f"{f!r},{a!r}" for f, a in zip(self.fractions.tolist(), self.relative_accuracy.tolist())]
        return "\n".join(lines) + "\n"


def _fractions(steps: int | Sequence[float], max_fraction: float) -> np.ndarray:
    if isinstance(steps, (int, np.integer)):
        if steps < 2:
            raise ValuationError("a curve needs at least 2 steps")
        return np.linspace(0.0, max_fraction, int(steps))
    fr = np.asarray(steps, dtype=np.float64)
    if len(fr) < 2:
        raise ValuationError("a curve needs at least 2 steps")
    if np.any(fr < 0) or np.any(fr > 1):
        raise ValuationError("fractions must lie in [0, 1]")
    return fr


def value_order(values: np.ndarray, ids: Sequence[int], high_first: bool) -> list[int]:
    """``ids`` sorted by value (ascending, or descending); ties go to the smaller id."""
    sign = -1.0 if high_first else 1.0
    return sorted((int(i) for i in ids), key=lambda i: (sign * values[i], i))


def _ordering(values: np.ndarray, ids: Sequence[int], direction: str, seed: int | None) -> list[int]:
    if direction == "random":
        rng = np.random.default_rng(seed)
        return [int(i) for i in rng.permutation(np.asarray(sorted(ids)))]
    return value_order(values, ids, high_first=direction.endswith("high"))


def _baseline(utility, ids) -> float:
    base = float(utility(ids))
    if not base > 0:
        raise ValuationError(f"relative accuracy needs a positive baseline score, got {base}")
    return base


def removal_curve(
    values: ValueReport | np.ndarray,
    target_class: int,
    dataset: Dataset,
    sigma: OrderedPartition,
    utility,
    steps: int | Sequence[float] = 6,
    direction: str = "remove-low",
    seed: int | None = None,
    max_fraction: float = 0.5,
) -> Curve:
    """Relative score as the lowest/highest-valued points of one class are dropped."""
    if direction not in ("remove-low", "remove-high", "random"):
        raise ValuationError(f"{direction!r} is not a removal direction")
    if not 0 <= target_class < sigma.m:
        raise ValuationError(f"class index {target_class} outside 0..{sigma.m - 1}")
    vals = values.values if isinstance(values, ValueReport) else np.asarray(values)
    fractions = _fractions(steps, max_fraction)
    pool = sigma.classes[target_class]
    order = _ordering(vals, pool, direction, seed)
    everyone = list(range(len(dataset)))
    base = _baseline(utility, everyone)
    rel = []
    for f in fractions:
        dropped = set(order[: int(round(f * len(pool)))])
        kept = [i for i in everyone if i not in dropped]
        if not kept:
            raise EmptyAfterRemovalError(f"removing {f:.0%} of class {target_class} empties the training set")
        rel.append(float(utility(kept)) / base)
    return Curve(fractions, rel, direction, seed)


def addition_curve(
    values: ValueReport | np.ndarray,
    base_classes: Sequence[int],
    pool_class: int,
    dataset: Dataset,
    sigma: OrderedPartition,
    utility,
    steps: int | Sequence[float] = 6,
    direction: str = "add-high",
    seed: int | None = None,
    max_fraction: float = 1.0,
) -> Curve:
    """Relative score as pool-class points are added to the base classes in value order."""
    if direction not in ("add-low", "add-high", "random"):
        raise ValuationError(f"{direction!r} is not an addition direction")
    base_classes = list(base_classes)
    if not base_classes or not 0 <= pool_class < sigma.m or pool_class <= max(base_classes):
        raise InvalidClassOrderError(f"pool class {pool_class} must rank above base classes {base_classes}")
    vals = values.values if isinstance(values, ValueReport) else np.asarray(values)
    fractions = _fractions(steps, max_fraction)
    base_ids = [i for k in base_classes for i in sigma.classes[k]]
    pool = sigma.classes[pool_class]
    order = _ordering(vals, pool, direction, seed)
    base = _baseline(utility, base_ids)
    rel = [float(utility(base_ids + order[: int(round(f * len(pool)))])) / base for f in fractions]
    return Curve(fractions, rel, direction, seed)


def mean_curve(curves: Sequence[Curve], direction: str | None = None) -> Curve:
    fractions = curves[0].fractions
    for c in curves[1:]:
        if not np.array_equal(c.fractions, fractions):
            raise ValuationError("curves have different fraction grids")
    acc = np.mean([c.relative_accuracy for c in curves], axis=0)
    return Curve(fractions, acc, direction or curves[0].direction)


@dataclass
class AllocationSummary:
    sums: np.ndarray
    shares: np.ndarray
    increments: np.ndarray | None = None

    @property
    def max_deviation(self) -> float | None:
        if self.increments is None:
            return None
        return float(np.max(np.abs(self.sums - self.increments)))

    def to_dict(self) -> dict:
        out = {"class_sums": self.sums.tolist(), "shares": self.shares.tolist()}
        if self.increments is not None:
            out["increments"] = self.increments.tolist()
            out["max_deviation"] = self.max_deviation
        return out


def allocation_summary(values: ValueReport, sigma: OrderedPartition, utility=None) -> AllocationSummary:
    """Per-class totals and shares; with ``utility``, also the class-wise increments they should equal."""
    if values.partition != sigma:
        raise PartitionMismatchError("the report was computed under a different ordered partition")
    sums = values.class_sums
    total = math.fsum(sums)
    shares = sums / total if total != 0 else np.zeros_like(sums)
    increments = class_increments(utility, sigma) if utility is not None else None
    return AllocationSummary(sums, shares, increments)


@dataclass
class DuplicationReport:
    originals: np.ndarray  # plain data Shapley of D alone
    combined: np.ndarray  # plain data Shapley over D and its copies
    asymmetric: np.ndarray  # ICU values under (D, copy_1, ...)
    class_sums: np.ndarray
    copy_gap: float  # max |phi_i - phi_i'| across copies
    sum_gap: float  # max |block sum - total(D)/(copies+1)|
    increments: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def holds(self) -> bool:
        return self.copy_gap <= 1e-9 and self.sum_gap <= 1e-9


def duplication_check(
    dataset: Dataset,
    test_set: Dataset,
    copies: int = 1,
    utility_factory: Callable[[Dataset, Dataset], object] = CentroidUtility,
) -> DuplicationReport:
    """Compare plain and asymmetric values when the training set is replicated."""
    n = len(dataset)
    total_n = n * (copies + 1)
    if total_n > MAX_TABLE_PLAYERS:
        raise TooLargeError(f"{total_n} points exceed the exact-enumeration cap of {MAX_TABLE_PLAYERS}")
    base = exact_data_shapley(utility_factory(dataset, test_set), n).values
    combined_set = dataset
    for _ in range(copies):
        combined_set = combined_set.concat(dataset)
    util = utility_factory(combined_set, test_set)
    combined = exact_data_shapley(util, total_n).values
    blocks = combined.reshape(copies + 1, n)
    copy_gap = float(np.max(np.abs(blocks - blocks[0]))) if copies else 0.0
    target = math.fsum(base) / (copies + 1)
    sum_gap = max(abs(math.fsum(b) - target) for b in blocks)
    sigma = OrderedPartition(tuple(tuple(range(b * n, (b + 1) * n)) for b in range(copies + 1)))
    icu = exact_ads_icuws(WeightSystem.icu(sigma), util)
    return DuplicationReport(
        originals=base,
        combined=combined,
        asymmetric=icu.values,
        class_sums=icu.class_sums,
        copy_gap=copy_gap,
        sum_gap=float(sum_gap),
        increments=class_increments(util, sigma),
    )


def loo_values(dataset: Dataset | int, utility) -> ValueReport:
    """Leave-one-out: v(D) - v(D minus i) for every point."""
    n = dataset if isinstance(dataset, int) else len(dataset)
    everyone = list(range(n))
    full = float(utility(everyone))
    vals = np.array([full - float(utility(everyone[:i] + everyone[i + 1 :])) for i in range(n)])
    return ValueReport(vals, "loo", OrderedPartition.single(n))


# -- presets -----------------------------------------------------------------


def _knn_values(train, sigma, test, k, metric):
    return knn_ads(train, sigma, test, k, metric)


def augment_sanity(
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    n: int = 40,
    corrupt: float = 0.3,
    jitter: float = 0.5,
    k: int = 5,
    metric: str = "euclidean",
    fractions: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
    random_repeats: int = 5,
) -> dict[str, list[Curve]]:
    """Removal/addition curves on jittered augmentations with label-flipped copies.

    Values are KNN asymmetric Shapley under (originals, augmented). Returns
    one curve per seed for every direction; random curves are themselves the
    mean of ``random_repeats`` shuffles.
    """
    out: dict[str, list[Curve]] = {d: [] for d in ("remove-low", "remove-high", "remove-random", "add-low", "add-high", "add-random")}
    for seed in seeds:
        spec = SyntheticSpec("jitter-augment", n=n, noise=jitter, corrupt=corrupt, seed=seed)
        train, sigma, test = generate(spec)
        util = KNNUtility(train, test, k, metric)
        report = _knn_values(train, sigma, test, k, metric)
        for d in ("remove-low", "remove-high"):
            out[d].append(removal_curve(report, 1, train, sigma, util, fractions, d, seed))
        for d in ("add-low", "add-high"):
            out[d].append(addition_curve(report, [0], 1, train, sigma, util, fractions, d, seed))
        rand_seeds = [seed * 1000 + r for r in range(random_repeats)]
        out["remove-random"].append(
            mean_curve([removal_curve(report, 1, train, sigma, util, fractions, "random", s) for s in rand_seeds], "random")
        )
        out["add-random"].append(
            mean_curve([addition_curve(report, [0], 1, train, sigma, util, fractions, "random", s) for s in rand_seeds], "random")
        )
    return out


def sequential_stream(
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    n: int = 30,
    periods: int = 3,
    corrupt: float = 0.1,
    drift: float = 3.0,
    retention: float = 0.1,
    k: int = 5,
    metric: str = "euclidean",
    fractions: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
) -> dict[str, list[Curve]]:
    """Addition curves period by period on a drifting stream.

    After valuing period t against the retained training set, the top
    ``retention`` fraction of period-t points (by value) joins the retained
    set before period t+1 is valued.
    """
    out: dict[str, list[Curve]] = {}
    for seed in seeds:
        train, sigma, test = generate(
            SyntheticSpec("drift-stream", n=n, periods=periods, corrupt=corrupt, drift=drift, seed=seed)
        )
        retained = list(sigma.classes[0])
        for t in range(1, periods):
            pool = list(sigma.classes[t])
            ids = retained + pool
            local_train = train.subset(ids)
            local_sigma = OrderedPartition((tuple(range(len(retained))), tuple(range(len(retained), len(ids)))))
            util = KNNUtility(local_train, test, k, metric)
            report = _knn_values(local_train, local_sigma, test, k, metric)
            for d in ("add-low", "add-high"):
                out.setdefault(f"period{t}-{d}", []).append(
                    addition_curve(report, [0], 1, local_train, local_sigma, util, fractions, d, seed)
                )
            keep = int(round(retention * len(pool)))
            best = value_order(report.values, local_sigma.classes[1], high_first=True)[:keep]
            retained = retained + [ids[i] for i in best]
    return out


def replication_allocation(
    seed: int = 0,
    n: int = 20,
    max_copies: int = 2,
    k: int = 5,
    metric: str = "euclidean",
) -> list[dict]:
    """Creator/packager allocation of KNN asymmetric Shapley as copies are added."""
    rows = []
    for copies in range(max_copies + 1):
        train, sigma, test = generate(SyntheticSpec("replicate", n=n, copies=copies, seed=seed))
        util = KNNUtility(train, test, k, metric)
        report = _knn_values(train, sigma, test, k, metric)
        summary = allocation_summary(report, sigma, util)
        rows.append({"copies": copies, **summary.to_dict(), "originals_gain": float(util(list(sigma.classes[0])) - util([]))})
    return rows
