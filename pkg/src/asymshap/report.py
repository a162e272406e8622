"""Per-point value vectors with their provenance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import OrderedPartition
from .errors import SizeMismatchError, ValuationError

METHODS = ("oracle-ds", "oracle-ads-general", "oracle-ads-icuws", "mc-ads", "knn-ads", "loo")


@dataclass(eq=False)
class ValueReport:
    values: np.ndarray
    method: str
    partition: OrderedPartition
    uncertainty: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.method not in METHODS:
            raise ValuationError(f"unknown method {self.method!r}")
        if self.values.shape != (self.partition.n,):
            raise SizeMismatchError(f"{self.values.shape} values for {self.partition.n} points")
        if self.uncertainty is not None:
            self.uncertainty = np.asarray(self.uncertainty, dtype=np.float64)
            if self.uncertainty.shape != self.values.shape:
                raise SizeMismatchError("uncertainty must have one entry per point")

    @property
    def class_sums(self) -> np.ndarray:
        return np.array([math.fsum(self.values[list(c)]) for c in self.partition.classes])

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, ValueReport):
            return NotImplemented
        unc_equal = (self.uncertainty is None and other.uncertainty is None) or (
            self.uncertainty is not None
            and other.uncertainty is not None
            and np.array_equal(self.uncertainty, other.uncertainty)
        )
        return (
            self.method == other.method
            and self.partition == other.partition
            and np.array_equal(self.values, other.values)
            and unc_equal
            and self.meta == other.meta
        )
