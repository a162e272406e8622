"""Monte Carlo estimation of asymmetric data Shapley under ICU weight systems.

Ordered permutations are drawn uniformly (a uniform shuffle inside every
class, classes concatenated in order) and each point is credited with its
marginal contribution along the permutation. Work is split over independent
Philox streams, one per worker, and the per-worker (count, mean, sum of
squared deviations) triples are merged in worker order with the pairwise
update of Chan et al., so results depend only on ``(seed, workers)`` and the
config. Centered sums keep the standard error exact for constant marginals,
where the raw sum-of-squares form cancels catastrophically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from threading import Lock

import numpy as np

from .core import WeightSystem, make_rng, sample_ordered_permutations
from .errors import InsufficientHistoryError, NotIcuwsError, ValuationError, ZeroBudgetError
from .report import ValueReport
from .utilities import mask_to_ids

# Permutations per sampling round when no convergence window is in play.
DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class McConfig:
    budget: int = 5000
    tol: float | None = None
    window: int = 100
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.budget < 1:
            raise ZeroBudgetError("Monte Carlo budget must be at least one permutation")
        if self.window < 1:
            raise ValuationError("convergence window must be >= 1")
        if self.tol is not None and self.tol < 0:
            raise ValuationError("tolerance must be non-negative")
        if self.workers < 1:
            raise ValuationError("workers must be >= 1")


def convergence_check(history, window: int, tol: float) -> bool:
    """True iff no running mean moved by ``tol`` or more over the last ``window`` iterations.

    ``history[t]`` is the vector of running means after iteration ``t``.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.ndim == 1:
        history = history[:, None]
    if len(history) < 2 * window:
        raise InsufficientHistoryError(f"need {2 * window} iterations of history, have {len(history)}")
    drift = np.max(np.abs(history[-1] - history[-1 - window]))
    return bool(drift < tol)


class _CachedGame:
    """Thread-safe memo of v over bitmasks; v is assumed pure."""

    def __init__(self, utility):
        self._value = getattr(utility, "mask_value", None) or (lambda mask: float(utility(mask_to_ids(mask))))
        self._cache: dict[int, float] = {}
        self._lock = Lock()

    def __call__(self, mask: int) -> float:
        try:
            return self._cache[mask]
        except KeyError:
            pass
        value = float(self._value(mask))
        with self._lock:
            self._cache[mask] = value
        return value


def _marginals(perms: np.ndarray, game: _CachedGame, empty_value: float) -> np.ndarray:
    """(rows, n) marginal contributions indexed by point id."""
    rows, n = perms.shape
    out = np.empty((rows, n))
    if n <= 62:
        masks = np.cumsum(np.left_shift(np.int64(1), perms), axis=1)
        uniq, inverse = np.unique(masks, return_inverse=True)
        vals = np.array([game(int(m)) for m in uniq])[inverse.reshape(masks.shape)]
        prev = np.concatenate([np.full((rows, 1), empty_value), vals[:, :-1]], axis=1)
        np.put_along_axis(out, perms, vals - prev, axis=1)
        return out
    for r in range(rows):
        mask, prev = 0, empty_value
        for i in perms[r]:
            mask |= 1 << int(i)
            cur = game(mask)
            out[r, i] = cur - prev
            prev = cur
    return out


def _merge(count, mean, m2, c, mu, sq):
    """Combine two (count, mean, centered sum of squares) summaries."""
    if c == 0:
        return count, mean, m2
    if count == 0:
        return c, mu, sq
    total = count + c
    delta = mu - mean
    return total, mean + delta * (c / total), m2 + sq + np.square(delta) * (count * c / total)


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if w < extra else 0) for w in range(parts)]


def estimate_mc_ads(omega: WeightSystem, utility, cfg: McConfig = McConfig()) -> ValueReport:
    """Monte Carlo asymmetric data Shapley with per-point standard errors.

    Stops at ``cfg.budget`` permutations, or earlier when ``cfg.tol`` is set
    and the running means stop moving (see :func:`convergence_check`),
    evaluated every ``cfg.window`` permutations.
    """
    if not omega.is_icuws:
        raise NotIcuwsError("Monte Carlo sampling is only defined for intra-class uniform weight systems")
    sigma = omega.partition
    n = sigma.n
    game = _CachedGame(utility)
    empty_value = game(0)
    rngs = [make_rng(cfg.seed, w) for w in range(cfg.workers)]

    count = 0
    mean = np.zeros(n)
    m2 = np.zeros(n)
    snapshots: list[np.ndarray] = []
    converged = False
    round_size = cfg.window if cfg.tol is not None else DEFAULT_CHUNK

    def work(args):
        w, size = args
        if size == 0:
            return 0, np.zeros(n), np.zeros(n)
        perms = sample_ordered_permutations(sigma, rngs[w], size)
        marg = _marginals(perms, game, empty_value)
        mu = marg.mean(axis=0)
        return size, mu, np.square(marg - mu).sum(axis=0)

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        while count < cfg.budget:
            this_round = min(round_size, cfg.budget - count)
            jobs = list(enumerate(_split(this_round, cfg.workers)))
            for c, mu, sq in pool.map(work, jobs):
                count, mean, m2 = _merge(count, mean, m2, c, mu, sq)
            if cfg.tol is not None and this_round == cfg.window:
                snapshots.append(mean.copy())
                if len(snapshots) >= 2 and convergence_check(snapshots, 1, cfg.tol):
                    converged = True
                    break

    values = mean
    if count > 1:
        stderr = np.sqrt(m2 / (count - 1) / count)
    else:
        stderr = np.zeros(n)
    describe = getattr(utility, "describe", None)
    meta = {
        "seed": cfg.seed,
        "iterations": count,
        "workers": cfg.workers,
        "budget": cfg.budget,
        "tol": cfg.tol,
        "window": cfg.window,
        "converged": converged,
        "utility": describe() if describe else {"kind": "callable"},
    }
    return ValueReport(values, "mc-ads", sigma, uncertainty=stderr, meta=meta)


def aggregate_stderr(report: ValueReport, members) -> float:
    """Standard error of a class sum, treating per-point errors as independent."""
    if report.uncertainty is None:
        return 0.0
    return math.sqrt(float(np.sum(np.square(report.uncertainty[list(members)]))))
