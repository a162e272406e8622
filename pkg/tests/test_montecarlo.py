import numpy as np
import pytest

from asymshap import McConfig, OrderedPartition, TableUtility, WeightSystem, convergence_check, estimate_mc_ads, exact_ads_icuws
from asymshap.errors import InsufficientHistoryError, NotIcuwsError, ValuationError, ZeroBudgetError
from asymshap.montecarlo import aggregate_stderr


def test_config_validation():
    with pytest.raises(ZeroBudgetError):
        McConfig(budget=0)
    with pytest.raises(ValuationError):
        McConfig(window=0)
    with pytest.raises(ValuationError):
        McConfig(workers=0)


def test_not_icuws():
    omega = WeightSystem(np.array([1.0, 2.0]), OrderedPartition.single(2))
    with pytest.raises(NotIcuwsError):
        estimate_mc_ads(omega, TableUtility(2, np.zeros(4)))


def test_singletons_exact_after_one(rng):
    t = TableUtility.random(4, rng)
    omega = WeightSystem.icu(OrderedPartition(((2,), (0,), (3,), (1,))))
    rep = estimate_mc_ads(omega, t, McConfig(budget=1))
    np.testing.assert_allclose(rep.values, exact_ads_icuws(omega, t).values, atol=1e-15)
    assert rep.uncertainty.tolist() == [0.0] * 4 and rep.meta["iterations"] == 1


def test_additive_exact_after_one():
    c = np.array([0.3, -0.2, 0.7, 0.1])
    t = TableUtility.from_function(4, lambda s: float(sum(c[list(s)])))
    rep = estimate_mc_ads(WeightSystem.icu(OrderedPartition.single(4)), t, McConfig(budget=1))
    np.testing.assert_allclose(rep.values, c, atol=1e-15)
    rep = estimate_mc_ads(WeightSystem.icu(OrderedPartition.single(4)), t, McConfig(budget=50))
    np.testing.assert_allclose(rep.uncertainty, 0.0, atol=1e-12)


def test_convergence_check_examples():
    # alternating +1/-1 marginals: running means 1, 0, 1/3, 0, 1/5, 0, 1/7
    means = [1.0, 0.0, 1 / 3, 0.0, 1 / 5, 0.0, 1 / 7]
    with pytest.raises(InsufficientHistoryError):
        convergence_check(means[:3], window=2, tol=0.1)
    assert convergence_check(means[:4], 2, 0.1)  # |0 - 0|
    assert not convergence_check(means[:5], 2, 0.1)  # |1/5 - 1/3| = 0.133
    assert convergence_check(means[:7], 2, 0.1)  # |1/7 - 1/5| = 0.057
    const = np.full((4, 3), 0.25)
    assert convergence_check(const, 2, 1e-12)
    assert not convergence_check(const, 2, 0.0)


def test_tolerance_stops_early_and_zero_tol_exhausts():
    t = TableUtility.from_function(3, lambda s: len(s) / 3)
    omega = WeightSystem.icu(OrderedPartition.single(3))
    rep = estimate_mc_ads(omega, t, McConfig(budget=5000, tol=1e-6, window=10))
    assert rep.meta["converged"] and rep.meta["iterations"] == 20
    rep = estimate_mc_ads(omega, t, McConfig(budget=100, tol=0.0, window=10))
    assert not rep.meta["converged"] and rep.meta["iterations"] == 100


def test_matches_oracle(rng):
    t = TableUtility.random(6, rng)
    omega = WeightSystem.icu(OrderedPartition(((0, 1, 2), (3, 4, 5))))
    exact = exact_ads_icuws(omega, t).values
    rep = estimate_mc_ads(omega, t, McConfig(budget=40_000, seed=1, workers=2))
    assert np.all(np.abs(rep.values - exact) <= 4 * rep.uncertainty + 1e-12)
    for members, inc in zip(omega.partition.classes, [t([0, 1, 2]) - t([]), t(range(6)) - t([0, 1, 2])]):
        # class sums are exact per permutation, so the estimate matches up to rounding
        assert abs(sum(rep.values[list(members)]) - inc) <= 4 * aggregate_stderr(rep, members) + 1e-12


def test_deterministic_and_worker_dependent(rng):
    t = TableUtility.random(5, rng)
    omega = WeightSystem.icu(OrderedPartition(((0, 1), (2, 3, 4))))
    cfg = McConfig(budget=3000, seed=9, workers=3)
    a, b = estimate_mc_ads(omega, t, cfg), estimate_mc_ads(omega, t, cfg)
    assert a == b
    c = estimate_mc_ads(omega, t, McConfig(budget=3000, seed=10, workers=3))
    assert not np.array_equal(a.values, c.values)


def test_worker_count_invariance(rng):
    t = TableUtility.random(5, rng)
    omega = WeightSystem.icu(OrderedPartition(((0, 1, 2), (3, 4))))
    one = estimate_mc_ads(omega, t, McConfig(budget=20_000, seed=2, workers=1))
    eight = estimate_mc_ads(omega, t, McConfig(budget=20_000, seed=2, workers=8))
    bound = 4 * np.sqrt(one.uncertainty**2 + eight.uncertainty**2) + 1e-12
    assert np.all(np.abs(one.values - eight.values) <= bound)


@pytest.mark.slow
def test_unbiased_over_seeds(rng):
    t = TableUtility.random(5, rng)
    omega = WeightSystem.icu(OrderedPartition(((0, 1), (2, 3, 4))))
    exact = exact_ads_icuws(omega, t).values
    runs = np.array([estimate_mc_ads(omega, t, McConfig(budget=500, seed=s)).values for s in range(40)])
    z = (runs.mean(axis=0) - exact) / (runs.std(axis=0, ddof=1) / np.sqrt(len(runs)) + 1e-300)
    assert np.all(np.abs(z) <= 4)
