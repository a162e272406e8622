import math

import numpy as np
import pytest
from conftest import brute_ads, random_partition

from asymshap import (
    CentroidUtility,
    Dataset,
    OrderedPartition,
    TableUtility,
    WeightSystem,
    class_increments,
    exact_ads_general,
    exact_ads_icuws,
    exact_data_shapley,
    exact_value_difference,
)
from asymshap.errors import DifferentClassesError, NotIcuwsError, TooLargeError


def unanimity(n, coalition):
    return TableUtility.from_function(n, lambda s: float(s >= frozenset(coalition)))


def test_data_shapley_examples():
    one = TableUtility(1, [0.25, 1.0])
    assert exact_data_shapley(one, 1).values.tolist() == [0.75]
    additive = TableUtility.from_function(3, lambda s: len(s) / 3)
    np.testing.assert_allclose(exact_data_shapley(additive, 3).values, [1 / 3] * 3, atol=1e-15)
    assert exact_data_shapley(unanimity(2, {0, 1}), 2).values.tolist() == [0.5, 0.5]


def test_data_shapley_matches_brute(rng):
    for _ in range(10):
        n = int(rng.integers(1, 6))
        t = TableUtility.random(n, rng)
        ref = brute_ads(np.ones(n), [tuple(range(n))], lambda s: t(sorted(s)))
        np.testing.assert_allclose(exact_data_shapley(t, n).values, ref, atol=1e-13)


def test_general_examples(rng):
    n = 5
    t = TableUtility.random(n, rng)
    single = exact_ads_general(WeightSystem.icu(OrderedPartition.single(n)), t)
    np.testing.assert_allclose(single.values, exact_data_shapley(t, n).values, atol=1e-12)

    chain = OrderedPartition(((2,), (0,), (3,), (1,), (4,)))
    vals = exact_ads_general(WeightSystem.icu(chain), t).values
    order, prefix = [2, 0, 3, 1, 4], []
    for i in order:
        assert vals[i] == pytest.approx(t(prefix + [i]) - t(prefix), abs=1e-15)
        prefix.append(i)

    omega = WeightSystem(np.array([1.0, 2.0]), OrderedPartition.single(2))
    vals = exact_ads_general(omega, unanimity(2, {0, 1})).values
    np.testing.assert_allclose(vals, [1 / 3, 2 / 3], atol=1e-15)
    assert vals[0] / 1.0 == pytest.approx(vals[1] / 2.0)


def test_general_matches_brute_for_arbitrary_weights(rng):
    for _ in range(15):
        n = int(rng.integers(2, 6))
        sigma = random_partition(rng, n, int(rng.integers(1, min(3, n) + 1)))
        w = rng.uniform(0.2, 4.0, size=n)
        t = TableUtility.random(n, rng)
        ref = brute_ads(w, sigma.classes, lambda s: t(sorted(s)))
        omega = WeightSystem(w, sigma)
        np.testing.assert_allclose(exact_ads_general(omega, t).values, ref, atol=1e-13)
        np.testing.assert_allclose(exact_ads_general(omega, t, all_permutations=True).values, ref, atol=1e-13)


def test_icuws_examples(rng):
    t = TableUtility.random(4, rng)
    np.testing.assert_allclose(
        exact_ads_icuws(WeightSystem.icu(OrderedPartition.single(4)), t).values,
        exact_data_shapley(t, 4).values,
        atol=1e-15,
    )
    t2 = TableUtility(2, [0.1, 0.4, 0.3, 0.9])
    vals = exact_ads_icuws(WeightSystem.icu(OrderedPartition(((0,), (1,)))), t2).values
    np.testing.assert_allclose(vals, [0.4 - 0.1, 0.9 - 0.4], atol=1e-15)

    t6 = TableUtility.random(6, rng)
    omega = WeightSystem.icu(OrderedPartition(((0, 1, 2), (3, 4, 5))))
    np.testing.assert_allclose(exact_ads_icuws(omega, t6).values, exact_ads_general(omega, t6).values, atol=1e-12)


def test_icuws_errors():
    sigma = OrderedPartition(((0, 1), (2,)))
    with pytest.raises(NotIcuwsError):
        exact_ads_icuws(WeightSystem(np.array([1.0, 2.0, 1.0]), sigma), TableUtility(3, np.zeros(8)))
    with pytest.raises(TooLargeError):
        exact_ads_icuws(WeightSystem.icu(OrderedPartition.single(21)), lambda s: 0.0)
    with pytest.raises(TooLargeError):
        exact_ads_general(WeightSystem.icu(OrderedPartition.single(10)), lambda s: 0.0)


def test_value_difference(rng):
    t = TableUtility.random(5, rng)
    sigma = OrderedPartition(((0, 1, 2), (3, 4)))
    omega = WeightSystem.icu(sigma)
    phi = exact_ads_icuws(omega, t).values
    assert exact_value_difference(omega, t, 1, 1) == 0.0
    for i, j in [(0, 1), (0, 2), (2, 1), (3, 4)]:
        assert exact_value_difference(omega, t, i, j) == pytest.approx(phi[i] - phi[j], abs=1e-13)
    # v depends on neither 0 nor 1
    blind = TableUtility.from_function(5, lambda s: len(s - {0, 1}) ** 2 / 9)
    assert exact_value_difference(omega, blind, 0, 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DifferentClassesError):
        exact_value_difference(omega, t, 0, 3)


def test_efficiency_and_class_efficiency(rng):
    for _ in range(20):
        n = int(rng.integers(2, 8))
        sigma = random_partition(rng, n, int(rng.integers(1, min(4, n) + 1)))
        t = TableUtility.random(n, rng)
        ds = exact_data_shapley(t, n)
        assert math.fsum(ds.values) == pytest.approx(t(range(n)) - t([]), abs=1e-9)
        rep = exact_ads_icuws(WeightSystem.icu(sigma), t)
        np.testing.assert_allclose(rep.class_sums, class_increments(t, sigma), atol=1e-9)


def test_nullity(rng):
    base = TableUtility.random(4, rng)
    # point 4 never changes v
    t = TableUtility.from_function(5, lambda s: base(sorted(s - {4})))
    sigma = OrderedPartition(((0, 4), (1, 2, 3)))
    omega = WeightSystem.icu(sigma)
    for rep in (exact_data_shapley(t, 5), exact_ads_general(omega, t), exact_ads_icuws(omega, t)):
        assert rep.values[4] == pytest.approx(0.0, abs=1e-15)


def test_weight_scaling_bit_identical(rng):
    t = TableUtility.random(6, rng)
    omega = WeightSystem.icu(OrderedPartition(((0, 3), (1, 2, 5), (4,))), [1.0, 3.0, 0.5])
    a = exact_ads_icuws(omega, t)
    b = exact_ads_icuws(omega.scaled(7.3), t)
    assert np.array_equal(a.values, b.values)


def test_lemma_one_centroid():
    rng = np.random.default_rng(4)
    for n in (3, 4, 5, 6):
        x = rng.normal(size=(n, 2))
        y = np.arange(n) % 2
        d = Dataset(x, y, 2)
        test = Dataset(rng.normal(size=(8, 2)), rng.integers(0, 2, size=8), 2)
        base = exact_data_shapley(CentroidUtility(d, test), n).values
        combined = exact_data_shapley(CentroidUtility(d.concat(d), test), 2 * n).values
        np.testing.assert_allclose(combined[:n], combined[n:], atol=1e-9)
        assert math.fsum(combined[:n]) == pytest.approx(math.fsum(base) / 2, abs=1e-9)
        assert math.fsum(combined) == pytest.approx(math.fsum(base), abs=1e-9)
