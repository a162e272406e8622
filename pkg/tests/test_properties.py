"""Property-based checks of the structural invariants."""

import itertools
import json
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from asymshap import (
    Dataset,
    McConfig,
    OrderedPartition,
    TableUtility,
    WeightSystem,
    class_increments,
    estimate_mc_ads,
    exact_ads_general,
    exact_ads_icuws,
    exact_data_shapley,
    is_ordered_permutation,
    knn_ads,
    make_ordered_partition,
    make_rng,
    permutation_weight,
    sample_ordered_permutations,
)
from asymshap.io import dumps_report, report_from_dict
from asymshap.knn import build_rank_context

SETTINGS = settings(max_examples=40, deadline=None)


@st.composite
def partitions(draw, min_n=1, max_n=6, max_m=3):
    n = draw(st.integers(min_n, max_n))
    ranks = draw(st.lists(st.integers(-5, 5), min_size=n, max_size=n))
    ranks = [r % max_m for r in ranks]
    return make_ordered_partition(dict(enumerate(ranks)))


@st.composite
def games(draw, min_n=1, max_n=6):
    sigma = draw(partitions(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return sigma, TableUtility.random(sigma.n, np.random.default_rng(seed))


@st.composite
def knn_instances(draw, max_n=9):
    sigma = draw(partitions(1, max_n))
    n = sigma.n
    coords = st.integers(-3, 3).map(float)
    x = draw(st.lists(st.tuples(coords, coords), min_size=n, max_size=n))
    y = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    n_test = draw(st.integers(1, 3))
    tx = draw(st.lists(st.tuples(coords, coords), min_size=n_test, max_size=n_test))
    ty = draw(st.lists(st.integers(0, 1), min_size=n_test, max_size=n_test))
    k = draw(st.integers(1, 5))
    return Dataset(np.array(x), y, 2), sigma, Dataset(np.array(tx), ty, 2), k


@SETTINGS
@given(partitions(max_n=5), st.lists(st.floats(0.05, 20.0), min_size=5, max_size=5))
def test_permutation_weights_sum_to_one(sigma, w):
    omega = WeightSystem(np.array(w[: sigma.n]), sigma)
    total = math.fsum(permutation_weight(omega, p) for p in itertools.permutations(range(sigma.n)))
    assert abs(total - 1.0) <= 1e-12


@SETTINGS
@given(partitions(max_n=5), st.lists(st.floats(0.05, 20.0), min_size=3, max_size=3))
def test_icu_weight_is_uniform_and_lambda_free(sigma, cw):
    omega = WeightSystem.icu(sigma, cw[: sigma.m])
    expected = 1.0 / math.prod(math.factorial(s) for s in sigma.sizes())
    for p in itertools.permutations(range(sigma.n)):
        got = permutation_weight(omega, p)
        if is_ordered_permutation(sigma, p):
            assert math.isclose(got, expected, rel_tol=1e-12)
        else:
            assert got == 0.0


@SETTINGS
@given(games(max_n=6))
def test_class_wise_efficiency(game):
    sigma, t = game
    rep = exact_ads_icuws(WeightSystem.icu(sigma), t)
    assert np.allclose(rep.class_sums, class_increments(t, sigma), atol=1e-9, rtol=0)
    ds = exact_data_shapley(t, sigma.n)
    assert abs(math.fsum(ds.values) - (t(range(sigma.n)) - t([]))) <= 1e-9


@SETTINGS
@given(games(max_n=6))
def test_general_equals_icuws_on_icu_systems(game):
    sigma, t = game
    omega = WeightSystem.icu(sigma)
    assert np.allclose(exact_ads_general(omega, t).values, exact_ads_icuws(omega, t).values, atol=1e-12, rtol=0)


@SETTINGS
@given(games(max_n=5), st.floats(0.01, 100.0))
def test_weight_scaling_bit_identical(game, factor):
    sigma, t = game
    omega = WeightSystem.icu(sigma, [1.0 + k for k in range(sigma.m)])
    assert np.array_equal(exact_ads_icuws(omega, t).values, exact_ads_icuws(omega.scaled(factor), t).values)


@SETTINGS
@given(games(min_n=2, max_n=6), st.integers(0, 2**32 - 1))
def test_linearity(game, seed):
    sigma, a = game
    b = TableUtility.random(sigma.n, np.random.default_rng(seed))
    both = TableUtility(sigma.n, a.table + 2.0 * b.table)
    omega = WeightSystem.icu(sigma)
    lhs = exact_ads_icuws(omega, both).values
    rhs = exact_ads_icuws(omega, a).values + 2.0 * exact_ads_icuws(omega, b).values
    assert np.allclose(lhs, rhs, atol=1e-12, rtol=0)


@SETTINGS
@given(games(min_n=2, max_n=6))
def test_symmetry_within_class(game):
    # make points 0 and 1 interchangeable in v; same class gives equal values
    sigma, t = game
    n = sigma.n

    def swap(mask):
        b0, b1 = mask & 1, (mask >> 1) & 1
        return (mask & ~3) | (b0 << 1) | b1

    sym = TableUtility(n, [(t.table[m] + t.table[swap(m)]) / 2 for m in range(1 << n)])
    same = make_ordered_partition({i: (0 if i < 2 else sigma.class_of[i]) for i in range(n)})
    vals = exact_ads_icuws(WeightSystem.icu(same), sym).values
    if same.class_of[0] == same.class_of[1]:
        assert abs(vals[0] - vals[1]) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(knn_instances())
def test_knn_ads_matches_oracle(instance):
    from asymshap import KNNUtility

    train, sigma, test, k = instance
    exact = exact_ads_icuws(WeightSystem.icu(sigma), KNNUtility(train, test, k)).values
    assert np.allclose(knn_ads(train, sigma, test, k).values, exact, atol=1e-9, rtol=0)


@SETTINGS
@given(knn_instances())
def test_beta_monotone(instance):
    train, sigma, test, _ = instance
    for k in range(sigma.m):
        beta = build_rank_context(train, sigma, k, test.features[0]).beta
        assert np.all(np.diff(beta) >= 0) and (len(beta) == 0 or beta[-1] <= len(sigma.prefix(k)))


@SETTINGS
@given(partitions(max_n=8), st.integers(0, 1000), st.integers(1, 50))
def test_samples_are_ordered(sigma, seed, size):
    perms = sample_ordered_permutations(sigma, make_rng(seed), size)
    assert perms.shape == (size, sigma.n)
    assert all(is_ordered_permutation(sigma, p) for p in perms)


@SETTINGS
@given(st.dictionaries(st.integers(0, 7), st.integers(-100, 100), min_size=1))
def test_partition_compaction_preserves_order(assign):
    ids = sorted(assign)
    assign = {i: assign[k] for i, k in enumerate(ids)}
    sigma = make_ordered_partition(assign)
    for i in assign:
        for j in assign:
            assert (assign[i] < assign[j]) == (sigma.class_of[i] < sigma.class_of[j])


@SETTINGS
@given(games(max_n=5), st.integers(0, 100), st.integers(1, 4))
def test_mc_deterministic_and_json_round_trip(game, seed, workers):
    sigma, t = game
    cfg = McConfig(budget=64, seed=seed, workers=workers)
    a = estimate_mc_ads(WeightSystem.icu(sigma), t, cfg)
    assert a == estimate_mc_ads(WeightSystem.icu(sigma), t, cfg)
    assert report_from_dict(json.loads(dumps_report(a))) == a


@SETTINGS
@given(games(max_n=6))
def test_mc_class_sums_exact_per_permutation(game):
    # every ordered permutation credits each class exactly its increment
    sigma, t = game
    rep = estimate_mc_ads(WeightSystem.icu(sigma), t, McConfig(budget=20, seed=1))
    assert np.allclose(rep.class_sums, class_increments(t, sigma), atol=1e-9, rtol=0)
