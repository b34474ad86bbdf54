import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from credamp.errors import AnalysisError, ConfigError
from credamp.strata import (
    BiasGroup,
    StratumKey,
    assign_base_strata,
    group_bias,
    kmeans_1d,
    kmeans_1d_optimal_wcss,
    quantile_bins,
)
from oracles import brute_force_wcss, sort_and_split

# ---------------------------------------------------------------- quantile bins


def test_even_split():
    edges, a = quantile_bins([1, 2, 3, 4, 5, 6, 7, 8], 4)
    assert a.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]
    assert edges.cuts == (2.75, 4.5, 6.25)
    assert (edges.lower, edges.upper, edges.n_bins) == (1.0, 8.0, 4)


def test_all_equal_is_one_bin():
    edges, a = quantile_bins([7] * 10, 4)
    assert edges.n_bins == 1 and a.tolist() == [0] * 10


def test_zero_inflated_counts_merge_edges():
    edges, a = quantile_bins([0] * 6 + [1, 2, 3, 9], 4)
    # the 0.25 and 0.5 quantiles are both 0 and merge with the minimum
    assert edges.cuts == (1.75,)
    assert edges.n_bins == 2
    assert a.tolist() == [0] * 7 + [1, 1, 1]


def test_unsorted_input_and_new_values():
    edges, a = quantile_bins([8, 1, 5, 3, 7, 2, 6, 4], 4)
    assert a.tolist() == [3, 0, 2, 1, 3, 0, 2, 1]
    assert edges.assign([-5, 2.75, 2.76, 100]).tolist() == [0, 0, 1, 3]


@pytest.mark.parametrize("bad", [[], [1.0, float("nan")]])
def test_quantile_bins_bad_values(bad):
    with pytest.raises(ValueError):
        quantile_bins(bad, 4)


@pytest.mark.parametrize("k", [1, 0, 2.5])
def test_quantile_bins_bad_k(k):
    with pytest.raises(ConfigError):
        quantile_bins([1, 2, 3], k)


_vectors = st.lists(st.integers(0, 40), min_size=1, max_size=120)


@settings(max_examples=300)
@given(_vectors, st.integers(2, 8))
def test_quantile_bins_match_oracles(values, k):
    _, a = quantile_bins(values, k)
    assert a.tolist() == sort_and_split(values, k)


@given(_vectors, st.integers(2, 8))
def test_bins_are_monotone(values, k):
    _, a = quantile_bins(values, k)
    v = np.asarray(values)
    nb = a.max() + 1
    for i in range(nb - 1):
        if (a == i).any() and (a == i + 1).any():
            assert v[a == i].max() <= v[a == i + 1].min()
    assert a.min() == 0


@given(st.sets(st.integers(-10**6, 10**6), min_size=1, max_size=200), st.integers(2, 10))
def test_distinct_values_are_balanced(values, k):
    edges, a = quantile_bins(sorted(values), k)
    sizes = np.bincount(a, minlength=edges.n_bins)
    assert sizes.max() - sizes.min() <= 1


# ---------------------------------------------------------------- base strata


def test_assign_base_strata_groups():
    eng = np.arange(16)
    fol = np.tile(np.arange(4), 4)
    is_low = np.arange(16) % 2 == 0
    s = assign_base_strata(eng, fol, is_low, k=4)
    assert s.engagement_bin.tolist() == np.repeat(np.arange(4), 4).tolist()
    assert s.follower_bin.tolist() == fol.tolist()
    groups = s.groups(is_low)
    assert len(groups) == 16
    low, high = groups[StratumKey(1, 2)]
    assert low.tolist() == [6] and high.tolist() == []
    assert s.key_map([str(i) for i in range(16)])["13"] == StratumKey(3, 1)


def test_base_strata_need_both_groups():
    with pytest.raises(AnalysisError):
        assign_base_strata([1, 2, 3], [1, 2, 3], [True, True, True])


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30), st.booleans()), min_size=2, max_size=80))
def test_at_most_sixteen_strata(rows):
    eng, fol, low = map(list, zip(*rows))
    if all(low) or not any(low):
        return
    s = assign_base_strata(eng, fol, low)
    assert len(set(s.keys())) <= 16
    parts = s.groups(low)
    assert sum(len(a) + len(b) for a, b in parts.values()) == len(rows)


def test_stratum_key_label_and_order():
    assert StratumKey(2, 3).label() == "2,3"
    assert StratumKey(0, 1, "true").label() == "0,1,true"
    assert sorted([StratumKey(1, 0), StratumKey(0, 3)]) == [StratumKey(0, 3), StratumKey(1, 0)]


# ---------------------------------------------------------------- k-means


def test_kmeans_separated_groups():
    scores = [0.01, 0.02, 0.05, 0.5, 0.52, 0.55, 0.9, 0.95, 0.99]
    res = kmeans_1d(scores, 3)
    assert res.labels.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]
    assert res.names == ("low", "medium", "high")
    assert res.converged and not res.local_optimum
    assert res.centroids == pytest.approx((0.08 / 3, 1.57 / 3, 2.84 / 3))


def test_kmeans_too_few_distinct():
    with pytest.raises(ValueError, match="distinct"):
        kmeans_1d([0.1, 0.1, 0.2], 3)


@settings(max_examples=150)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=3, max_size=40))
def test_kmeans_matches_brute_force(scores):
    if len(set(scores)) < 3:
        return
    res = kmeans_1d(scores, 3)
    opt = brute_force_wcss(scores, 3)
    assert res.wcss == pytest.approx(opt, rel=1e-9, abs=1e-12)
    assert kmeans_1d_optimal_wcss(scores, 3) == pytest.approx(opt, rel=1e-9, abs=1e-12)


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=3, max_size=60))
def test_kmeans_assignment_monotone(scores):
    if len(set(scores)) < 3:
        return
    res = kmeans_1d(scores, 3)
    order = np.argsort(scores, kind="stable")
    assert np.all(np.diff(res.labels[order]) >= 0)
    assert np.all(np.diff(res.centroids) > 0)
    assert np.array_equal(res.predict(scores), res.labels)


def test_quantile_init_reports_local_optimum():
    # a layout where quantile seeding settles on a worse fixpoint
    rng = np.random.default_rng(3)
    flagged = 0
    for _ in range(50):
        x = rng.random(30)
        res = kmeans_1d(x, 3, init="quantile")
        opt = brute_force_wcss(x, 3)
        assert res.wcss >= opt - 1e-12
        assert res.local_optimum == (res.wcss > opt + 1e-9 * max(1.0, opt))
        flagged += res.local_optimum
    assert flagged > 0


def test_kmeans_bad_init():
    with pytest.raises(ConfigError):
        kmeans_1d([0.1, 0.2, 0.3], 3, init="random")


# ---------------------------------------------------------------- bias


@pytest.mark.parametrize(
    "label, group",
    [("far-right", BiasGroup.RIGHT), ("right", BiasGroup.RIGHT), ("left", BiasGroup.LEFT),
     ("far-left", BiasGroup.LEFT), ("none", BiasGroup.EXCLUDED), ("unknown", BiasGroup.EXCLUDED),
     (None, BiasGroup.EXCLUDED)],
)
def test_group_bias(label, group):
    assert group_bias(label) is group


def test_merged_edges_example():
    edges, a = quantile_bins([0, 0, 0, 0, 1, 2, 3, 4], 4)
    assert edges.n_bins == 3
    assert a.tolist() == [0, 0, 0, 0, 1, 1, 2, 2]


def test_constant_followers_collapse_dimension():
    s = assign_base_strata(range(1, 9), [100] * 8, [True, False] * 4)
    assert s.follower_edges.n_bins == 1
    assert {k.follower_bin for k in s.keys()} == {0}
    assert [k.engagement_bin for k in s.keys()] == [0, 0, 1, 1, 2, 2, 3, 3]


def test_low_posts_in_top_engagement_quartile():
    eng = np.arange(100)
    is_low = eng >= 90
    s = assign_base_strata(eng, np.arange(100) % 7, is_low)
    assert set(s.engagement_bin[is_low].tolist()) == {3}


def test_strata_sizes_match_sort_oracle():
    rng = np.random.default_rng(12)
    eng = rng.negative_binomial(1, 0.2, 1000)
    fol = rng.lognormal(5, 2, 1000).astype(int)
    is_low = rng.random(1000) < 0.2
    s = assign_base_strata(eng, fol, is_low)
    e_ref, f_ref = sort_and_split(eng.tolist(), 4), sort_and_split(fol.tolist(), 4)
    expected = {}
    for e, f, low in zip(e_ref, f_ref, is_low):
        lo, hi = expected.get((e, f), (0, 0))
        expected[(e, f)] = (lo + low, hi + (not low))
    got = {(k.engagement_bin, k.follower_bin): (len(lo), len(hi)) for k, (lo, hi) in s.groups(is_low).items()}
    assert got == expected


def test_kmeans_examples():
    res = kmeans_1d([0.0] * 10 + [0.5] * 10 + [1.0] * 10, 3)
    assert res.centroids == (0.0, 0.5, 1.0)
    assert kmeans_1d([0.1, 0.11, 0.9], 2).centroids == pytest.approx((0.105, 0.9))


def test_kmeans_uniform_200():
    x = np.random.default_rng(8).random(200)
    res = kmeans_1d(x, 3)
    assert res.wcss == pytest.approx(brute_force_wcss(x, 3), rel=1e-9)
