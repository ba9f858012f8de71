import itertools
import warnings

import numpy as np
import pytest

from ropufsim.select import (
    SelectionConfig,
    baseline_select,
    improved_kmeans,
    mean_intracluster_distance,
    min_pairwise_diff,
    plain_kmeans,
    relocate_centroids,
    seed_centroids,
)


def brute_force_best_min_diff(freqs, m):
    """Independent oracle: exhaustive max over C(|F|, m) subsets."""
    best = 0.0
    fs = np.sort(np.asarray(freqs, dtype=float))
    for combo in itertools.combinations(fs, m):
        best = max(best, float(np.min(np.diff(np.asarray(combo)))))
    return best


def config(m, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SelectionConfig(m=m, **kw)


class TestSelectionConfig:
    def test_non_standard_ro_count_warns(self):
        with pytest.warns(UserWarning):
            SelectionConfig(m=12)

    def test_standard_counts_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            SelectionConfig(m=32)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            SelectionConfig(m=1)


class TestMinPairwiseDiff:
    def test_three_values(self):
        assert min_pairwise_diff([100.0, 110.0, 120.0]) == 10.0

    def test_duplicates_give_zero(self):
        assert min_pairwise_diff([100.0, 100.0, 200.0]) == 0.0

    def test_single_value_rejected(self):
        with pytest.raises(ValueError):
            min_pairwise_diff([5.0])


class TestMicd:
    def test_points_at_centroids(self):
        out = mean_intracluster_distance(
            np.array([1.0, 2.0]), np.array([0, 1]), np.array([1.0, 2.0])
        )
        assert out["mean"] == 0.0

    def test_hand_average(self):
        out = mean_intracluster_distance(
            np.array([99.0, 101.0]), np.array([0, 0]), np.array([100.0])
        )
        assert out["per_cluster"][0] == pytest.approx(1.0)

    def test_mean_of_cluster_means(self):
        values = np.array([99.0, 101.0, 7.0, 13.0])
        labels = np.array([0, 0, 1, 1])
        out = mean_intracluster_distance(values, labels, np.array([100.0, 10.0]))
        assert out["per_cluster"].tolist() == [1.0, 3.0]
        assert out["mean"] == pytest.approx(2.0)

    def test_empty_cluster_flagged(self):
        out = mean_intracluster_distance(
            np.array([1.0]), np.array([0]), np.array([1.0, 50.0])
        )
        assert out["empty_clusters"] == [1]
        assert out["per_cluster"][1] == 0.0


class TestSeedCentroids:
    def test_linear_equal_spacing(self):
        cents = seed_centroids(np.array([100.0, 105.0, 111.0, 130.0]), 4, "linear")
        assert cents.tolist() == [100.0, 110.0, 120.0, 130.0]

    def test_uniform_density_equal_counts(self):
        f = np.arange(100, dtype=float)
        cents = seed_centroids(f, 5, "uniform_density")
        assert all(c in f for c in cents)
        gaps = np.diff(np.searchsorted(f, cents))
        assert np.all(np.abs(gaps - gaps.mean()) <= 1)

    def test_kmeanspp_degenerate_identical_points(self):
        f = np.full(10, 7.0)
        cents = seed_centroids(f, 3, "kmeanspp", np.random.default_rng(0))
        assert np.all(cents == 7.0)

    def test_too_few_candidates(self):
        with pytest.raises(ValueError):
            seed_centroids(np.array([1.0, 2.0]), 3, "linear")

    def test_random_within_range(self):
        f = np.linspace(10.0, 20.0, 12)
        cents = seed_centroids(f, 8, "random", np.random.default_rng(0))
        assert np.all((cents >= 10.0) & (cents <= 20.0))


class TestImprovedKmeans:
    def test_returns_at_least_plain_and_at_most_oracle(self):
        f = np.array([100.0, 101.0, 105.0, 110.0, 120.0])
        cfg = config(3, rng_seed=1)
        imp = improved_kmeans(f, cfg)
        pla = plain_kmeans(f, cfg)
        opt = brute_force_best_min_diff(f, 3)
        assert opt == 10.0  # exhaustive over C(5,3): {100, 110, 120}
        assert imp.min_diff >= pla.min_diff
        assert imp.min_diff <= opt + 1e-12
        # linear seeds land on the optimum for this instance
        assert imp.min_diff == pytest.approx(10.0)

    def test_exactly_m_points_selects_all(self):
        f = np.array([3.0, 1.0, 2.0])
        res = improved_kmeans(f, config(3))
        assert sorted(res.frequencies.tolist()) == [1.0, 2.0, 3.0]
        assert res.iterations == 1

    def test_global_max_retention_exact(self):
        rng = np.random.default_rng(2)
        f = np.sort(rng.uniform(0, 100, 200))
        res = improved_kmeans(f, config(8, rng_seed=3))
        assert res.min_diff == max(res.min_diff_trace)

    def test_chosen_are_distinct_members(self):
        rng = np.random.default_rng(4)
        f = rng.uniform(0, 50, 100)
        res = improved_kmeans(f, config(8, rng_seed=5))
        assert len(set(res.site_refs)) == 8
        for _, freq in res.chosen:
            assert freq in f

    def test_min_diff_equals_recomputed_pairwise_min(self):
        rng = np.random.default_rng(6)
        f = rng.uniform(0, 50, 60)
        res = improved_kmeans(f, config(4, rng_seed=6))
        assert res.min_diff == pytest.approx(min_pairwise_diff(res.frequencies))

    def test_deterministic_under_fixed_seed(self):
        rng = np.random.default_rng(7)
        f = rng.uniform(0, 90, 300)
        a = improved_kmeans(f, config(16, seeding="kmeanspp", rng_seed=11))
        b = improved_kmeans(f, config(16, seeding="kmeanspp", rng_seed=11))
        assert a.chosen == b.chosen

    def test_site_refs_map_back_to_candidates(self):
        f = np.array([5.0, 1.0, 9.0, 3.0])
        refs = np.array([40, 10, 90, 30])
        res = improved_kmeans(f, config(2), site_refs=refs)
        assert res.chosen == [(10, 1.0), (90, 9.0)]

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            improved_kmeans(np.array([]), config(2))


class TestRelocation:
    def test_small_instance_reaches_brute_force_optimum(self):
        nu = np.array([100.0, 101.0, 102.0, 103.0, 110.0])
        res = relocate_centroids(nu, np.array([100.0, 101.0, 110.0]))
        assert res.min_diff == pytest.approx(3.0)
        assert sorted(res.frequencies.tolist()) == [100.0, 103.0, 110.0]
        assert brute_force_best_min_diff(nu, 3) == pytest.approx(3.0)

    def test_fixpoint_when_already_spread(self):
        nu = np.array([0.0, 10.0, 20.0])
        res = relocate_centroids(nu, nu.copy())
        assert res.iterations == 0
        assert res.frequencies.tolist() == [0.0, 10.0, 20.0]

    def test_non_member_centroids_rejected(self):
        with pytest.raises(ValueError):
            relocate_centroids(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.5]))

    def test_unsorted_candidates_rejected(self):
        with pytest.raises(ValueError):
            relocate_centroids(np.array([3.0, 1.0, 2.0]), np.array([1.0, 2.0]))

    def test_never_decreases_on_random_instances(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            n = int(rng.integers(4, 40))
            m = int(rng.integers(2, min(9, n + 1)))
            nu = np.sort(rng.uniform(0, 100, n))
            pick = np.sort(rng.choice(n, m, replace=False))
            before = min_pairwise_diff(nu[pick])
            res = relocate_centroids(nu, nu[pick])
            assert res.min_diff >= before - 1e-12

    def test_duplicate_frequencies_tolerated(self):
        nu = np.array([1.0, 1.0, 1.0, 2.0, 5.0])
        res = relocate_centroids(nu, np.array([1.0, 1.0]))
        assert res.min_diff >= 0.0

    def test_two_centroids_slide_to_extremes(self):
        nu = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        res = relocate_centroids(nu, np.array([1.0, 2.0]))
        assert sorted(res.frequencies.tolist()) == [0.0, 4.0]


class TestBaselines:
    def test_mean_based_on_uniform_grid(self):
        f = np.arange(100.0, 131.0)
        res = baseline_select(f, 4, "mean_based")
        assert res.frequencies.tolist() == [100.0, 110.0, 120.0, 130.0]
        assert res.min_diff == 10.0

    def test_median_matches_mean_on_uniform_density(self):
        f = np.arange(100.0, 131.0)
        a = baseline_select(f, 4, "mean_based")
        b = baseline_select(f, 4, "median_based")
        assert a.frequencies.tolist() == b.frequencies.tolist()

    def test_random_select_distinct_members(self):
        f = np.arange(50.0)
        res = baseline_select(f, 10, "random_select", np.random.default_rng(1))
        assert len(set(res.site_refs)) == 10

    def test_random_select_below_improved_kmeans_in_distribution(self):
        rng = np.random.default_rng(9)
        wins = 0
        for seed in range(20):
            f = np.sort(rng.uniform(0, 100, 400))
            km = improved_kmeans(f, config(8, rng_seed=seed))
            rnd = baseline_select(f, 8, "random_select", np.random.default_rng(seed))
            if km.min_diff >= rnd.min_diff:
                wins += 1
        assert wins >= 18

    def test_too_few_candidates(self):
        with pytest.raises(ValueError):
            baseline_select(np.array([1.0]), 2, "mean_based")


class TestOracleBound:
    def test_pipeline_never_exceeds_brute_force(self):
        rng = np.random.default_rng(10)
        for trial in range(50):
            n = int(rng.integers(6, 16))
            m = int(rng.integers(2, 5))
            f = np.sort(rng.uniform(0, 100, n))
            km = improved_kmeans(f, config(m, rng_seed=trial))
            rel = relocate_centroids(f, km.centroids)
            assert rel.min_diff <= brute_force_best_min_diff(f, m) + 1e-9
