"""Tests for RECUR, its helpers and the clustering error."""

import math
import types

import numpy as np
import pytest

from activeclust.errors import QuotaStall
from activeclust.instances import gen_adversarial_kmeans, gen_ellipsoidal
from activeclust.oracle import LatentInstance, QueryLedger, SameClusterOracle
from activeclust.recur import (
    UNLABELED,
    Recur,
    RecurConfig,
    clustering_error,
    expansion_factor,
    greedy_hull_expansion,
    local_to_latent,
    recur,
    rounds_bound,
    sample_quota,
)
from activeclust.tessellation import audit_cells, tess_params, tessellation_learn


def _sound_error(instance: LatentInstance):
    """Error callback that also fails the run if a round produced an unsound labeling."""

    def error_fn(assignment: np.ndarray) -> float:
        local_to_latent(assignment, instance.labels)
        return clustering_error(assignment, instance.labels, instance.k)

    return error_fn


class TestClusteringError:
    """Test cases for clustering_error and local_to_latent."""

    def test_relabeling_is_free(self):
        assert clustering_error([0, 0, 1, 1], [1, 1, 0, 0]) == 0.0
        assert clustering_error([2, 0, 1], [0, 1, 2]) == 0.0

    def test_one_misplaced_point(self):
        assert clustering_error([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(0.25)

    def test_merged_clusters(self):
        assert clustering_error([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.5)

    def test_unlabeled_points_count(self):
        assert clustering_error([UNLABELED, UNLABELED, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.5)
        assert clustering_error([UNLABELED] * 3, [0, 1, 1]) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            clustering_error([0, 1], [0, 1, 1])

    def test_local_to_latent(self):
        assert local_to_latent([1, 1, 0, UNLABELED], [2, 2, 0, 1]) == {0: 0, 1: 2}
        with pytest.raises(ValueError):
            local_to_latent([0, 0, 1], [0, 1, 1])
        with pytest.raises(ValueError):
            local_to_latent([0, 1, 1], [0, 0, 0])


class TestBounds:
    """Test cases for the quota and round bound helpers."""

    def test_sample_quota(self):
        assert sample_quota(2, 2) == 3
        assert sample_quota(3, 2) == 5
        assert sample_quota(3, 2, quota_constant=0.01) == 1

    def test_rounds_bound(self):
        expected = (24 + 6 * math.sqrt(3)) * math.log(2000)
        assert rounds_bound(3, 2000) == pytest.approx(expected)


class TestGreedyHullExpansion:
    """Test cases for greedy_hull_expansion."""

    def test_collinear_lattice(self):
        line = np.column_stack([np.arange(11.0), np.zeros(11)])
        points = np.concatenate([line, [[5.0, 5.0], [6.0, 5.0]]])
        members = greedy_hull_expansion(points, np.arange(13), np.array([0, 5, 10]), 1.0)
        np.testing.assert_array_equal(members, np.arange(11))

    def test_fixpoint(self):
        line = np.column_stack([np.arange(11.0), np.zeros(11)])
        points = np.concatenate([line, [[5.0, 5.0], [6.0, 5.0]]])
        once = greedy_hull_expansion(points, np.arange(13), np.array([0, 10]), 1.0)
        twice = greedy_hull_expansion(points, np.arange(13), once, 1.0)
        np.testing.assert_array_equal(once, twice)

    def test_expansion_factor_respects_margin(self):
        for rank in (1, 2, 3, 6):
            for gamma in (0.05, 0.5, 1.0, 10.0):
                alpha = expansion_factor(rank, gamma)
                assert (1 + 2 * alpha) ** 2 <= 1 + min(gamma, 0.5) + 1e-12
        assert expansion_factor(1, 0.5) == pytest.approx((math.sqrt(1.5) - 1) / 2)
        assert expansion_factor(2, 0.5) == pytest.approx(tess_params(2, 0.5, [1.0, 1.0], 1.001).alpha)

    def test_collinear_cluster_keeps_close_neighbour_out(self):
        # Cluster on [-1, 1] around c = 0; the other point sits just outside sqrt(1.5).
        xs = [-1.0, 0.9, 0.95, 1.0, -1.226]
        points = np.column_stack([xs, np.zeros(len(xs))])
        members = greedy_hull_expansion(points, np.arange(5), np.array([0, 1, 2, 3]), 0.5)
        np.testing.assert_array_equal(members, [0, 1, 2, 3])

    def test_stays_inside_cluster(self):
        for seed in range(5):
            instance = gen_ellipsoidal(n=900, k=3, d=2, gamma=1.0, kappa=100.0, seed=seed, layout="packed")
            rng = np.random.default_rng(seed)
            for j in range(instance.k):
                sample = rng.choice(np.flatnonzero(instance.labels == j), size=20, replace=False)
                members = greedy_hull_expansion(instance.points.points, np.arange(instance.n), sample, 1.0)
                assert np.all(instance.labels[members] == j)
                assert len(members) >= len(sample)


class TestRecur:
    """Test cases for the Recur runner."""

    def test_ellipsoidal_exact_recovery(self):
        instance = gen_ellipsoidal(n=2000, k=3, d=2, gamma=1.0, kappa=100.0, seed=7)
        oracle = SameClusterOracle(instance)
        result = Recur(config=RecurConfig(rng_seed=0)).run(oracle, 3, 1.0, error_fn=_sound_error(instance))

        assert clustering_error(result.assignment, instance.labels, 3) == 0.0
        assert result.unlabeled == 0
        assert result.queries == oracle.count
        assert result.rounds[-1].queries_cumulative == oracle.count
        assert result.rounds[-1].error_so_far == 0.0
        assert result.rounds[-1].residual == 0
        assert len(result.rounds) <= rounds_bound(3, instance.n)
        assert all(not audit_cells(t, instance.labels) for t in result.tessellations)

    def test_rounds_are_monotone(self):
        instance = gen_ellipsoidal(n=1500, k=4, d=2, gamma=1.0, kappa=10.0, seed=3, layout="packed")
        result = recur(SameClusterOracle(instance), 4, 1.0, RecurConfig(rng_seed=5))
        residuals = [stats.residual for stats in result.rounds]
        queries = [stats.queries_cumulative for stats in result.rounds]
        assert residuals == sorted(residuals, reverse=True)
        assert queries == sorted(queries)
        assert sum(stats.recovered for stats in result.rounds) == instance.n
        assert [stats.round for stats in result.rounds] == list(range(len(result.rounds)))

    def test_las_vegas_over_seeds(self):
        instance = gen_ellipsoidal(n=1200, k=3, d=3, gamma=1.0, kappa=100.0, seed=2, layout="packed")
        for seed in range(5):
            result = recur(SameClusterOracle(instance), 3, 1.0, RecurConfig(rng_seed=seed))
            assert clustering_error(result.assignment, instance.labels, 3) == 0.0

    @pytest.mark.slow
    def test_las_vegas_many_seeds(self):
        instance = gen_ellipsoidal(n=2000, k=3, d=2, gamma=1.0, kappa=100.0, seed=7)
        for seed in range(50):
            result = recur(SameClusterOracle(instance), 3, 1.0, RecurConfig(rng_seed=seed))
            assert clustering_error(result.assignment, instance.labels, 3) == 0.0

    def test_adversarial_instance(self):
        instance = gen_adversarial_kmeans(n=10_000, p=0.5, gamma=0.05, seed=1)
        oracle = SameClusterOracle(instance)
        result = Recur(config=RecurConfig(rng_seed=1)).run(oracle, 2, 0.05, error_fn=_sound_error(instance))
        assert clustering_error(result.assignment, instance.labels, 2) == 0.0
        assert result.queries < 200

    @pytest.mark.slow
    def test_adversarial_many_seeds(self):
        instance = gen_adversarial_kmeans(n=10_000, p=0.5, gamma=0.05, seed=0)
        for seed in range(50):
            result = recur(SameClusterOracle(instance), 2, 0.05, RecurConfig(rng_seed=seed))
            assert clustering_error(result.assignment, instance.labels, 2) == 0.0
            assert all(not audit_cells(t, instance.labels) for t in result.tessellations)

    def test_epsilon_one_issues_no_queries(self):
        instance = gen_ellipsoidal(n=300, k=2, d=2, gamma=1.0, kappa=10.0, seed=0)
        oracle = SameClusterOracle(instance)
        result = recur(oracle, 2, 1.0, RecurConfig(epsilon=1.0))
        assert result.queries == oracle.count == 0
        assert result.rounds == []
        assert result.unlabeled == instance.n
        assert clustering_error(result.assignment, instance.labels, 2) == 1.0

    def test_partial_cover(self):
        instance = gen_ellipsoidal(n=1000, k=3, d=2, gamma=1.0, kappa=10.0, seed=4, layout="packed")
        result = recur(SameClusterOracle(instance), 3, 1.0, RecurConfig(epsilon=0.5, rng_seed=2))
        assert result.unlabeled <= 0.5 * instance.n
        local_to_latent(result.assignment, instance.labels)

    def test_batch_mode_with_hull_expansion(self):
        instance = gen_ellipsoidal(n=1500, k=3, d=2, gamma=1.0, kappa=100.0, seed=9, layout="packed")
        config = RecurConfig(sampling="batch", batch_size=60, use_hull_expansion=True, rng_seed=4)
        result = recur(SameClusterOracle(instance), 3, 1.0, config, error_fn=_sound_error(instance))
        assert clustering_error(result.assignment, instance.labels, 3) == 0.0
        assert all(stats.sample_size == 60 for stats in result.rounds)

    def test_gamma_fed_above_true_margin(self):
        instance = gen_ellipsoidal(n=5000, k=5, d=2, gamma=1.0, kappa=100.0, seed=12, layout="packed")
        config = RecurConfig(sampling="batch", batch_size=50, use_hull_expansion=True, rng_seed=0)
        result = recur(SameClusterOracle(instance), 5, 10.0, config, error_fn=_sound_error(instance))
        assert clustering_error(result.assignment, instance.labels, 5) == 0.0
        assert all(t.params is None or t.params.gamma_eff == 0.5 for t in result.tessellations)

    @staticmethod
    def _full_scale_run(d: int, seed: int, n: int = 100_000, k: int = 5):
        instance = gen_ellipsoidal(n=n, k=k, d=d, gamma=1.0, kappa=100.0, seed=seed, layout="packed")
        config = RecurConfig(sampling="batch", batch_size=50, use_hull_expansion=True, rng_seed=seed)
        result = recur(SameClusterOracle(instance), k, 10.0, config, error_fn=_sound_error(instance))
        return instance, result

    @pytest.mark.slow
    @pytest.mark.parametrize("d", [2, 4, 6, 8])
    def test_full_scale_experiment(self, d):
        for seed in range(10):
            instance, result = self._full_scale_run(d, seed)
            assert clustering_error(result.assignment, instance.labels, 5) == 0.0
            assert len(result.rounds) <= rounds_bound(5, instance.n)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "d",
        [
            2,
            4,
            6,
            pytest.param(
                8,
                marks=pytest.mark.xfail(
                    reason="sample labeling over several hundred rounds can exceed 3% of kn", strict=False
                ),
            ),
        ],
    )
    def test_full_scale_query_budget(self, d):
        for seed in range(10):
            instance, result = self._full_scale_run(d, seed)
            first_good = next(s for s in result.rounds if s.error_so_far <= 0.05)
            assert first_good.queries_cumulative < 0.03 * 5 * instance.n

    @staticmethod
    def _assert_round_costs_bounded(result, k: int) -> None:
        previous = 0
        for stats, learned in zip(result.rounds, result.tessellations):
            cells = learned.params.max_cells if learned.params is not None else 1
            assert stats.queries_cumulative - previous <= k * stats.sample_size + cells
            assert learned.queries <= cells
            previous = stats.queries_cumulative

    def test_round_cost_does_not_depend_on_n(self):
        instance = gen_ellipsoidal(n=3000, k=3, d=2, gamma=1.0, kappa=100.0, seed=5)
        result = recur(SameClusterOracle(instance), 3, 1.0, RecurConfig(rng_seed=5))
        assert len(result.tessellations) == len(result.rounds)
        self._assert_round_costs_bounded(result, 3)

    @pytest.mark.slow
    def test_query_growth_follows_round_count(self):
        for n in (1_000, 10_000, 100_000):
            for seed in range(5):
                instance = gen_ellipsoidal(n=n, k=3, d=2, gamma=1.0, kappa=100.0, seed=seed)
                result = recur(SameClusterOracle(instance), 3, 1.0, RecurConfig(rng_seed=seed))
                assert clustering_error(result.assignment, instance.labels, 3) == 0.0
                assert len(result.rounds) <= rounds_bound(3, n)
                self._assert_round_costs_bounded(result, 3)

    def test_deterministic_transcript(self):
        instance = gen_ellipsoidal(n=800, k=3, d=2, gamma=1.0, kappa=100.0, seed=6, layout="packed")
        transcripts = []
        for _ in range(2):
            ledger = QueryLedger(record_transcript=True)
            result = recur(SameClusterOracle(instance, ledger), 3, 1.0, RecurConfig(rng_seed=13))
            transcripts.append((ledger.transcript, result.assignment.tolist()))
        assert transcripts[0] == transcripts[1]

    def test_quota_stall(self):
        # Every point is its own cluster but the run is told k = 2.
        points = np.arange(300, dtype=float).reshape(-1, 1)
        instance = LatentInstance(points, np.arange(300), k=300, gamma=1.0)
        config = RecurConfig(quota_constant=100.0)
        with pytest.raises(QuotaStall):
            recur(SameClusterOracle(instance), 2, 1.0, config)

    def test_rejects_bad_arguments(self):
        instance = gen_ellipsoidal(n=100, k=2, d=2, gamma=1.0, kappa=10.0, seed=0)
        with pytest.raises(ValueError):
            recur(SameClusterOracle(instance), 1, 1.0)
        with pytest.raises(ValueError):
            recur(SameClusterOracle(instance), 2, 0.0)
        with pytest.raises(ValueError):
            recur(SameClusterOracle(instance), 2, 1.0, RecurConfig(epsilon=1.5))
        with pytest.raises(ValueError):
            recur(SameClusterOracle(instance), 2, 1.0, RecurConfig(sampling="batch", batch_size=1))

    @pytest.mark.slow
    def test_high_dimension(self):
        instance = gen_ellipsoidal(n=5000, k=4, d=6, gamma=1.0, kappa=100.0, seed=1, layout="packed")
        result = recur(SameClusterOracle(instance), 4, 1.0, RecurConfig(rng_seed=0))
        assert clustering_error(result.assignment, instance.labels, 4) == 0.0
        assert len(result.rounds) <= rounds_bound(4, instance.n)


class TestModuleAccess:
    """Test cases for reaching the runner module through the package."""

    def test_submodule_is_not_shadowed(self):
        import activeclust
        import activeclust.recur as runner_module

        assert isinstance(activeclust.recur, types.ModuleType)
        assert runner_module.tessellation_learn is tessellation_learn
        assert runner_module.recur is recur
