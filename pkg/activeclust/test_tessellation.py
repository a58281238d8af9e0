"""Tests for tessellation constants, cell keys and tessellation_learn."""

import json
import math

import numpy as np
import pytest

from activeclust.errors import NotInEllipsoid
from activeclust.geometry import ClusterMetric, Ellipsoid, PsdMetric
from activeclust.instances import gen_ellipsoidal
from activeclust.oracle import LatentInstance, QueryLedger, SameClusterOracle
from activeclust.tessellation import (
    TessParams,
    audit_cells,
    cell_key,
    cell_keys,
    tess_params,
    tessellation_learn,
)


def _unit_disc() -> Ellipsoid:
    return Ellipsoid(center=np.zeros(2), axes=np.eye(2), semiaxes=np.array([1.0, 1.0]))


class TestTessParams:
    """Test cases for tess_params."""

    def test_two_dimensional_clamped(self):
        params = tess_params(2, 1.0, [1.0, 1.0], 1.0)
        assert params.gamma_eff == 0.5
        assert params.alpha == pytest.approx(0.079057, abs=1e-6)
        np.testing.assert_allclose(params.beta, [0.055902, 0.055902], atol=1e-6)
        assert params.b == 38

    def test_one_dimensional(self):
        params = tess_params(1, 0.5, [10.0], 1.0)
        assert params.beta[0] == pytest.approx(1.5811, abs=1e-4)
        assert 10.0 / params.beta[0] == pytest.approx(2 * math.sqrt(10), abs=1e-4)

    def test_ratio_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            r = int(rng.integers(1, 9))
            gamma = float(rng.uniform(0.01, 2.0))
            phi = float(rng.uniform(1.0, 1.1))
            semiaxes = np.sort(rng.uniform(0.1, 5.0, size=r))[::-1]
            params = tess_params(r, gamma, semiaxes, phi)
            expected = math.sqrt(5) * phi * r * math.sqrt(2 * r) / min(gamma, 0.5)
            np.testing.assert_allclose(semiaxes / params.beta, expected, rtol=1e-12)
            assert params.alpha == pytest.approx(min(gamma, 0.5) / (math.sqrt(5) * math.sqrt(2) * phi * r))
            assert params.beta[0] * (1 + params.alpha) ** params.b >= semiaxes[0] * (1 - 1e-12)

    def test_stretch_grows_levels(self):
        exact = tess_params(3, 0.5, [1.0, 1.0, 1.0], 1.0)
        rounded = tess_params(3, 0.5, [1.0, 1.0, 1.0], 1.001)
        assert np.all(rounded.beta < exact.beta)
        assert rounded.b >= exact.b

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            tess_params(0, 0.5, [], 1.0)
        with pytest.raises(ValueError):
            tess_params(1, 0.0, [1.0], 1.0)
        with pytest.raises(ValueError):
            tess_params(1, 0.5, [1.0], 0.9)


class TestCellKey:
    """Test cases for cell_key and cell_keys."""

    def test_center_cell(self):
        params = tess_params(2, 0.5, [1.0, 1.0])
        assert cell_key(_unit_disc(), params, [0.0, 0.0]) == (0, 0)

    def test_geometric_level(self):
        params = tess_params(2, 0.5, [1.0, 1.0])
        beta = params.beta[0]
        assert cell_key(_unit_disc(), params, [1.5 * beta, 0.0]) == (6, 0)
        assert cell_key(_unit_disc(), params, [-1.5 * beta, 0.0]) == (-6, 0)

    def test_base_interval_has_no_sign(self):
        params = tess_params(2, 0.5, [1.0, 1.0])
        beta = params.beta[0]
        assert cell_key(_unit_disc(), params, [-0.5 * beta, 0.5 * beta]) == (0, 0)
        assert cell_key(_unit_disc(), params, [beta, 0.0]) == (0, 0)

    def test_boundary_clamps_to_outermost_level(self):
        params = tess_params(2, 0.5, [1.0, 1.0])
        assert cell_key(_unit_disc(), params, [1.0, 0.0]) == (params.b, 0)
        keys = cell_keys(_unit_disc(), params, np.array([[1.0 + 1e-9, 0.0]]))
        assert keys[0, 0] == params.b

    def test_zero_levels(self):
        params = TessParams(gamma_eff=0.5, phi=1.0, alpha=0.1, b=0, beta=np.array([0.5, 0.5]))
        keys = cell_keys(_unit_disc(), params, np.array([[0.9, -0.3], [0.0, 0.0]]))
        np.testing.assert_array_equal(keys, np.zeros((2, 2)))

    def test_outside_point(self):
        params = tess_params(2, 0.5, [1.0, 1.0])
        with pytest.raises(NotInEllipsoid):
            cell_key(_unit_disc(), params, [0.8, 0.8])


class TestTessellationLearn:
    """Test cases for tessellation_learn."""

    @staticmethod
    def _instance(seed: int, d: int = 2) -> LatentInstance:
        return gen_ellipsoidal(n=900, k=3, d=d, gamma=1.0, kappa=100.0, seed=seed, layout="packed")

    def test_whole_cluster_sample(self):
        instance = gen_ellipsoidal(n=300, k=2, d=2, gamma=1.0, kappa=4.0, seed=1, layout="lattice")
        oracle = SameClusterOracle(instance)
        cluster = np.flatnonzero(instance.labels == 0)
        result = tessellation_learn(
            instance.points.points, np.arange(instance.n), cluster, 1.0, oracle
        )
        np.testing.assert_array_equal(result.members, cluster)
        assert result.queries <= result.params.max_cells
        assert not audit_cells(result, instance.labels)

    def test_cells_of_sample_points_cost_no_queries(self):
        for seed in range(3):
            instance = self._instance(seed)
            oracle = SameClusterOracle(instance)
            cluster = np.flatnonzero(instance.labels == 0)
            result = tessellation_learn(instance.points.points, np.arange(instance.n), cluster, 1.0, oracle)

            np.testing.assert_array_equal(result.members, cluster)
            queried = [c for c in result.cells if c.representative is not None]
            assert result.queries == oracle.count == len(queried)
            assert all(instance.labels[c.representative] != 0 and c.answer == -1 for c in queried)
            assert all(c.answer == 1 for c in result.cells if np.isin(c.ids, cluster).any())

    def test_single_point_sample(self):
        points = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0], [1.0, 1.0]])
        instance = LatentInstance(points, [0, 0, 1, 0], k=2, gamma=1.0)
        oracle = SameClusterOracle(instance)
        result = tessellation_learn(points, np.arange(4), [0], 1.0, oracle)
        np.testing.assert_array_equal(result.members, [0, 1, 3])
        assert result.ellipsoid.rank == 0
        assert result.queries == oracle.count == 0

    def test_exact_recovery_of_cluster_in_ellipsoid(self):
        for seed in range(5):
            instance = self._instance(seed)
            points = instance.points.points
            rng = np.random.default_rng(seed)
            for j in range(instance.k):
                oracle = SameClusterOracle(instance)
                cluster = np.flatnonzero(instance.labels == j)
                sample = rng.choice(cluster, size=30, replace=False)
                result = tessellation_learn(points, np.arange(instance.n), sample, 1.0, oracle)

                inside = np.flatnonzero(result.ellipsoid.contains(points))
                expected = np.union1d(inside[instance.labels[inside] == j], sample)
                np.testing.assert_array_equal(result.members, expected)
                assert not audit_cells(result, instance.labels)

                unsettled = [c for c in result.cells if not np.isin(c.ids, sample).any()]
                assert result.queries == len(unsettled)
                assert all(c.representative == c.ids[0] for c in unsettled)
                assert oracle.count == result.queries
                assert len(result.cells) <= result.params.max_cells

    def test_other_cluster_inside_ellipsoid_is_rejected(self):
        # A rhombus cluster whose ellipse also covers a small cluster outside the rhombus.
        rhombus = np.column_stack([np.linspace(-10, 10, 41), np.zeros(41)])
        rhombus = np.concatenate([rhombus, [[0.0, 1.0], [0.0, -1.0]]])
        blob = np.array([[5.0, 0.6], [5.05, 0.6], [4.95, 0.6]])
        points = np.concatenate([rhombus, blob])
        labels = np.array([0] * len(rhombus) + [1] * len(blob))
        normal = np.array([1.0, 10.0])
        metrics = [
            ClusterMetric(PsdMetric(np.outer(normal, normal)), np.zeros(2)),
            ClusterMetric(PsdMetric.identity(2), np.array([5.0, 0.6])),
        ]
        instance = LatentInstance(points, labels, k=2, gamma=0.1, metrics=metrics)
        instance.verify_margins()

        oracle = SameClusterOracle(instance)
        vertices = [0, 40, 41, 42]
        result = tessellation_learn(points, np.arange(len(points)), vertices, 0.1, oracle)
        assert np.all(result.ellipsoid.contains(blob))
        np.testing.assert_array_equal(result.members, np.arange(len(rhombus)))
        assert not audit_cells(result, labels)

    def test_deterministic_transcript(self):
        instance = self._instance(11)
        sample = np.flatnonzero(instance.labels == 1)[:25]
        transcripts, members = [], []
        for _ in range(2):
            ledger = QueryLedger(record_transcript=True)
            result = tessellation_learn(
                instance.points.points, np.arange(instance.n), sample, 1.0, SameClusterOracle(instance, ledger)
            )
            transcripts.append(ledger.transcript)
            members.append(result.members)
        assert transcripts[0] == transcripts[1]
        np.testing.assert_array_equal(members[0], members[1])

    def test_higher_rank(self):
        instance = self._instance(2, d=4)
        oracle = SameClusterOracle(instance)
        sample = np.flatnonzero(instance.labels == 0)[:60]
        result = tessellation_learn(instance.points.points, np.arange(instance.n), sample, 1.0, oracle)
        assert result.ellipsoid.rank == 4
        assert np.all(instance.labels[result.members] == 0)
        assert not audit_cells(result, instance.labels)

    def test_json_dump(self, tmp_path):
        instance = self._instance(4)
        sample = np.flatnonzero(instance.labels == 2)[:20]
        result = tessellation_learn(
            instance.points.points, np.arange(instance.n), sample, 1.0, SameClusterOracle(instance)
        )
        document = json.loads(result.to_json(tmp_path / "cells.json").read_text())
        assert document["queries"] == result.queries
        assert sum(cell["size"] for cell in document["cells"]) >= document["recovered"]
        assert document["params"]["b"] == result.params.b
