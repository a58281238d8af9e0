"""SCQ-k-means baseline: centroid estimate, distance sort and binary search for the radius."""

import logging
import math
import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DegenerateSample
from .oracle import SameClusterOracle, label_with_representatives
from .recur import UNLABELED, ErrorFn, RecoveredClustering, RoundStats

logger = logging.getLogger(__name__)


@dataclass
class BaselineConfig:
    """Configuration for an SCQ-k-means run."""

    phase1_samples: int | None = None  # None means min(n, ceil(k ln k / gamma^4), 10 k)
    rng_seed: int = 0


def default_phase1_samples(n: int, k: int, gamma: float) -> int:
    """Centroid-estimation sample size min(n, ceil(k ln k / gamma^4), 10 k)."""
    return max(1, min(n, math.ceil(k * math.log(k) / gamma**4), 10 * k))


class ScqKMeans:
    """Runner for the SCQ-k-means baseline.

    Each of k rounds estimates one cluster's center as the mean of the majority
    cluster in a labeled sample, sorts the residual points by Euclidean distance
    to it and binary-searches the largest prefix answering +1 against a known
    member. Points left after k rounds join the last round's cluster.
    """

    def __init__(
        self,
        name: str = "scq-kmeans",
        config: BaselineConfig | None = None,
        verbose: bool = False,
    ):
        self.name = name
        self.config = config or BaselineConfig()
        self.verbose = verbose

    def _log(self, message: str, *args: Any) -> None:
        logger.log(logging.INFO if self.verbose else logging.DEBUG, f"[{self.name}] " + message, *args)

    def run(
        self,
        oracle: SameClusterOracle,
        k: int,
        gamma: float,
        error_fn: ErrorFn | None = None,
    ) -> RecoveredClustering:
        if k < 2:
            raise ValueError(f"k must be at least 2, got {k}")
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")

        points = oracle.points.points
        n = len(points)
        m = self.config.phase1_samples or default_phase1_samples(n, k, gamma)
        if m < 1:
            raise ValueError(f"phase1_samples must be at least 1, got {m}")

        rng = np.random.default_rng(self.config.rng_seed)
        assignment = np.full(n, UNLABELED, dtype=int)
        residual = np.arange(n)
        reps: list[int] = []
        cache: dict[int, int] = {}
        result = RecoveredClustering(assignment=assignment)
        start_queries = oracle.count
        started = time.perf_counter()

        for round_index in range(k):
            if len(residual) == 0:
                break
            draws = residual[rng.integers(len(residual), size=m)]
            local = label_with_representatives(oracle, draws, reps, cache)
            chosen = int(np.argmax(np.bincount(local)))
            members = draws[local == chosen]
            if len(members) == 0:
                raise DegenerateSample(f"round {round_index}: majority sample is empty")
            center = points[members].mean(axis=0)
            known = int(members[0])

            distances = np.linalg.norm(points[residual] - center, axis=1)
            ordered = residual[np.lexsort((residual, distances))]
            lo, hi = 0, len(ordered)
            while lo < hi:
                mid = (lo + hi) // 2
                probe = int(ordered[mid])
                if probe == known:
                    answer = 1
                elif probe in cache:
                    answer = 1 if cache[probe] == chosen else -1
                else:
                    answer = oracle.query(known, probe)
                if answer == 1:
                    lo = mid + 1
                else:
                    hi = mid

            taken = ordered[:lo] if round_index < k - 1 else ordered
            assignment[taken] = chosen
            residual = np.setdiff1d(residual, taken, assume_unique=True)

            stats = RoundStats(
                round=round_index,
                cluster_local_id=chosen,
                sample_size=m,
                recovered=len(taken),
                residual=len(residual),
                queries_cumulative=oracle.count - start_queries,
                wall_time_s=time.perf_counter() - started,
                error_so_far=error_fn(assignment) if error_fn is not None else None,
            )
            result.rounds.append(stats)
            self._log(
                "round %d: cluster %d, radius index %d, %d left, %d queries",
                round_index,
                chosen,
                lo,
                stats.residual,
                stats.queries_cumulative,
            )

        result.queries = oracle.count - start_queries
        return result


def scq_kmeans(
    oracle: SameClusterOracle,
    k: int,
    gamma: float,
    config: BaselineConfig | None = None,
    error_fn: ErrorFn | None = None,
) -> RecoveredClustering:
    """Run the SCQ-k-means baseline once."""
    return ScqKMeans(config=config).run(oracle, k, gamma, error_fn=error_fn)
