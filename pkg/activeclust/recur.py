"""RECUR: repeated sampling, ellipsoid rounding and tessellation until the data is covered."""

import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Literal

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import QuotaStall
from .geometry import GeometryConfig, hull_membership_many, orthonormal_span
from .oracle import SameClusterOracle, label_with_representatives
from .tessellation import TessellationResult, tess_params, tessellation_learn

logger = logging.getLogger(__name__)

UNLABELED = -1

ErrorFn = Callable[[np.ndarray], float]


@dataclass
class RecurConfig:
    """Configuration for a RECUR run."""

    epsilon: float = 0.0  # residual fraction that may stay unlabeled
    sampling: Literal["quota", "batch"] = "quota"
    quota_constant: float = 1.0  # b in the b * d^2 * ln k sample quota
    batch_size: int | None = None  # samples per round in batch mode, None means 10 * k
    use_hull_expansion: bool = False
    mvee_epsilon: float = 1e-3
    rng_seed: int = 0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)


@dataclass
class RoundStats:
    """One row of the per-round CSV."""

    round: int
    cluster_local_id: int
    sample_size: int
    recovered: int
    residual: int
    queries_cumulative: int
    wall_time_s: float
    error_so_far: float | None = None

    def to_row(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "cluster_local_id": self.cluster_local_id,
            "sample_size": self.sample_size,
            "recovered": self.recovered,
            "residual": self.residual,
            "queries_cumulative": self.queries_cumulative,
            "error_so_far": self.error_so_far,
            "wall_time_s": round(self.wall_time_s, 6),
        }


@dataclass
class RecoveredClustering:
    """Output of a run: local cluster ids per point and per-round statistics."""

    assignment: np.ndarray
    rounds: list[RoundStats] = field(default_factory=list)
    queries: int = 0
    tessellations: list[TessellationResult] = field(default_factory=list)

    @property
    def unlabeled(self) -> int:
        return int(np.count_nonzero(self.assignment == UNLABELED))


def rounds_bound(k: int, n: int, a: float = 1.0) -> float:
    """High-probability ceiling (8k + 6a sqrt(k)) ln n on the number of rounds."""
    return (8 * k + 6 * a * math.sqrt(k)) * math.log(n)


def sample_quota(k: int, d: int, quota_constant: float = 1.0) -> int:
    """Per-cluster sample size ceil(b * d^2 * ln k) that ends a quota-mode round."""
    return max(1, math.ceil(quota_constant * d * d * math.log(k)))


def clustering_error(
    assignment: np.ndarray,
    labels: np.ndarray,
    k: int | None = None,
) -> float:
    """Fraction of points outside the best matching between output and latent clusters.

    Unlabeled points (``UNLABELED``) always count as mismatches. The matching is
    an optimal assignment on the overlap matrix, so this equals the minimum over
    bijections of the normalized symmetric difference.
    """
    assignment = np.asarray(assignment, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if assignment.shape != labels.shape:
        raise ValueError(f"assignment shape {assignment.shape} != labels shape {labels.shape}")
    n = len(labels)
    if n == 0:
        return 0.0
    labeled = assignment != UNLABELED
    if not labeled.any():
        return 1.0

    local_ids, local_index = np.unique(assignment[labeled], return_inverse=True)
    latent_ids, latent_index = np.unique(labels[labeled], return_inverse=True)
    overlap = np.zeros((len(local_ids), max(len(latent_ids), k or 0)), dtype=np.int64)
    np.add.at(overlap, (local_index.reshape(-1), latent_index.reshape(-1)), 1)
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return 1.0 - overlap[rows, cols].sum() / n


def local_to_latent(assignment: np.ndarray, labels: np.ndarray) -> dict[int, int]:
    """Map each local cluster id to the latent label of its points.

    Raises:
        ValueError: If a local id covers several latent labels or two local ids
            share a latent label.
    """
    mapping: dict[int, int] = {}
    assignment = np.asarray(assignment, dtype=int)
    labels = np.asarray(labels, dtype=int)
    for local in np.unique(assignment[assignment != UNLABELED]):
        latent = np.unique(labels[assignment == local])
        if len(latent) != 1:
            raise ValueError(f"local cluster {local} mixes latent labels {latent.tolist()}")
        mapping[int(local)] = int(latent[0])
    if len(set(mapping.values())) != len(mapping):
        raise ValueError(f"local clusters share a latent label: {mapping}")
    return mapping


def expansion_factor(rank: int, gamma: float, mvee_epsilon: float = 1e-3) -> float:
    """Hull scale-up alpha: the tessellation's alpha, capped so that (1 + 2 alpha)^2 <= 1 + gamma_eff.

    Scaling about a hull point moves any hull vertex by at most 2 alpha inner
    radii, so the cap keeps expanded points inside the sqrt(1 + gamma) ball
    whenever the fed gamma is at most the true margin. Uncapped, rank 1 would
    reach (1 + 2 gamma / sqrt(10))^2 > 1 + gamma.
    """
    params = tess_params(rank, gamma, np.ones(rank), 1.0 + mvee_epsilon)
    return min(params.alpha, (math.sqrt(1.0 + params.gamma_eff) - 1.0) / 2.0)


def greedy_hull_expansion(
    points: np.ndarray,
    residual_ids: np.ndarray,
    sample_ids: np.ndarray,
    gamma: float,
    mvee_epsilon: float = 1e-3,
    config: GeometryConfig | None = None,
) -> np.ndarray:
    """Grow S_C by the residual points inside its hull scaled by (1 + alpha) about its centroid.

    Repeats until no point is added. Issues no queries. Sound when the fed gamma
    is at most the true margin: members stay in C, so every pass scales a hull
    lying in C's inner ball (see ``expansion_factor``). With gamma fed above the
    margin it may absorb other clusters.
    """
    cfg = config or GeometryConfig()
    members = np.unique(np.asarray(sample_ids, dtype=int))
    candidates = np.setdiff1d(residual_ids, members)
    scale = max(1.0, float(np.abs(points[members]).max()))
    passes = 0

    while len(candidates):
        passes += 1
        span = orthonormal_span(points[members], cfg.rank_tolerance)
        in_span = span.residuals(points[candidates]) <= cfg.rank_tolerance * scale
        if span.rank == 0:
            added = candidates[in_span]
        else:
            alpha = expansion_factor(span.rank, gamma, mvee_epsilon)
            coords = span.coordinates(points[members])
            centroid = coords.mean(axis=0)
            scaled = centroid + (1.0 + alpha) * (coords - centroid)
            pool = candidates[in_span]
            pool_coords = span.coordinates(points[pool])
            slack = cfg.lp_tolerance * scale
            in_box = np.all(
                (pool_coords >= scaled.min(axis=0) - slack) & (pool_coords <= scaled.max(axis=0) + slack),
                axis=1,
            )
            pool, pool_coords = pool[in_box], pool_coords[in_box]
            added = pool[hull_membership_many(scaled, pool_coords, cfg)] if len(pool) else pool
        if len(added) == 0:
            break
        members = np.union1d(members, added)
        candidates = np.setdiff1d(candidates, added)

    logger.debug("hull expansion: %d -> %d points in %d passes", len(sample_ids), len(members), passes)
    return members


class Recur:
    """Runner for the RECUR active clustering algorithm."""

    def __init__(
        self,
        name: str = "recur",
        config: RecurConfig | None = None,
        verbose: bool = False,
    ):
        """Initialize a runner.

        Args:
            name: Identifier used as the log prefix
            config: Run configuration with defaults
            verbose: Log per-round progress at INFO instead of DEBUG
        """
        self.name = name
        self.config = config or RecurConfig()
        self.verbose = verbose

    def _log(self, message: str, *args: Any) -> None:
        logger.log(logging.INFO if self.verbose else logging.DEBUG, f"[{self.name}] " + message, *args)

    def _draw_sample(
        self,
        oracle: SameClusterOracle,
        residual: np.ndarray,
        k: int,
        rng: np.random.Generator,
        reps: list[int],
        cache: dict[int, int],
    ) -> tuple[int, np.ndarray, int]:
        """Sample the residual with replacement; return (local id, its sample ids, draws)."""
        d = oracle.points.d
        if self.config.sampling == "batch":
            size = self.config.batch_size or 10 * k
            draws = residual[rng.integers(len(residual), size=size)]
            local = label_with_representatives(oracle, draws, reps, cache)
            counts = np.bincount(local)
            chosen = int(np.argmax(counts))
            return chosen, draws[local == chosen], size

        quota = sample_quota(k, d, self.config.quota_constant)
        limit = 10 * k * quota
        samples: dict[int, list[int]] = defaultdict(list)
        for draw in range(1, limit + 1):
            point_id = int(residual[rng.integers(len(residual))])
            local = int(label_with_representatives(oracle, [point_id], reps, cache)[0])
            samples[local].append(point_id)
            if len(samples[local]) >= quota:
                return local, np.asarray(samples[local]), draw
        raise QuotaStall(
            f"no local cluster reached the quota of {quota} samples within {limit} draws; "
            f"{len(reps)} clusters seen, k={k}"
        )

    def run(
        self,
        oracle: SameClusterOracle,
        k: int,
        gamma: float,
        error_fn: ErrorFn | None = None,
    ) -> RecoveredClustering:
        """Recover the latent clustering through ``oracle``.

        Args:
            oracle: Same-cluster oracle over the points.
            k: Number of clusters (>= 2).
            gamma: Margin fed to the tessellation.
            error_fn: Optional callback scoring the current assignment after
                each round (fills ``error_so_far``); the algorithm never reads it.

        Returns:
            The assignment (``UNLABELED`` where left uncovered) and per-round stats.
        """
        cfg = self.config
        if k < 2:
            raise ValueError(f"k must be at least 2, got {k}")
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        if not 0 <= cfg.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {cfg.epsilon}")
        if cfg.sampling == "batch" and (cfg.batch_size or 10 * k) < k:
            raise ValueError(f"batch size must be at least k={k}")

        points = oracle.points.points
        n = len(points)
        rng = np.random.default_rng(cfg.rng_seed)
        assignment = np.full(n, UNLABELED, dtype=int)
        residual = np.arange(n)
        reps: list[int] = []
        cache: dict[int, int] = {}
        result = RecoveredClustering(assignment=assignment)
        start_queries = oracle.count
        started = time.perf_counter()

        while len(residual) > cfg.epsilon * n:
            local, sample, draws = self._draw_sample(oracle, residual, k, rng, reps, cache)
            sample_ids = np.unique(sample)
            if cfg.use_hull_expansion:
                sample_ids = greedy_hull_expansion(
                    points, residual, sample_ids, gamma, cfg.mvee_epsilon, cfg.geometry
                )
            learned = tessellation_learn(
                points, residual, sample_ids, gamma, oracle, cfg.mvee_epsilon, cfg.geometry
            )
            assignment[learned.members] = local
            residual = np.setdiff1d(residual, learned.members, assume_unique=True)
            result.tessellations.append(learned)

            stats = RoundStats(
                round=len(result.rounds),
                cluster_local_id=local,
                sample_size=draws,
                recovered=len(learned.members),
                residual=len(residual),
                queries_cumulative=oracle.count - start_queries,
                wall_time_s=time.perf_counter() - started,
                error_so_far=error_fn(assignment) if error_fn is not None else None,
            )
            result.rounds.append(stats)
            self._log(
                "round %d: cluster %d, %d samples, %d recovered, %d left, %d queries",
                stats.round,
                local,
                draws,
                stats.recovered,
                stats.residual,
                stats.queries_cumulative,
            )

        result.queries = oracle.count - start_queries
        bound = rounds_bound(k, n) if n > 1 else math.inf
        if len(result.rounds) > bound:
            logger.warning(
                "[%s] %d rounds exceed the (8k + 6 sqrt(k)) ln n bound of %.1f",
                self.name,
                len(result.rounds),
                bound,
            )
        self._log("done: %d rounds, %d queries, %d unlabeled", len(result.rounds), result.queries, result.unlabeled)
        return result


def recur(
    oracle: SameClusterOracle,
    k: int,
    gamma: float,
    config: RecurConfig | None = None,
    error_fn: ErrorFn | None = None,
) -> RecoveredClustering:
    """Run RECUR once with the given configuration."""
    return Recur(config=config).run(oracle, k, gamma, error_fn=error_fn)
