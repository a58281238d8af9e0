"""Hard instances used by the query lower bounds: a sphere packing and random hypercube points."""

import logging
import math

import numpy as np

from ..errors import GenerationFailure, PackingTooSmall
from ..geometry import ClusterMetric, PsdMetric, has_margin, margin_of_clustering
from ..oracle import LatentInstance
from .base import InstanceGenerator, finalize

logger = logging.getLogger(__name__)

CANDIDATES_PER_DIM = 200
MAX_RETRIES = 100


def packing_distance(gamma: float) -> float:
    """Minimum pairwise distance sqrt(8 gamma / (1 + gamma)) of the sphere packing."""
    return math.sqrt(8.0 * gamma / (1.0 + gamma))


def greedy_orthant_packing(d: int, distance: float, rng: np.random.Generator) -> np.ndarray:
    """First-fit packing on the positive-orthant unit sphere.

    Candidates are the basis vectors followed by random orthant points; a
    candidate is kept if it is at least ``distance`` from every kept point.
    """
    random_points = np.abs(rng.standard_normal((CANDIDATES_PER_DIM * d, d)))
    random_points /= np.linalg.norm(random_points, axis=1, keepdims=True)
    candidates = np.concatenate([np.eye(d), random_points])

    kept = [candidates[0]]
    for candidate in candidates[1:]:
        if np.linalg.norm(np.asarray(kept) - candidate, axis=1).min() >= distance:
            kept.append(candidate)
    return np.asarray(kept)


def gen_lb_sphere(d: int, gamma: float, seed: int) -> tuple[LatentInstance, int]:
    """Packing instance: X = {+sqrt(z), -sqrt(z)} over a packing z on the orthant sphere.

    One packing point z* is hidden: C = X minus {+sqrt(z*), -sqrt(z*)} with
    W = (1+gamma) diag(z*) and c = 0, and the two hidden points are singletons.

    Returns:
        The instance and the id of +sqrt(z*).

    Raises:
        PackingTooSmall: If fewer than two packing points fit.
    """
    if d < 2:
        raise ValueError(f"d must be at least 2, got {d}")
    if not 0 < gamma < 1 / 7:
        raise ValueError(f"gamma must lie in (0, 1/7), got {gamma}")

    rng = np.random.default_rng(seed)
    packing = greedy_orthant_packing(d, packing_distance(gamma), rng)
    m = len(packing)
    if m < 2:
        raise PackingTooSmall(f"packing at distance {packing_distance(gamma):.4f} holds {m} point(s) in d={d}")

    hidden = int(rng.integers(m))
    roots = np.sqrt(packing)
    points = np.concatenate([roots, -roots])
    labels = np.zeros(2 * m, dtype=int)
    labels[hidden] = 1
    labels[m + hidden] = 2

    order = rng.permutation(2 * m)
    position = np.empty(2 * m, dtype=int)
    position[order] = np.arange(2 * m)

    z_star = packing[hidden]
    metrics = [
        ClusterMetric(PsdMetric((1.0 + gamma) * np.diag(z_star)), np.zeros(d)),
        ClusterMetric(PsdMetric.identity(d), roots[hidden]),
        ClusterMetric(PsdMetric.identity(d), -roots[hidden]),
    ]
    hidden_id = int(position[hidden])
    instance = LatentInstance(
        points=points[order],
        labels=labels[order],
        k=3,
        gamma=gamma,
        metrics=metrics,
        provenance={
            "generator": "lb_sphere",
            "params": {"d": d, "gamma": gamma},
            "seed": seed,
            "packing_size": m,
            "hidden_ids": [hidden_id, int(position[m + hidden])],
        },
    )
    return finalize(instance), hidden_id


def gen_lb_hypercube(d: int, gamma: float, n: int, seed: int) -> tuple[LatentInstance, int]:
    """Random hypercube instance: n Bernoulli(1/(2(1+gamma))) vectors, the last one hidden.

    C = the first n-1 points with W = diag(x*) and c = 0; C' = {x*}. Samples are
    redrawn until all points are distinct and both clusters have margin gamma.

    Returns:
        The instance and the id of x* (always n - 1).

    Raises:
        GenerationFailure: After 100 rejected draws.
    """
    if d < 8:
        raise ValueError(f"d must be at least 8, got {d}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")

    rng = np.random.default_rng(seed)
    p = 1.0 / (2.0 * (1.0 + gamma))
    labels = np.zeros(n, dtype=int)
    labels[-1] = 1
    for retry in range(MAX_RETRIES):
        points = (rng.random((n, d)) < p).astype(float)
        x_star = points[-1]
        if len(np.unique(points, axis=0)) < n:
            continue
        metrics = [
            ClusterMetric(PsdMetric(np.diag(x_star)), np.zeros(d)),
            ClusterMetric(PsdMetric.identity(d), x_star),
        ]
        if not has_margin(margin_of_clustering(points, labels, metrics), gamma):
            continue
        logger.debug("hypercube instance accepted after %d retries", retry)
        instance = LatentInstance(
            points=points,
            labels=labels,
            k=2,
            gamma=gamma,
            metrics=metrics,
            provenance={
                "generator": "lb_hypercube",
                "params": {"d": d, "gamma": gamma, "n": n},
                "seed": seed,
                "retries": retry,
                "hidden_ids": [n - 1],
            },
        )
        return finalize(instance), n - 1
    raise GenerationFailure(
        f"no valid hypercube instance after {MAX_RETRIES} draws (d={d}, gamma={gamma}, n={n}); "
        f"the construction is meant for d >= 48(1+gamma)^2 = {48 * (1 + gamma) ** 2:.1f}"
    )


class LowerBoundSphereGenerator(InstanceGenerator):
    """Generator for the sphere-packing lower-bound instance."""

    def __init__(self):
        super().__init__(
            name="lb-sphere",
            description="Signed square roots of an orthant sphere packing with one hidden pair.",
            input_schema={
                "type": "object",
                "properties": {
                    "d": {"type": "integer", "description": "Dimension (>= 2)."},
                    "gamma": {"type": "number", "description": "Margin in (0, 1/7).", "default": 0.1},
                },
                "required": ["d"],
            },
        )

    def generate(self, d, gamma=0.1, seed=0) -> LatentInstance:
        instance, _ = gen_lb_sphere(d, gamma, seed)
        return instance


class LowerBoundHypercubeGenerator(InstanceGenerator):
    """Generator for the random-hypercube lower-bound instance."""

    def __init__(self):
        super().__init__(
            name="lb-hypercube",
            description="Bernoulli hypercube points; the last point is its own cluster.",
            input_schema={
                "type": "object",
                "properties": {
                    "d": {"type": "integer", "description": "Dimension (>= 8)."},
                    "gamma": {"type": "number", "description": "Margin.", "default": 0.1},
                    "n": {"type": "integer", "description": "Number of points.", "default": 8},
                },
                "required": ["d"],
            },
        )

    def generate(self, d, gamma=0.1, n=8, seed=0) -> LatentInstance:
        instance, _ = gen_lb_hypercube(d, gamma, n, seed)
        return instance
