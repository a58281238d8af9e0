"""Ellipsoidal clusters with a random PSD metric of given condition number, and the spherical case."""

import itertools
import logging
import math
from typing import Literal

import numpy as np

from ..errors import GenerationFailure
from ..geometry import ClusterMetric, PsdMetric
from ..oracle import LatentInstance
from .base import InstanceGenerator, cluster_sizes, finalize, random_rotation, uniform_in_ball

logger = logging.getLogger(__name__)

MAX_DOUBLINGS = 20
PLACEMENT_ATTEMPTS = 200

Layout = Literal["lattice", "packed"]


def _lattice(k: int, d: int) -> np.ndarray:
    """The first k points of the integer grid {0..g-1}^d with g = ceil(k^(1/d))."""
    g = max(2, math.ceil(k ** (1.0 / d) - 1e-9))
    while g**d < k:
        g += 1
    return np.array(list(itertools.islice(itertools.product(range(g), repeat=d), k)), dtype=float)


def _separated(
    center_i: np.ndarray,
    metric_i: np.ndarray,
    inner_i: float,
    center_j: np.ndarray,
    offsets_j: np.ndarray,
    gamma: float,
) -> bool:
    """True iff every point of cluster j is outside sqrt(1+gamma) times cluster i's inner radius."""
    diff = (center_j - center_i) + offsets_j
    forms = np.einsum("ij,jk,ik->i", diff, metric_i, diff)
    return bool(forms.min() > (1.0 + gamma) * inner_i)


def _place_packed(
    offsets: list[np.ndarray],
    metrics: list[np.ndarray],
    inner: list[float],
    gamma: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """Sequential placement of centers in a box whose side doubles on failure.

    Each cluster draws PLACEMENT_ATTEMPTS random candidates and takes the
    feasible one nearest the mean of the centers placed so far, so clusters
    pack against each other instead of spreading over the box.
    """
    k = len(offsets)
    d = offsets[0].shape[1]
    side = 1.0
    for doubling in range(MAX_DOUBLINGS + 1):
        centers: list[np.ndarray] = []
        for j in range(k):
            candidates = rng.uniform(0.0, side, size=(PLACEMENT_ATTEMPTS, d))
            hub = np.mean(centers, axis=0) if centers else np.full(d, side / 2.0)
            candidates = candidates[np.argsort(np.linalg.norm(candidates - hub, axis=1), kind="stable")]
            for candidate in candidates:
                if all(
                    _separated(centers[i], metrics[i], inner[i], candidate, offsets[j], gamma)
                    and _separated(candidate, metrics[j], inner[j], centers[i], offsets[i], gamma)
                    for i in range(len(centers))
                ):
                    centers.append(candidate)
                    break
            else:
                break
        if len(centers) == k:
            logger.debug("packed %d centers in a box of side %g after %d doublings", k, side, doubling)
            return np.array(centers), side
        side *= 2.0
    raise GenerationFailure(
        f"could not place {k} clusters with margin {gamma} after {MAX_DOUBLINGS} box doublings"
    )


def _assemble(
    offsets: list[np.ndarray],
    centers: np.ndarray,
    cluster_metrics: list[ClusterMetric],
    gamma: float,
    rng: np.random.Generator,
    provenance: dict,
) -> LatentInstance:
    points = np.concatenate([c + off for c, off in zip(centers, offsets)])
    labels = np.concatenate([np.full(len(off), j) for j, off in enumerate(offsets)])
    order = rng.permutation(len(points))
    return LatentInstance(
        points=points[order],
        labels=labels[order],
        k=len(offsets),
        gamma=gamma,
        metrics=cluster_metrics,
        provenance=provenance,
    )


def gen_ellipsoidal(
    n: int,
    k: int,
    d: int,
    gamma: float,
    kappa: float,
    seed: int,
    layout: Layout = "lattice",
) -> LatentInstance:
    """Generate k ellipsoidal clusters, each with margin gamma under its own random metric.

    Cluster j has metric W_j = Q_j^T diag(lambda) Q_j with a random rotation Q_j
    and eigenvalues log-spaced from 1 to kappa; its points are uniform in the
    unit W_j-ball around its center. Centers are either a lattice scaled by
    doubling factors or placed by random sequential packing in a doubling box;
    both stop once every cluster's margin is at least gamma.

    Args:
        n: Number of points (>= k).
        k: Number of clusters (>= 2).
        d: Dimension (>= 1).
        gamma: Declared margin (> 0).
        kappa: Condition number of every W_j (>= 1).
        seed: Seed for all randomness.
        layout: "lattice" or "packed".

    Returns:
        A margin-verified LatentInstance.

    Raises:
        GenerationFailure: If no layout passes after 20 doublings.
    """
    if k < 2 or n < k:
        raise ValueError(f"need n >= k >= 2, got n={n}, k={k}")
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if kappa < 1:
        raise ValueError(f"kappa must be at least 1, got {kappa}")
    if layout not in ("lattice", "packed"):
        raise ValueError(f"unknown layout {layout!r}")

    rng = np.random.default_rng(seed)
    eigenvalues = np.logspace(0.0, math.log10(kappa), d)
    metrics, offsets, inner = [], [], []
    for size in cluster_sizes(n, k):
        rotation = random_rotation(rng, d)
        w = rotation.T @ np.diag(eigenvalues) @ rotation
        w = (w + w.T) / 2.0
        offset = uniform_in_ball(rng, size, d) / np.sqrt(eigenvalues) @ rotation
        metrics.append(w)
        offsets.append(offset)
        inner.append(float(np.einsum("ij,jk,ik->i", offset, w, offset).max()))

    provenance = {
        "generator": "ellipsoidal",
        "params": {"n": n, "k": k, "d": d, "gamma": gamma, "kappa": kappa, "layout": layout},
        "seed": seed,
    }

    if layout == "packed":
        centers, side = _place_packed(offsets, metrics, inner, gamma, rng)
        provenance["box_side"] = side
        cluster_metrics = [ClusterMetric(PsdMetric(w), c) for w, c in zip(metrics, centers)]
        return finalize(_assemble(offsets, centers, cluster_metrics, gamma, rng, provenance))

    lattice = _lattice(k, d)[rng.permutation(k)]
    scale = 1.0
    for doubling in range(MAX_DOUBLINGS + 1):
        centers = lattice * scale
        if all(
            _separated(centers[i], metrics[i], inner[i], centers[j], offsets[j], gamma)
            for i in range(k)
            for j in range(k)
            if i != j
        ):
            provenance["scale"] = scale
            cluster_metrics = [ClusterMetric(PsdMetric(w), c) for w, c in zip(metrics, centers)]
            return finalize(_assemble(offsets, centers, cluster_metrics, gamma, rng, provenance))
        scale *= 2.0
    raise GenerationFailure(
        f"lattice scale did not reach margin {gamma} after {MAX_DOUBLINGS} doublings"
    )


def gen_spherical(n: int, k: int, d: int, gamma: float, seed: int) -> LatentInstance:
    """Spherical clusters: W = I and each reference center is the cluster's empirical centroid."""
    if k < 2 or n < k:
        raise ValueError(f"need n >= k >= 2, got n={n}, k={k}")
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")

    rng = np.random.default_rng(seed)
    identity = np.eye(d)
    offsets = [uniform_in_ball(rng, size, d) for size in cluster_sizes(n, k)]
    offsets = [off - off.mean(axis=0) for off in offsets]
    inner = [float(np.einsum("ij,ij->i", off, off).max()) for off in offsets]

    lattice = _lattice(k, d)[rng.permutation(k)]
    scale = 1.0
    for _ in range(MAX_DOUBLINGS + 1):
        centers = lattice * scale
        if all(
            _separated(centers[i], identity, inner[i], centers[j], offsets[j], gamma)
            for i in range(k)
            for j in range(k)
            if i != j
        ):
            provenance = {
                "generator": "spherical",
                "params": {"n": n, "k": k, "d": d, "gamma": gamma},
                "seed": seed,
                "scale": scale,
            }
            cluster_metrics = [ClusterMetric(PsdMetric(identity), c) for c in centers]
            return finalize(_assemble(offsets, centers, cluster_metrics, gamma, rng, provenance))
        scale *= 2.0
    raise GenerationFailure(f"lattice scale did not reach margin {gamma} after {MAX_DOUBLINGS} doublings")


class EllipsoidalGenerator(InstanceGenerator):
    """Generator for the ellipsoidal experiment instances."""

    def __init__(self):
        super().__init__(
            name="ellipsoidal",
            description=(
                "k equal-size ellipsoidal clusters, each with margin gamma w.r.t. a random "
                "center and a random PSD metric of condition number kappa."
            ),
            input_schema={
                "type": "object",
                "properties": {
                    "n": {"type": "integer", "description": "Number of points."},
                    "k": {"type": "integer", "description": "Number of clusters."},
                    "d": {"type": "integer", "description": "Dimension."},
                    "gamma": {"type": "number", "description": "Declared margin.", "default": 1.0},
                    "kappa": {"type": "number", "description": "Condition number of each metric.", "default": 100.0},
                    "layout": {
                        "type": "string",
                        "enum": ["packed", "lattice"],
                        "description": "Center layout.",
                        "default": "packed",
                    },
                },
                "required": ["n", "k", "d"],
            },
        )

    def generate(self, n, k, d, gamma=1.0, kappa=100.0, layout="packed", seed=0) -> LatentInstance:
        return gen_ellipsoidal(n, k, d, gamma, kappa, seed, layout=layout)


class SphericalGenerator(InstanceGenerator):
    """Generator for the spherical (identity metric, centroid center) special case."""

    def __init__(self):
        super().__init__(
            name="spherical",
            description="k unit-ball clusters on a scaled lattice; W = I and centers are the centroids.",
            input_schema={
                "type": "object",
                "properties": {
                    "n": {"type": "integer", "description": "Number of points."},
                    "k": {"type": "integer", "description": "Number of clusters."},
                    "d": {"type": "integer", "description": "Dimension."},
                    "gamma": {"type": "number", "description": "Declared margin.", "default": 1.0},
                },
                "required": ["n", "k", "d"],
            },
        )

    def generate(self, n, k, d, gamma=1.0, seed=0) -> LatentInstance:
        return gen_spherical(n, k, d, gamma, seed)
