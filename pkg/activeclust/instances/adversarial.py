"""Two-cluster instance on which centroid-and-radius search misclassifies the minority cluster."""

import math

import numpy as np

from ..geometry import ClusterMetric, PsdMetric
from ..oracle import LatentInstance
from .base import InstanceGenerator, finalize

MAX_GAMMA = 0.1
SHARED_METRIC = np.diag([0.25, 1.0])


def gen_adversarial_kmeans(
    n: int,
    p: float,
    gamma: float,
    seed: int,
    perturb: float = 0.0,
) -> LatentInstance:
    """Build the adversarial instance for the centroid-based baseline.

    C1 holds round(n(1+p)/2) points split between (1, 0) and (-1, 0); C2 holds
    the rest at (0, sqrt(1+gamma)/2). Both clusters use W = diag(0.25, 1), with
    centers (0, 0) and (0, sqrt(1+gamma)/2), so C1 has margin exactly gamma.

    Args:
        n: Number of points (>= 4).
        p: Majority parameter in (0, 1).
        gamma: Margin, in (0, 0.1].
        seed: Seed for the id shuffle and the perturbation.
        perturb: Optional radius in [0, 0.5]; C1 points move inward along x and
            C2 points move away from C1's center by up to this amount.
    """
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not 0 < gamma <= MAX_GAMMA:
        raise ValueError(f"gamma must lie in (0, {MAX_GAMMA}], got {gamma}")
    if not 0 <= perturb <= 0.5:
        raise ValueError(f"perturb must lie in [0, 0.5], got {perturb}")

    rng = np.random.default_rng(seed)
    n1 = min(n - 1, max(2, math.floor(n * (1 + p) / 2 + 0.5)))
    n2 = n - n1
    height = math.sqrt(1 + gamma) / 2

    first = np.zeros((n1, 2))
    first[:, 0] = np.where(np.arange(n1) < (n1 + 1) // 2, 1.0, -1.0)
    second = np.zeros((n2, 2))
    second[:, 1] = height
    if perturb > 0:
        first[:, 0] *= 1.0 - perturb * rng.random(n1)
        second[:, 1] += perturb * rng.random(n2)

    points = np.concatenate([first, second])
    labels = np.concatenate([np.zeros(n1, dtype=int), np.ones(n2, dtype=int)])
    order = rng.permutation(n)
    metrics = [
        ClusterMetric(PsdMetric(SHARED_METRIC), [0.0, 0.0]),
        ClusterMetric(PsdMetric(SHARED_METRIC), [0.0, height]),
    ]
    instance = LatentInstance(
        points=points[order],
        labels=labels[order],
        k=2,
        gamma=gamma,
        metrics=metrics,
        provenance={
            "generator": "adversarial",
            "params": {"n": n, "p": p, "gamma": gamma, "perturb": perturb},
            "seed": seed,
        },
    )
    return finalize(instance)


class AdversarialGenerator(InstanceGenerator):
    """Generator for the adversarial two-cluster instance."""

    def __init__(self):
        super().__init__(
            name="adversarial",
            description=(
                "Majority cluster split across (+-1, 0) and a minority cluster at "
                "(0, sqrt(1+gamma)/2); the majority cluster's margin is exactly gamma."
            ),
            input_schema={
                "type": "object",
                "properties": {
                    "n": {"type": "integer", "description": "Number of points."},
                    "p": {"type": "number", "description": "Majority parameter in (0, 1).", "default": 0.5},
                    "gamma": {"type": "number", "description": "Margin in (0, 0.1].", "default": 0.05},
                    "perturb": {"type": "number", "description": "Perturbation radius.", "default": 0.0},
                },
                "required": ["n"],
            },
        )

    def generate(self, n, p=0.5, gamma=0.05, perturb=0.0, seed=0) -> LatentInstance:
        return gen_adversarial_kmeans(n, p, gamma, seed, perturb=perturb)
