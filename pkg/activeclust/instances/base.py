"""Base definitions for margin-verified instance generators."""

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import GenerationFailure
from ..geometry import has_margin
from ..oracle import LatentInstance


@dataclass
class InstanceGenerator:
    """Base class for all instance generators.

    ``input_schema`` describes the generator's parameters as a JSON-schema
    object; the CLI builds its ``gen`` flags from it.
    """

    name: str
    description: str
    input_schema: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "input_schema": self.input_schema,
        }

    def generate(self, **params) -> LatentInstance:
        """Build an instance with the given parameters."""
        raise NotImplementedError("InstanceGenerator subclasses must implement generate")


def uniform_in_ball(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """``count`` points uniformly distributed in the closed Euclidean unit ball of R^d."""
    directions = rng.standard_normal((count, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = rng.random((count, 1)) ** (1.0 / d)
    return directions / norms * radii


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """A random orthogonal matrix (QR of a Gaussian matrix with sign correction)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def cluster_sizes(n: int, k: int) -> list[int]:
    """k sizes of n // k each, with the remainder added to the last cluster."""
    sizes = [n // k] * k
    sizes[-1] += n - sum(sizes)
    return sizes


def finalize(instance: LatentInstance) -> LatentInstance:
    """Run the mandatory post-hoc margin verification and record the result."""
    values = instance.margins()
    if values is not None:
        if not has_margin(values, instance.gamma):
            raise GenerationFailure(
                f"verified margins {np.round(values, 6).tolist()} fall below gamma={instance.gamma}"
            )
        instance.provenance["margin_verified"] = True
    return instance
