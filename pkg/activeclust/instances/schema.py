"""Instance JSON schema and save/load."""

from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ActiveClusteringError, ParseError
from ..geometry import ClusterMetric, PsdMetric
from ..oracle import LatentInstance


class MetricModel(BaseModel):
    """A cluster's latent metric W (dense, row-major) and reference center c."""

    model_config = ConfigDict(extra="forbid")

    W: list[list[float]]
    c: list[float]


class InstanceDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1)
    d: int = Field(ge=1)
    k: int = Field(ge=2)
    gamma: float = Field(gt=0)
    points: list[list[float]]
    labels: list[int]
    metrics: list[MetricModel] | None = None
    provenance: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_shapes(self) -> "InstanceDocument":
        if len(self.points) != self.n or any(len(row) != self.d for row in self.points):
            raise ValueError(f"points must be an {self.n} x {self.d} array")
        if len(self.labels) != self.n:
            raise ValueError(f"expected {self.n} labels, got {len(self.labels)}")
        if self.metrics is not None:
            if len(self.metrics) != self.k:
                raise ValueError(f"expected {self.k} metrics, got {len(self.metrics)}")
            for metric in self.metrics:
                if len(metric.W) != self.d or any(len(row) != self.d for row in metric.W):
                    raise ValueError(f"every W must be {self.d} x {self.d}")
                if len(metric.c) != self.d:
                    raise ValueError(f"every c must have {self.d} entries")
        return self

    @classmethod
    def from_instance(cls, instance: LatentInstance) -> "InstanceDocument":
        metrics = None
        if instance.metrics is not None:
            metrics = [
                MetricModel(W=m.metric.matrix.tolist(), c=m.center.tolist()) for m in instance.metrics
            ]
        return cls(
            n=instance.n,
            d=instance.d,
            k=instance.k,
            gamma=float(instance.gamma),
            points=instance.points.points.tolist(),
            labels=instance.labels.tolist(),
            metrics=metrics,
            provenance=instance.provenance,
        )

    def to_instance(self) -> LatentInstance:
        metrics = None
        if self.metrics is not None:
            metrics = [ClusterMetric(PsdMetric(np.array(m.W)), np.array(m.c)) for m in self.metrics]
        return LatentInstance(
            points=np.array(self.points, dtype=float),
            labels=np.array(self.labels, dtype=int),
            k=self.k,
            gamma=self.gamma,
            metrics=metrics,
            provenance=dict(self.provenance),
        )


def dump_instance(instance: LatentInstance) -> str:
    """Canonical JSON text of an instance."""
    return InstanceDocument.from_instance(instance).model_dump_json()


def save_instance(instance: LatentInstance, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_instance(instance), encoding="utf-8")
    return path


def load_instance(path: str | Path, verify: bool = True) -> LatentInstance:
    """Load an instance file and, if it carries metrics, re-verify its margins.

    Raises:
        FileNotFoundError: If ``path`` does not exist.
        ParseError: If the file is not a valid instance document.
        MarginMismatch: If the verified margins fall below the declared gamma.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"instance file not found: {path}")
    try:
        document = InstanceDocument.model_validate_json(path.read_text(encoding="utf-8"))
        instance = document.to_instance()
    except ValidationError as e:
        raise ParseError(f"{path}: {e.error_count()} validation error(s)\n{e}") from e
    except (ValueError, ActiveClusteringError) as e:
        raise ParseError(f"{path}: {e}") from e
    if verify:
        instance.verify_margins()
    return instance
