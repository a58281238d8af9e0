"""Simulated same-cluster-query oracle with exact query accounting."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InvalidId, MarginMismatch
from .geometry import ClusterMetric, PointSet, has_margin, margin_of_clustering
from .utils.csv_util import TRANSCRIPT_COLUMNS, write_rows

logger = logging.getLogger(__name__)


@dataclass
class LatentInstance:
    """Ground truth for a run: points, latent labels, declared margin and optional metrics."""

    points: PointSet
    labels: np.ndarray
    k: int
    gamma: float
    metrics: list[ClusterMetric] | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.points, PointSet):
            self.points = PointSet(self.points)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.shape != (self.points.n,):
            raise ValueError(f"expected {self.points.n} labels, got shape {self.labels.shape}")
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        present = np.unique(self.labels)
        if present.min() < 0 or present.max() >= self.k or len(present) != self.k:
            raise ValueError(f"labels must cover every cluster index 0..{self.k - 1}")
        if self.metrics is not None:
            if len(self.metrics) != self.k:
                raise ValueError(f"expected {self.k} metrics, got {len(self.metrics)}")
            for metric in self.metrics:
                if metric.metric.dim != self.d:
                    raise ValueError(f"metric dimension {metric.metric.dim} != point dimension {self.d}")

    @property
    def n(self) -> int:
        return self.points.n

    @property
    def d(self) -> int:
        return self.points.d

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def margins(self) -> np.ndarray | None:
        """Per-cluster margin values, or None when the instance carries no metrics."""
        if self.metrics is None:
            return None
        return margin_of_clustering(self.points.points, self.labels, self.metrics)

    def verify_margins(self) -> np.ndarray | None:
        """Recompute the margins and check them against the declared gamma.

        Raises:
            MarginMismatch: If any cluster's margin falls below ``gamma``.
        """
        values = self.margins()
        if values is not None and not has_margin(values, self.gamma):
            worst = int(np.argmin(values))
            raise MarginMismatch(
                f"cluster {worst} has margin {values[worst]:.6g} below declared gamma {self.gamma:.6g}"
            )
        return values


class QueryLedger:
    """Counts oracle queries and optionally keeps the (i, j, answer) transcript."""

    def __init__(self, record_transcript: bool = False):
        self.count = 0
        self.transcript: list[tuple[int, int, int]] | None = [] if record_transcript else None

    def record(self, i: int, j: int, answer: int) -> None:
        self.count += 1
        if self.transcript is not None:
            self.transcript.append((i, j, answer))

    def to_csv(self, path: str | Path) -> Path:
        """Write the transcript as CSV with columns seq, i, j, answer."""
        if self.transcript is None:
            raise ValueError("ledger was created without a transcript")
        rows = (
            {"seq": seq, "i": i, "j": j, "answer": answer}
            for seq, (i, j, answer) in enumerate(self.transcript)
        )
        return write_rows(path, TRANSCRIPT_COLUMNS, rows)


def _check_id(instance: LatentInstance, point_id: int) -> int:
    try:
        index = int(point_id)
    except (TypeError, ValueError) as e:
        raise InvalidId(f"point id {point_id!r} is not an integer") from e
    if index != point_id or not 0 <= index < instance.n:
        raise InvalidId(f"point id {point_id!r} outside 0..{instance.n - 1}")
    return index


def scq(instance: LatentInstance, ledger: QueryLedger, i: int, j: int) -> int:
    """Answer a same-cluster query: +1 iff points i and j share a latent label.

    Every call is counted, including i == j.
    """
    i = _check_id(instance, i)
    j = _check_id(instance, j)
    answer = 1 if instance.labels[i] == instance.labels[j] else -1
    ledger.record(i, j, answer)
    return answer


class SameClusterOracle:
    """The only view of an instance an algorithm gets: point coordinates and scq."""

    def __init__(self, instance: LatentInstance, ledger: QueryLedger | None = None):
        self._instance = instance
        self.ledger = ledger or QueryLedger()

    @property
    def points(self) -> PointSet:
        return self._instance.points

    @property
    def count(self) -> int:
        return self.ledger.count

    def query(self, i: int, j: int) -> int:
        return scq(self._instance, self.ledger, i, j)


def label_with_representatives(
    oracle: SameClusterOracle,
    ids: Sequence[int] | np.ndarray,
    reps: list[int],
    cache: dict[int, int] | None = None,
) -> np.ndarray:
    """Learn a local cluster label for each id by querying known representatives.

    Each id is queried against ``reps`` in discovery order until an answer is
    +1; if every answer is -1 the id becomes a new representative. Local label
    ``j`` means "same cluster as ``reps[j]``". Ids already in ``cache`` (from
    earlier calls of the same run) are labeled without querying.

    Args:
        oracle: Oracle to query.
        ids: Point ids to label, duplicates allowed.
        reps: Representatives discovered so far; extended in place.
        cache: Known local labels by point id; extended in place.

    Returns:
        Array of local labels aligned with ``ids``.
    """
    known = cache if cache is not None else {}
    for local, rep in enumerate(reps):
        known.setdefault(int(rep), local)

    labels = np.empty(len(ids), dtype=int)
    for position, point_id in enumerate(ids):
        point_id = int(point_id)
        label = known.get(point_id)
        if label is None:
            for local, rep in enumerate(reps):
                if oracle.query(rep, point_id) == 1:
                    label = local
                    break
            else:
                label = len(reps)
                reps.append(point_id)
                logger.debug("new representative %d for local cluster %d", point_id, label)
            known[point_id] = label
        labels[position] = label
    return labels
