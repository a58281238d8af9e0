"""Monochromatic tessellation of a rounding ellipsoid and the cell-by-cell learning step.

Inside the ellipsoid every axis is cut into a base interval [-beta_i, beta_i]
and b geometrically growing intervals on each side. Under a margin gamma every
resulting cell holds points of a single latent cluster, so one query per cell
labels every point in it.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import NotInEllipsoid
from .geometry import Ellipsoid, GeometryConfig, RoundingCertificate, mvee
from .oracle import SameClusterOracle

logger = logging.getLogger(__name__)

TESSELLATION_C = math.sqrt(5.0)
# Above this margin the construction is the one for gamma = 1/2.
MAX_EFFECTIVE_GAMMA = 0.5


@dataclass(frozen=True)
class TessParams:
    """Tessellation constants for one ellipsoid."""

    gamma_eff: float
    phi: float
    alpha: float
    b: int
    beta: np.ndarray
    c: float = TESSELLATION_C

    @property
    def rank(self) -> int:
        return len(self.beta)

    @property
    def max_cells(self) -> int:
        """Upper bound (2(b+1)+1)^r on the number of nonempty cells."""
        return (2 * (self.b + 1) + 1) ** self.rank

    def to_dict(self) -> dict[str, Any]:
        return {
            "gamma_eff": self.gamma_eff,
            "phi": self.phi,
            "alpha": self.alpha,
            "b": self.b,
            "beta": self.beta.tolist(),
            "c": self.c,
        }


def tess_params(
    rank: int,
    gamma: float,
    semiaxes: Sequence[float] | np.ndarray,
    phi: float = 1.0,
) -> TessParams:
    """Compute the tessellation constants for a rank-r ellipsoid.

    Args:
        rank: Ellipsoid rank r >= 1.
        gamma: Margin fed to the algorithm; values above 1/2 are clamped.
        semiaxes: The r semiaxis lengths L_i.
        phi: Rounding stretch of the ellipsoid (1 + epsilon for Khachiyan).

    Returns:
        alpha = g / (c sqrt(2) phi r), beta_i = g / (c sqrt(2r)) * L_i / (phi r),
        b = max(0, ceil(log_{1+alpha}(c phi r sqrt(2r) / g))) with g = min(gamma, 1/2).
    """
    semiaxes = np.asarray(semiaxes, dtype=float).reshape(-1)
    if rank < 1 or len(semiaxes) != rank:
        raise ValueError(f"need rank >= 1 and {rank} semiaxes, got {len(semiaxes)}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if np.any(semiaxes <= 0):
        raise ValueError("semiaxes must be positive")
    if phi < 1:
        raise ValueError(f"phi must be at least 1, got {phi}")

    g = min(gamma, MAX_EFFECTIVE_GAMMA)
    c = TESSELLATION_C
    alpha = g / (c * math.sqrt(2.0) * phi * rank)
    beta = g / (c * math.sqrt(2.0 * rank)) * semiaxes / (phi * rank)
    ratio = c * phi * rank * math.sqrt(2.0 * rank) / g
    b = max(0, math.ceil(math.log(ratio) / math.log1p(alpha))) if ratio > 1 else 0
    return TessParams(gamma_eff=g, phi=phi, alpha=alpha, b=b, beta=beta)


def cell_keys(ellipsoid: Ellipsoid, params: TessParams, points: np.ndarray) -> np.ndarray:
    """Signed geometric level of every point along every ellipsoid axis, shape (m, r).

    Level 0 means |t_i| <= beta_i; level +-j means
    beta_i (1+alpha)^(j-1) < |t_i| <= beta_i (1+alpha)^j. Levels are clamped to +-b.
    Points are assumed to lie in the ellipsoid.
    """
    t = ellipsoid.coordinates(points)
    ratio = np.abs(t) / params.beta
    levels = np.zeros(t.shape, dtype=np.int64)
    outer = ratio > 1.0
    if params.b > 0 and np.any(outer):
        raw = np.ceil(np.log(ratio[outer]) / math.log1p(params.alpha))
        levels[outer] = np.clip(raw, 1, params.b).astype(np.int64)
    return np.sign(t).astype(np.int64) * levels


def cell_key(
    ellipsoid: Ellipsoid,
    params: TessParams,
    point: np.ndarray,
    config: GeometryConfig | None = None,
) -> tuple[int, ...]:
    """The cell key of a single point of the ellipsoid.

    Raises:
        NotInEllipsoid: If ``point`` is not in the ellipsoid.
    """
    cfg = config or GeometryConfig()
    if ellipsoid.rank < 1:
        raise ValueError("cell keys need an ellipsoid of rank >= 1")
    point = np.asarray(point, dtype=float).reshape(1, -1)
    if not ellipsoid.contains(point, cfg.membership_tolerance, cfg.rank_tolerance)[0]:
        raise NotInEllipsoid(f"point {point[0].tolist()} is outside the ellipsoid")
    return tuple(int(level) for level in cell_keys(ellipsoid, params, point)[0])


@dataclass
class Cell:
    """A nonempty cell: its key, member ids, queried representative and answer."""

    key: tuple[int, ...]
    ids: np.ndarray
    representative: int | None
    answer: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "key": list(self.key),
            "size": int(len(self.ids)),
            "representative": self.representative,
            "answer": self.answer,
        }


@dataclass
class TessellationResult:
    """Outcome of one tessellation_learn call."""

    members: np.ndarray  # recovered ids, sorted
    anchor: int  # the S_C point queried cells are checked against
    ellipsoid: Ellipsoid
    certificate: RoundingCertificate
    params: TessParams | None  # None for a rank-0 ellipsoid
    cells: list[Cell] = field(default_factory=list)
    queries: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "anchor": self.anchor,
            "rank": self.ellipsoid.rank,
            "center": self.ellipsoid.center.tolist(),
            "semiaxes": self.ellipsoid.semiaxes.tolist(),
            "max_scaled_distance": self.certificate.max_scaled_distance,
            "params": self.params.to_dict() if self.params is not None else None,
            "queries": self.queries,
            "recovered": int(len(self.members)),
            "cells": [cell.to_dict() for cell in self.cells],
        }

    def to_json(self, path: str | Path) -> Path:
        """Dump the tessellation (cells, sizes, representatives, answers, params)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path


def tessellation_learn(
    points: np.ndarray,
    residual_ids: Sequence[int] | np.ndarray,
    sample_ids: Sequence[int] | np.ndarray,
    gamma: float,
    oracle: SameClusterOracle,
    mvee_epsilon: float | None = None,
    config: GeometryConfig | None = None,
) -> TessellationResult:
    """Learn C ∩ E for the cluster C containing the sample S_C.

    Computes the MVEE E of S_C inside its span, maps every residual point of E
    to its cell and queries the lowest-id S_C point against the lowest-id point
    of every nonempty cell holding no S_C point, in sorted key order. Cells
    holding an S_C point are accepted without a query. Accepted cells are
    returned together with S_C.

    Args:
        points: All point coordinates, shape (n, d).
        residual_ids: Ids still unassigned; must include ``sample_ids``.
        sample_ids: The sample S_C, all from one latent cluster.
        gamma: Margin fed to the algorithm.
        oracle: Oracle answering the cell queries.
        mvee_epsilon: Khachiyan rounding slack; the stretch 1 + epsilon enters the constants.
        config: Numerical tolerances.

    Returns:
        The recovered ids and the tessellation that produced them.
    """
    cfg = config or GeometryConfig()
    sample = np.unique(np.asarray(sample_ids, dtype=int))
    if len(sample) == 0:
        raise ValueError("sample_ids must be nonempty")
    residual = np.unique(np.asarray(residual_ids, dtype=int))
    anchor = int(sample[0])

    ellipsoid, certificate = mvee(points[sample], mvee_epsilon, cfg)
    inside = ellipsoid.contains(points[residual], cfg.membership_tolerance, cfg.rank_tolerance)
    inside[np.isin(residual, sample)] = True
    inside_ids = residual[inside]

    if ellipsoid.rank == 0:
        # A single point: one cell with the empty key.
        params = None
        unique_keys = np.zeros((1, 0), dtype=np.int64)
        inverse = np.zeros(len(inside_ids), dtype=np.int64)
    else:
        params = tess_params(ellipsoid.rank, gamma, ellipsoid.semiaxes, certificate.stretch)
        keys = cell_keys(ellipsoid, params, points[inside_ids])
        unique_keys, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(np.bincount(inverse, minlength=len(unique_keys)))[:-1]

    cells: list[Cell] = []
    accepted = [sample]
    queries = 0
    for key, ids in zip(unique_keys, np.split(inside_ids[order], bounds)):
        # Cells are monochromatic, so one S_C point settles the whole cell.
        if np.isin(ids, sample).any():
            representative, answer = None, 1
        else:
            representative = int(ids[0])
            answer = oracle.query(anchor, representative)
            queries += 1
        cells.append(Cell(tuple(int(level) for level in key), ids, representative, answer))
        if answer == 1:
            accepted.append(ids)

    members = np.unique(np.concatenate(accepted))
    logger.debug(
        "tessellation: rank %d, %d points in ellipsoid, %d cells, %d queries, %d recovered",
        ellipsoid.rank,
        len(inside_ids),
        len(cells),
        queries,
        len(members),
    )
    return TessellationResult(
        members=members,
        anchor=anchor,
        ellipsoid=ellipsoid,
        certificate=certificate,
        params=params,
        cells=cells,
        queries=queries,
    )


def audit_cells(result: TessellationResult, labels: np.ndarray) -> list[Cell]:
    """Cells whose points carry more than one latent label."""
    labels = np.asarray(labels)
    return [cell for cell in result.cells if len(np.unique(labels[cell.ids])) > 1]
