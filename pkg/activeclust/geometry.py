"""Numerical geometry: spans, minimum-volume enclosing ellipsoids, metrics and hulls."""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from .errors import EmptyCluster, LpFailure, NonConvergence, PsdViolation

logger = logging.getLogger(__name__)

# Relative slack used whenever a verified margin is compared with a declared one.
MARGIN_SLACK = 1e-9
# NNLS hull distances above this multiple of the LP tolerance are rejected without an LP.
NNLS_REJECT_FACTOR = 100.0


@dataclass
class GeometryConfig:
    """Numerical tolerances shared by the geometry routines."""

    mvee_epsilon: float = 1e-3  # Khachiyan rounding slack, Phi = 1 + epsilon
    iteration_factor: float = 100.0  # cap = factor * r^2 * ln|S| / epsilon
    rank_tolerance: float = 1e-9  # relative to the largest point norm
    membership_tolerance: float = 1e-7  # slack on the ellipsoid quadratic form
    lp_tolerance: float = 1e-8  # hull feasibility tolerance
    qhull_max_rank: int = 5  # above this rank hull tests use NNLS screening and the LP


def as_points(points: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    """Return ``points`` as a finite float array of shape (m, d) with m, d >= 1."""
    array = np.asarray(points, dtype=float)
    if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
        raise ValueError(f"points must have shape (m, d) with m, d >= 1, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("points must have finite coordinates")
    return array


@dataclass(frozen=True)
class PointSet:
    """The input set X: n points in R^d whose ids are their row indices."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", as_points(self.points))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    def __len__(self) -> int:
        return self.n


def _clamp_forms(forms: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Clamp tiny negative quadratic forms to zero, reject clearly negative ones."""
    floor = -1e-12 * np.maximum(1.0, scales)
    if np.any(forms < floor):
        worst = float(forms.min())
        raise PsdViolation(f"quadratic form evaluated to {worst:.3e}; matrix is not PSD")
    return np.maximum(forms, 0.0)


@dataclass(frozen=True)
class PsdMetric:
    """A symmetric positive semidefinite matrix W inducing the seminorm ||x||_W."""

    matrix: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"metric must be a square matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("metric must have finite entries")
        magnitude = max(float(np.abs(w).max()), np.finfo(float).tiny)
        if np.abs(w - w.T).max() > 1e-9 * magnitude:
            raise PsdViolation("metric is not symmetric")
        eigenvalues = linalg.eigvalsh(w)
        if eigenvalues[0] < -1e-9 * max(eigenvalues[-1], 0.0):
            raise PsdViolation(
                f"metric has eigenvalue {eigenvalues[0]:.3e} below the PSD tolerance"
            )
        object.__setattr__(self, "matrix", w)

    @classmethod
    def identity(cls, d: int, scale: float = 1.0) -> "PsdMetric":
        return cls(scale * np.eye(d))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def condition_number(self) -> float:
        eigenvalues = linalg.eigvalsh(self.matrix)
        if eigenvalues[0] <= 0:
            return math.inf
        return float(eigenvalues[-1] / eigenvalues[0])

    def sq_distances(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        """Squared seminorm distances d_W(x, center)^2 for every row x of ``points``."""
        diff = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
        if diff.shape[1] != self.dim:
            raise ValueError(f"points have dimension {diff.shape[1]}, metric has {self.dim}")
        forms = np.einsum("ij,jk,ik->i", diff, self.matrix, diff)
        scales = np.abs(self.matrix).max() * np.einsum("ij,ij->i", diff, diff)
        return _clamp_forms(forms, scales)


@dataclass(frozen=True)
class ClusterMetric:
    """The latent (W, c) pair under which one cluster has its margin."""

    metric: PsdMetric
    center: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if center.shape[0] != self.metric.dim:
            raise ValueError(
                f"center has dimension {center.shape[0]}, metric has {self.metric.dim}"
            )
        object.__setattr__(self, "center", center)


def metric_distance(metric: PsdMetric, x: np.ndarray, y: np.ndarray) -> float:
    """Return d_W(x, y) = sqrt((x - y)^T W (x - y))."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(math.sqrt(metric.sq_distances(x[None, :], y)[0]))


@dataclass(frozen=True)
class SpanBasis:
    """Affine span of a point set: origin plus an orthonormal basis of rank r."""

    origin: np.ndarray
    basis: np.ndarray  # (d, r), orthonormal columns

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def coordinates(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.origin) @ self.basis

    def residuals(self, points: np.ndarray) -> np.ndarray:
        """Euclidean norm of the component of each point orthogonal to the span."""
        diff = np.atleast_2d(points) - self.origin
        off = diff - (diff @ self.basis) @ self.basis.T
        return np.linalg.norm(off, axis=1)


def orthonormal_span(points: np.ndarray, tolerance: float = 1e-9) -> SpanBasis:
    """Compute an orthonormal basis for the affine span of ``points``.

    The origin is the first point. Rank is decided by a pivoted (rank-revealing)
    QR of the centered points: a Gram-Schmidt residual below
    ``tolerance * max point norm`` counts as zero.

    Args:
        points: Array of shape (m, d).
        tolerance: Relative rank tolerance.

    Returns:
        The span, with ``rank`` 0 for a single point or coincident points.
    """
    pts = as_points(points)
    origin = pts[0].copy()
    d = pts.shape[1]
    centered = pts[1:] - origin
    scale = float(np.linalg.norm(pts, axis=1).max())
    if centered.shape[0] == 0 or scale == 0.0:
        return SpanBasis(origin=origin, basis=np.zeros((d, 0)))

    q, r_factor, _ = linalg.qr(centered.T, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r_factor))
    rank = int(np.count_nonzero(diagonal > tolerance * scale))
    return SpanBasis(origin=origin, basis=q[:, :rank].copy())


@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid {mu + U t : sum (t_i / ell_i)^2 <= 1}, possibly rank-deficient.

    ``axes`` holds the r orthonormal semiaxis directions as columns and
    ``semiaxes`` their lengths sorted in descending order. With r = 0 the
    ellipsoid is the single point ``center``.
    """

    center: np.ndarray
    axes: np.ndarray
    semiaxes: np.ndarray

    @property
    def rank(self) -> int:
        return self.axes.shape[1]

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def coordinates(self, points: np.ndarray) -> np.ndarray:
        """Coordinates t_i = <x - mu, u_i> of each point along the semiaxes."""
        return (np.atleast_2d(points) - self.center) @ self.axes

    def quadratic_form(self, points: np.ndarray) -> np.ndarray:
        if self.rank == 0:
            return np.zeros(np.atleast_2d(points).shape[0])
        return np.sum((self.coordinates(points) / self.semiaxes) ** 2, axis=1)

    def span_residuals(self, points: np.ndarray) -> np.ndarray:
        diff = np.atleast_2d(points) - self.center
        off = diff - (diff @ self.axes) @ self.axes.T
        return np.linalg.norm(off, axis=1)

    def contains(
        self,
        points: np.ndarray,
        tolerance: float = 1e-7,
        rank_tolerance: float = 1e-9,
    ) -> np.ndarray:
        """Membership mask: in the span (relative ``rank_tolerance``) and form <= 1 + ``tolerance``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scale = max(float(np.linalg.norm(self.center)), float(self.semiaxes.max(initial=0.0)))
        in_span = self.span_residuals(pts) <= rank_tolerance * (scale if scale > 0 else 1.0)
        return in_span & (self.quadratic_form(pts) <= 1.0 + tolerance)

    def scaled(self, factor: float) -> "Ellipsoid":
        """The ellipsoid shrunk or grown by ``factor`` about its own center."""
        return Ellipsoid(self.center, self.axes, self.semiaxes * factor)

    def boundary_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniformly random directions mapped onto the boundary."""
        if self.rank == 0:
            return np.repeat(self.center[None, :], count, axis=0)
        directions = rng.standard_normal((count, self.rank))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return self.center + (directions * self.semiaxes) @ self.axes.T


@dataclass(frozen=True)
class RoundingCertificate:
    """Evidence that an ellipsoid is a (1+epsilon)r-rounding of its point set."""

    epsilon: float
    max_scaled_distance: float  # max Mahalanobis^2 distance of S from the weighted mean
    rank: int
    iterations: int = 0

    @property
    def stretch(self) -> float:
        """The rounding stretch Phi."""
        return 1.0 + self.epsilon

    def holds(self) -> bool:
        return self.max_scaled_distance <= (1.0 + self.epsilon) * self.rank * (1.0 + 1e-12)


def _hull_vertices(coords: np.ndarray, max_rank: int) -> np.ndarray:
    """Indices of a subset of ``coords`` with the same convex hull."""
    m, r = coords.shape
    if r == 1:
        return np.unique([int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))])
    if r > max_rank or m <= 2 * (r + 1):
        return np.arange(m)
    try:
        return np.sort(ConvexHull(coords).vertices)
    except QhullError:
        return np.arange(m)


def mvee(
    points: np.ndarray,
    epsilon: float | None = None,
    config: GeometryConfig | None = None,
) -> tuple[Ellipsoid, RoundingCertificate]:
    """Approximate minimum-volume enclosing ellipsoid via Khachiyan's algorithm.

    The computation runs inside the affine span of ``points``, so the result has
    the rank of the point set. Iteration stops once every point lies within
    Mahalanobis-squared distance (1 + epsilon) * r of the weighted mean; the
    returned ellipsoid is the weighted covariance scaled by the attained
    maximum, so it contains every point and its 1/((1 + epsilon) r) shrink lies
    inside conv(points).

    Args:
        points: Array of shape (m, d).
        epsilon: Rounding slack; defaults to ``config.mvee_epsilon``.
        config: Numerical tolerances.

    Returns:
        The ellipsoid and its rounding certificate.

    Raises:
        NonConvergence: If the iteration cap 100 r^2 ln(m) / epsilon is reached.
    """
    cfg = config or GeometryConfig()
    eps = cfg.mvee_epsilon if epsilon is None else epsilon
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")

    pts = as_points(points)
    # Canonical order makes the result independent of input permutation.
    pts = pts[np.lexsort(pts.T[::-1])]
    span = orthonormal_span(pts, cfg.rank_tolerance)
    r = span.rank
    d = pts.shape[1]
    if r == 0:
        ellipsoid = Ellipsoid(center=span.origin, axes=np.zeros((d, 0)), semiaxes=np.zeros(0))
        return ellipsoid, RoundingCertificate(epsilon=eps, max_scaled_distance=0.0, rank=0)

    coords = span.coordinates(pts)
    coords = coords[_hull_vertices(coords, cfg.qhull_max_rank)]
    m = coords.shape[0]
    cap = max(1, math.ceil(cfg.iteration_factor * r * r * math.log(max(m, 2)) / eps))
    target = (1.0 + eps) * r

    weights = np.full(m, 1.0 / m)
    for iteration in range(cap + 1):
        mean = weights @ coords
        centered = coords - mean
        covariance = centered.T @ (centered * weights[:, None])
        try:
            factor = linalg.cho_factor(covariance)
        except linalg.LinAlgError as e:
            raise NonConvergence(f"weighted covariance became singular: {e}") from e
        distances = np.einsum("ij,ji->i", centered, linalg.cho_solve(factor, centered.T))
        j = int(np.argmax(distances))
        worst = float(distances[j])
        if worst <= target:
            break
        step = (worst - r) / ((r + 1) * worst)
        weights *= 1.0 - step
        weights[j] += step
    else:
        raise NonConvergence(
            f"Khachiyan iteration did not reach a {1 + eps:.6g}-rounding within {cap} "
            f"iterations (rank {r}, {m} points); increase epsilon or the iteration factor"
        )

    logger.debug("mvee: rank %d, %d hull points, %d iterations", r, m, iteration)
    eigenvalues, eigenvectors = linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    semiaxes = np.sqrt(worst * eigenvalues[order])
    ellipsoid = Ellipsoid(
        center=span.origin + span.basis @ mean,
        axes=span.basis @ eigenvectors[:, order],
        semiaxes=semiaxes,
    )
    certificate = RoundingCertificate(
        epsilon=eps, max_scaled_distance=worst, rank=r, iterations=iteration
    )
    return ellipsoid, certificate


def hull_membership(
    hull_points: np.ndarray,
    query: np.ndarray,
    tolerance: float = 1e-8,
) -> bool:
    """Decide whether ``query`` is a convex combination of ``hull_points``.

    Solves the feasibility LP  sum a_i s_i = q, sum a_i = 1, a_i >= 0.

    Raises:
        LpFailure: If the solver stops for any reason other than optimal or infeasible.
    """
    pts = as_points(hull_points)
    q = np.asarray(query, dtype=float).reshape(-1)
    if q.shape[0] != pts.shape[1]:
        raise ValueError(f"query has dimension {q.shape[0]}, points have {pts.shape[1]}")

    m = pts.shape[0]
    a_eq = np.vstack([pts.T, np.ones(m)])
    b_eq = np.append(q, 1.0)
    result = linprog(
        np.zeros(m),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": tolerance},
    )
    if result.status == 2:
        return False
    if result.status != 0:
        raise LpFailure(f"hull feasibility LP failed: {result.message}")
    scale = max(1.0, float(np.abs(pts).max()), float(np.abs(q).max()))
    return bool(np.linalg.norm(a_eq @ result.x - b_eq) <= tolerance * scale)


def hull_membership_many(
    hull_points: np.ndarray,
    queries: np.ndarray,
    config: GeometryConfig | None = None,
) -> np.ndarray:
    """Vectorized ``hull_membership`` for many query points.

    Works in the affine span of ``hull_points``; in low rank the qhull facet
    equations decide membership, otherwise (or if qhull fails) each query is
    screened by its NNLS distance to the hull and only borderline ones go to the LP.
    """
    cfg = config or GeometryConfig()
    pts = as_points(hull_points)
    qs = np.atleast_2d(np.asarray(queries, dtype=float))
    inside = np.zeros(qs.shape[0], dtype=bool)
    if qs.shape[0] == 0:
        return inside

    span = orthonormal_span(pts, cfg.rank_tolerance)
    scale = max(1.0, float(np.abs(pts).max()))
    in_span = span.residuals(qs) <= cfg.rank_tolerance * scale
    if span.rank == 0 or not in_span.any():
        return in_span

    coords = span.coordinates(pts)
    candidates = np.flatnonzero(in_span)
    query_coords = span.coordinates(qs[candidates])
    slack = cfg.lp_tolerance * scale

    if span.rank == 1:
        low, high = coords[:, 0].min(), coords[:, 0].max()
        inside[candidates] = (query_coords[:, 0] >= low - slack) & (query_coords[:, 0] <= high + slack)
        return inside

    if span.rank <= cfg.qhull_max_rank:
        try:
            equations = ConvexHull(coords).equations
        except QhullError:
            logger.debug("qhull failed on rank %d hull, falling back to LP", span.rank)
        else:
            offsets = query_coords @ equations[:, :-1].T + equations[:, -1]
            inside[candidates] = np.all(offsets <= slack, axis=1)
            return inside

    # NNLS distance to the hull decides clear cases; the LP settles borderline ones.
    system = np.vstack([coords.T, np.ones(coords.shape[0])])
    for index, q in zip(candidates, query_coords):
        try:
            _, distance = nnls(system, np.append(q, 1.0))
        except RuntimeError:
            distance = None
        if distance is not None and distance <= slack:
            inside[index] = True
        elif distance is not None and distance > NNLS_REJECT_FACTOR * slack:
            inside[index] = False
        else:
            inside[index] = hull_membership(coords, q, cfg.lp_tolerance)
    return inside


def margin_of_clustering(
    points: np.ndarray,
    labels: np.ndarray | Sequence[int],
    metrics: Sequence[ClusterMetric],
) -> np.ndarray:
    """Per-cluster margin values.

    For cluster C with latent (W, c) the value is
    min_{y not in C} d_W(y, c)^2 / max_{x in C} d_W(x, c)^2 - 1. A cluster whose
    inner radius is zero gets +inf, or -1 when some outside point also sits at
    distance zero. The clustering has margin gamma iff every value exceeds gamma.

    Raises:
        EmptyCluster: If some cluster index has no points.
    """
    pts = as_points(points)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (pts.shape[0],):
        raise ValueError(f"expected {pts.shape[0]} labels, got shape {labels.shape}")
    k = len(metrics)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in 0..{k - 1}")

    values = np.empty(k)
    for j, cluster in enumerate(metrics):
        inside = labels == j
        if not inside.any():
            raise EmptyCluster(f"cluster {j} has no points")
        distances = cluster.metric.sq_distances(pts, cluster.center)
        inner = float(distances[inside].max())
        outer = float(distances[~inside].min()) if (~inside).any() else math.inf
        if inner == 0.0:
            values[j] = math.inf if outer > 0.0 else -1.0
        else:
            values[j] = outer / inner - 1.0
    return values


def has_margin(values: np.ndarray | Sequence[float], gamma: float) -> bool:
    """True iff every margin value reaches ``gamma`` up to a relative slack."""
    return bool(np.all(np.asarray(values) >= gamma - MARGIN_SLACK * max(1.0, gamma)))
