"""Active clustering with same-cluster queries."""

from .baseline import BaselineConfig, ScqKMeans, scq_kmeans
from .geometry import ClusterMetric, Ellipsoid, GeometryConfig, PointSet, PsdMetric, mvee
from .instances import (
    GENERATORS,
    gen_adversarial_kmeans,
    gen_ellipsoidal,
    gen_lb_hypercube,
    gen_lb_sphere,
    gen_spherical,
    load_instance,
    save_instance,
)
from .oracle import LatentInstance, QueryLedger, SameClusterOracle, scq
from .recur import (
    UNLABELED,
    RecoveredClustering,
    Recur,
    RecurConfig,
    RoundStats,
    clustering_error,
)
from .tessellation import TessParams, tess_params, tessellation_learn

__all__ = [
    "GENERATORS",
    "UNLABELED",
    "BaselineConfig",
    "ClusterMetric",
    "Ellipsoid",
    "GeometryConfig",
    "LatentInstance",
    "PointSet",
    "PsdMetric",
    "QueryLedger",
    "RecoveredClustering",
    "Recur",
    "RecurConfig",
    "RoundStats",
    "SameClusterOracle",
    "ScqKMeans",
    "TessParams",
    "clustering_error",
    "gen_adversarial_kmeans",
    "gen_ellipsoidal",
    "gen_lb_hypercube",
    "gen_lb_sphere",
    "gen_spherical",
    "load_instance",
    "mvee",
    "save_instance",
    "scq",
    "scq_kmeans",
    "tess_params",
    "tessellation_learn",
]
