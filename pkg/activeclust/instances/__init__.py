"""Margin-verified instance generators and the instance file format."""

from .adversarial import AdversarialGenerator, gen_adversarial_kmeans
from .base import InstanceGenerator
from .ellipsoidal import EllipsoidalGenerator, SphericalGenerator, gen_ellipsoidal, gen_spherical
from .lower_bounds import (
    LowerBoundHypercubeGenerator,
    LowerBoundSphereGenerator,
    gen_lb_hypercube,
    gen_lb_sphere,
)
from .schema import InstanceDocument, dump_instance, load_instance, save_instance

GENERATORS: dict[str, InstanceGenerator] = {
    generator.name: generator
    for generator in (
        EllipsoidalGenerator(),
        SphericalGenerator(),
        AdversarialGenerator(),
        LowerBoundSphereGenerator(),
        LowerBoundHypercubeGenerator(),
    )
}

__all__ = [
    "GENERATORS",
    "InstanceGenerator",
    "InstanceDocument",
    "gen_adversarial_kmeans",
    "gen_ellipsoidal",
    "gen_lb_hypercube",
    "gen_lb_sphere",
    "gen_spherical",
    "dump_instance",
    "load_instance",
    "save_instance",
]
