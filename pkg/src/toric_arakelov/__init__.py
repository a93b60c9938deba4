"""Toric metrized R-divisors over Q: roofs, volumes, heights and decompositions."""

from .arakelov import (
    arithmetic_multiplicity,
    arithmetic_volumes,
    classify,
    dirichlet_certificate,
    fujita,
    geometric_volume,
    height,
    lattice_sum_oracle,
    theta_region,
    zariski,
)
from .cli import run
from .divisor import ToricMetrizedRDivisor, delta_polytope, roof
from .errors import ToricArakelovError
from .samples import generate_example
from .specfile import load_spec, parse_spec

__all__ = [
    "ToricArakelovError",
    "ToricMetrizedRDivisor",
    "arithmetic_multiplicity",
    "arithmetic_volumes",
    "classify",
    "delta_polytope",
    "dirichlet_certificate",
    "fujita",
    "generate_example",
    "geometric_volume",
    "height",
    "lattice_sum_oracle",
    "load_spec",
    "parse_spec",
    "roof",
    "run",
    "theta_region",
    "zariski",
]
