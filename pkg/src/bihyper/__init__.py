"""Numerical verification of identities for biharmonic hypersurfaces in space forms."""

__version__ = "0.1.0"

from .spaceform import SpaceFormModel, geodesic_distance, position_vector, psi, theta
from .charts import (
    CatalogEntry,
    Chart,
    default_catalog,
    ellipsoid,
    equator,
    euclidean_sphere,
    get_entry,
    hyperbolic_sphere,
    perturbed_equator,
    product_sphere,
    small_hypersphere,
)
from .extrinsic import PointGeometry, point_geometry
from .fieldcalc import Grid, GridField, integrate, laplace_beltrami, random_band_limited
from .identities import IdentityReport, run_suite, cmc_argument_coefficients

__all__ = [
    "CatalogEntry",
    "Chart",
    "Grid",
    "GridField",
    "IdentityReport",
    "PointGeometry",
    "SpaceFormModel",
    "default_catalog",
    "ellipsoid",
    "equator",
    "euclidean_sphere",
    "geodesic_distance",
    "get_entry",
    "hyperbolic_sphere",
    "integrate",
    "laplace_beltrami",
    "perturbed_equator",
    "point_geometry",
    "position_vector",
    "product_sphere",
    "psi",
    "random_band_limited",
    "run_suite",
    "small_hypersphere",
    "cmc_argument_coefficients",
    "theta",
]
