"""Asymmetric distances: quasi-metric spaces, Finsler charts and semi-Lipschitz function algebras."""

__version__ = "0.1.0"

from .quasimetric import (  # noqa: E402
    QuasiMetricSpace, index_of_symmetry, slip0_linearity, slip_constant, validate_space,
)
from .finsler import (  # noqa: E402
    EuclideanField, Example31Field, FinslerChart, RandersField, RiemannianField, finsler_distance,
)

__all__ = [
    "__version__", "QuasiMetricSpace", "index_of_symmetry", "slip0_linearity", "slip_constant",
    "validate_space", "EuclideanField", "Example31Field", "FinslerChart", "RandersField",
    "RiemannianField", "finsler_distance",
]
