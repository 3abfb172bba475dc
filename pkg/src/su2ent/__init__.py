"""Average entanglement entropy of random states in fixed SU(2) spin sectors."""

from .errors import (
    DomainError,
    InvariantViolation,
    NumericalError,
    SizeLimitError,
    Su2EntError,
)
from .sectors import Bipartition, SectorSpec, multiplicity, pair_set, sector_dimension

__version__ = "0.1.0"

__all__ = [
    "Bipartition",
    "DomainError",
    "InvariantViolation",
    "NumericalError",
    "SectorSpec",
    "SizeLimitError",
    "Su2EntError",
    "multiplicity",
    "pair_set",
    "sector_dimension",
]
