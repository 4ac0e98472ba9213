"""Simulation laboratory for stationary first-passage percolation on
Cayley graphs of virtually nilpotent groups.

The package builds hierarchical highway weight fields whose passage times
realize a prescribed conjugation-invariant norm on the free abelianization,
and provides the measurement tooling (exact Dijkstra on finite regions,
directional profiles, symmetry audits, censuses) to verify that claim at
desk scale.
"""

__version__ = "0.1.0"

from .errors import (EXIT_CERTIFICATION, EXIT_INTEGRITY, EXIT_OK,
                     EXIT_REFUSAL, EXIT_RESOURCE, EXIT_USAGE,
                     CertificationError, IntegrityError, NilfppError,
                     RefusalError, ResourceError)
from .groups import (EdgePath, GroupModel, HeisenbergModel,
                     SemidirectZiModel, ZdModel, parse_group)
from .norms import ConstantsBundle, NormSpec, lp_norm, polytope_norm

__all__ = [
    "__version__",
    "EXIT_OK", "EXIT_USAGE", "EXIT_REFUSAL", "EXIT_CERTIFICATION",
    "EXIT_RESOURCE", "EXIT_INTEGRITY",
    "NilfppError", "RefusalError", "CertificationError", "ResourceError",
    "IntegrityError",
    "GroupModel", "ZdModel", "HeisenbergModel", "SemidirectZiModel",
    "parse_group", "EdgePath",
    "NormSpec", "lp_norm", "polytope_norm", "ConstantsBundle",
]
