"""Finite-stage radial Cantor measures, Knapp-sector test functions and the
numerical checks around the sharpness of the L^2 restriction range."""

__version__ = "0.1.0"

from .params import (DomainError, Exponents, GenerationError, ParamSequences,  # noqa: F401
                     derive_exponents, generate_sequences, validate_sequences)
from .cantor import (EndpointSet, StageMeasure, build_all_stages, build_progression,  # noqa: F401
                     build_stage, check_isolation, extend_endpoints)
