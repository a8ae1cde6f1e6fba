"""Phase-space laboratory for a strongly magnetized, collisional plasma.

Solves the scaled kinetic system in two spatial and three velocity
dimensions together with its drift-fluid limit, and provides the
entropy/energy diagnostics that quantify the distance between the two.
"""

from .core import (DiagnosticsRecord, DistributionField, EMState, LimitState,
                   PerpGrid, PlasmaParams, SpectralCalculus, VelGrid,
                   maxwellian, moments, rotate_velocity)
from .errors import (ConsistencyError, IterationError, NeutralityViolation,
                     ParameterError, PositivityError, ShapeError,
                     StabilityError, StateError)

__version__ = "0.1.0"

__all__ = [
    "DiagnosticsRecord", "DistributionField", "EMState", "LimitState",
    "PerpGrid", "PlasmaParams", "SpectralCalculus", "VelGrid",
    "maxwellian", "moments", "rotate_velocity",
    "ConsistencyError", "IterationError", "NeutralityViolation",
    "ParameterError", "PositivityError", "ShapeError", "StabilityError",
    "StateError", "__version__",
]
