"""CRB-optimal transmit beamforming for dual-function radar-communication arrays."""

__version__ = "0.1.0"

from .arrays import ArrayGeometry, ExtendedTarget, PointTarget
from .metrics import DesignSolution, Scenario

__all__ = [
    "ArrayGeometry",
    "PointTarget",
    "ExtendedTarget",
    "Scenario",
    "DesignSolution",
    "__version__",
]
