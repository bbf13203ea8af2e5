"""n-dimensional Chaplygin ball: geometry on T*SO(n), dynamics and Hamiltonization checks."""

from .ball import InertiaTensor, PhasePoint
from .forms import FormTag, TangentVectorTS
from .son import adapted_basis, structure_constants

__version__ = "0.1.0"

__all__ = [
    "FormTag",
    "InertiaTensor",
    "PhasePoint",
    "TangentVectorTS",
    "adapted_basis",
    "structure_constants",
]
