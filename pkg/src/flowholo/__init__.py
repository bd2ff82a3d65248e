"""
flowholo: entanglement of a weak-link fermion chain from a disentangling flow.

Modules
-------
lattice       chain model, sine mode grid, occupations, density of states
quadrature    adaptive integration wrapper, erfc, pole probes
oracle        exact correlation-matrix entropies for the free chain
flow_free     min-entropy from the quadratic flow, 1D and 2D strips, fits
hubbard_flow  truncated interacting flow and the quasiparticle residue
correction    leading interaction correction to the min-entropy
cli           command-line sweeps
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BandEdgeError,
    ConfigurationError,
    ConvergenceError,
    DomainError,
    FitError,
    FlowHoloError,
    PoleError,
    StiffnessError,
    UnsupportedModelError,
)
from .lattice import LatticeModel, ModeGrid, mode_grid  # noqa: E402

__all__ = [
    "__version__",
    "BandEdgeError",
    "ConfigurationError",
    "ConvergenceError",
    "DomainError",
    "FitError",
    "FlowHoloError",
    "PoleError",
    "StiffnessError",
    "UnsupportedModelError",
    "LatticeModel",
    "ModeGrid",
    "mode_grid",
]
