"""Structure-preserving integrators for the Kepler and relativistic Kepler problems."""

from geodyn.errors import GeodynError
from geodyn.integrators import METHOD_IDS, run
from geodyn.kepler import PhaseState, conserved, kepler_split, orbit_elements
from geodyn.relativistic import REL_METHOD_IDS, ExtPhaseState, run_relativistic

__all__ = [
    "GeodynError",
    "METHOD_IDS",
    "REL_METHOD_IDS",
    "PhaseState",
    "ExtPhaseState",
    "conserved",
    "kepler_split",
    "orbit_elements",
    "run",
    "run_relativistic",
]

__version__ = "0.1.0"
