"""Radial quantum Boltzmann solver with Bogoliubov dispersion and a condensate."""

__version__ = "0.1.0"

from .physics import DomainError, PhysicalParams, energy, energy_derivative, inverse_energy  # noqa: E402
from .grid import DistributionState, RadialGrid, bose_einstein, from_profile, make_grid  # noqa: E402
from .collision import CollisionOperator, operator_for  # noqa: E402
from .integrator import StepControls, TrajectoryRecord, evolve  # noqa: E402
from .scenario import ConfigError, Scenario  # noqa: E402

__all__ = [
    "__version__", "DomainError", "PhysicalParams", "energy", "energy_derivative", "inverse_energy",
    "DistributionState", "RadialGrid", "bose_einstein", "from_profile", "make_grid",
    "CollisionOperator", "operator_for", "StepControls", "TrajectoryRecord", "evolve",
    "ConfigError", "Scenario",
]
