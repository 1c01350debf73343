"""Partial collisions in the planar n-body problem.

Cartesian integration to collision, cluster shape coordinates, the McGehee
blow-up, central configurations, asymptotic rate verification and
isolating-segment checks.
"""

from .core import ClusterPartition, MassSystem, State, cluster_observables
from .odeint import IntegratorConfig, integrate, integrate_to_collision, shoot_to_collision
from .scenarios import PRESETS, preset, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ClusterPartition",
    "MassSystem",
    "State",
    "cluster_observables",
    "IntegratorConfig",
    "integrate",
    "integrate_to_collision",
    "shoot_to_collision",
    "PRESETS",
    "preset",
    "run_scenario",
]
