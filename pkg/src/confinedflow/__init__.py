"""Interacting particle gradient flows confined to planar domains."""

from .diagnostics import DiagnosticReport, all_passed, run_suite
from .dynamics import IntegratorConfig, SimulationAborted, Trajectory, simulate
from .energy import EnergyModel, ExternalPotential, InversePower, RegularizedPotential
from .geometry import (Disk, Domain, Strip, complement, domain_from_spec, make_disk,
                       make_strip, smooth_difference, smooth_intersection, smooth_union)
from .scenarios import ScenarioConfig, builtin_scenarios, get_builtin, run_scenario

__version__ = "0.1.0"
