"""Design-space exploration for monolithic 3D DRAM arrays.

Technology profiles feed a bitline routing model, lumped electrical
estimates (sense margin, row cycle time, energy) and a small transient RC
solver; a calibration layer fits free parameters to reference anchors and
projects density and stack height against layer count.
"""

from .tech_profile import TechnologyProfile, builtin, builtin_profiles
from .topology import ArrayConfig, RoutingTopology, Scheme
from .electrical import DisturbWorkload, OperatingPoint, TimingModel
from .scenario import Scenario, default_scenario, load_scenario, shipped_scenario
from .projection import calibrate, evaluate, evaluate_profile, sweep, sweep_profile

__version__ = "0.1.0"

__all__ = [
    "TechnologyProfile",
    "builtin",
    "builtin_profiles",
    "ArrayConfig",
    "RoutingTopology",
    "Scheme",
    "DisturbWorkload",
    "OperatingPoint",
    "TimingModel",
    "Scenario",
    "default_scenario",
    "load_scenario",
    "shipped_scenario",
    "calibrate",
    "evaluate",
    "evaluate_profile",
    "sweep",
    "sweep_profile",
]
