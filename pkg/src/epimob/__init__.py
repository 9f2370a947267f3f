"""epimob: township-level epidemic control laboratory.

Simulates metapopulation disease spread under inter-division mobility
quotas, estimates time-varying infection rates online, and evaluates or
trains restriction policies against a dual hospital-strain / mobility-loss
objective.
"""

__version__ = "0.1.0"

from ._accel import BACKEND
from .core import (DiseaseParams, EpidemicState, InvariantError,
                   ObjectiveParams, Scenario, SchemaError, load_scenario,
                   save_scenario, scenario_hash, seeded_rng)

__all__ = [
    "__version__",
    "BACKEND",
    "EpidemicState",
    "DiseaseParams",
    "ObjectiveParams",
    "Scenario",
    "SchemaError",
    "InvariantError",
    "load_scenario",
    "save_scenario",
    "scenario_hash",
    "seeded_rng",
]
