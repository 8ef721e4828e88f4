"""Grid frequency regulation with fast ancillary service from building HVAC
fans: transfer-function plant models, an ARX fan-identification engine, a
scenario-driven simulator and fleet flexibility analytics."""

__version__ = "0.1.0"

from .grid import GridParameters, ancillary_power, reference_parameters
from .linsys import StateSpaceModel, TransferFunction
from .sim import DisturbanceSchedule, Scenario, Trajectory, compare_scenarios, run_scenario
from .sysid import ArxModel, IoRecord, build_regressors, fit_arx, simulate_arx

__all__ = [
    "__version__",
    "ArxModel",
    "DisturbanceSchedule",
    "GridParameters",
    "IoRecord",
    "Scenario",
    "StateSpaceModel",
    "Trajectory",
    "TransferFunction",
    "ancillary_power",
    "build_regressors",
    "compare_scenarios",
    "fit_arx",
    "reference_parameters",
    "run_scenario",
    "simulate_arx",
]
