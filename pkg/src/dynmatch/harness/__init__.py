from .config import ExperimentConfig, build_policies, config_from_dict, load_config
from .simulate import SimulationReport, simulate
from .suites import SUITES, SuiteReport, verify_suite

__all__ = [
    "ExperimentConfig",
    "SUITES",
    "SimulationReport",
    "SuiteReport",
    "build_policies",
    "config_from_dict",
    "load_config",
    "simulate",
    "verify_suite",
]
