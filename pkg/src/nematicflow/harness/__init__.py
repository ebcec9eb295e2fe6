from .scenarios import GeneratedScenario, Scenario, check_hypotheses, generate_scenario
from .presets import PRESETS, ExperimentResult, RunManifest, run_experiment
from .config import ConfigError, parse_config

__all__ = [
    "GeneratedScenario",
    "Scenario",
    "check_hypotheses",
    "generate_scenario",
    "PRESETS",
    "ExperimentResult",
    "RunManifest",
    "run_experiment",
    "ConfigError",
    "parse_config",
]
