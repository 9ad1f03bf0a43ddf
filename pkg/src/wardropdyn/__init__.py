"""Two-time-scale route choice dynamics on acyclic traffic networks."""

__version__ = "0.1.0"

from .choice import ILogit, LogitResponse, PreferenceConsistent, local_decision, path_delays, perturbed_best_response
from .congestion import CongestionModel, ExponentialCongestion
from .diagnostics import LyapunovConfig, distance_l1, distance_l2, lyapunov_V, lyapunov_W, time_to_threshold
from .dynamics import CoupledSystem, SystemState, Trajectory, simulate
from .equilibrium import EquilibriumResult, potential, solve_equilibrium, wardrop_gap
from .graph import Network, PathSet, enumerate_paths, min_cut_capacity, validate_network
from .scenario import ScenarioConfig, builtin_scenarios, load_scenario, parse_scenario, write_results

__all__ = [
    "CongestionModel", "CoupledSystem", "EquilibriumResult", "ExponentialCongestion", "ILogit",
    "LogitResponse", "LyapunovConfig", "Network", "PathSet", "PreferenceConsistent",
    "ScenarioConfig", "SystemState", "Trajectory", "builtin_scenarios", "distance_l1",
    "distance_l2", "enumerate_paths", "load_scenario", "local_decision", "lyapunov_V",
    "lyapunov_W", "min_cut_capacity", "parse_scenario", "path_delays", "perturbed_best_response",
    "potential", "simulate", "solve_equilibrium", "time_to_threshold", "validate_network",
    "wardrop_gap", "write_results",
]
