"""Deterministic simulator and decision library for device-edge
collaborative DNN inference with twin-assisted offloading decisions."""

from .config import SimConfig, dbm_to_watts, edge_load_to_lambda, lambda_to_edge_load
from .costs import CostBreakdown, OffloadDecision
from .profile import DnnLayer, DnnProfile, default_profile, load_profile
from .simulation import ALL_POLICIES, RunResult, run_simulation

__all__ = [
    "SimConfig",
    "dbm_to_watts",
    "edge_load_to_lambda",
    "lambda_to_edge_load",
    "CostBreakdown",
    "OffloadDecision",
    "DnnLayer",
    "DnnProfile",
    "default_profile",
    "load_profile",
    "ALL_POLICIES",
    "RunResult",
    "run_simulation",
]

__version__ = "0.1.0"
