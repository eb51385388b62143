"""Simulator for mediated asymmetric semi-quantum key distribution."""

from .adversary import AttackModel, make_undetectable_s2, predicted_case1_error, validate_attack
from .config import ExperimentConfig, load_config
from .harness import compare_protocols, run_experiment, sweep
from .kinds import Action, AttackKind, Case, EfficiencyConvention, Location, ProtocolKind
from .protocols import Transcript, run_protocol, run_round

__all__ = [
    "Action",
    "AttackKind",
    "AttackModel",
    "Case",
    "EfficiencyConvention",
    "ExperimentConfig",
    "Location",
    "ProtocolKind",
    "Transcript",
    "compare_protocols",
    "load_config",
    "make_undetectable_s2",
    "predicted_case1_error",
    "run_experiment",
    "run_protocol",
    "run_round",
    "sweep",
    "validate_attack",
]

__version__ = "0.1.0"
