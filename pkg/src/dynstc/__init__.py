"""Dynamic self-triggered control for nonlinear networked systems with bounded delays."""
from .errors import (ConfigError, DomainError, IntegrationError, InvalidPhiError,
                     OutOfRegionError)
from .model import Box, ExamplePlant, PlantModel, eval_f, eval_g, example_plant, get_plant
from .paramgen import build_family, synthesize_family, validate_condition1
from .phi import PhiTable, integrate_phi, t_max
from .sim import DelayModel, check_invariants, simulate
from .storage import ParameterSet, StorageBundle, quadratic_bundle
from .trigger import TriggerConfig, gamma_trigger, update_eta

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ConfigError",
    "DelayModel",
    "DomainError",
    "ExamplePlant",
    "IntegrationError",
    "InvalidPhiError",
    "OutOfRegionError",
    "ParameterSet",
    "PhiTable",
    "PlantModel",
    "StorageBundle",
    "TriggerConfig",
    "build_family",
    "check_invariants",
    "eval_f",
    "eval_g",
    "example_plant",
    "gamma_trigger",
    "get_plant",
    "integrate_phi",
    "quadratic_bundle",
    "simulate",
    "synthesize_family",
    "t_max",
    "update_eta",
    "validate_condition1",
]
