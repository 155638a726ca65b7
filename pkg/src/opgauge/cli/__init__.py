"""Command-line front door: scenario files in, verification reports out."""

from __future__ import annotations

from .main import EXIT_CAPABILITY, EXIT_FAIL, EXIT_INPUT, EXIT_PASS, main
from .scenario import Scenario, load_scenario, random_field, random_potential
from .suite import CHECK_IDS, run_converge, run_residual_map, run_verify

__all__ = [
    "CHECK_IDS",
    "EXIT_CAPABILITY",
    "EXIT_FAIL",
    "EXIT_INPUT",
    "EXIT_PASS",
    "Scenario",
    "load_scenario",
    "main",
    "random_field",
    "random_potential",
    "run_converge",
    "run_residual_map",
    "run_verify",
]
