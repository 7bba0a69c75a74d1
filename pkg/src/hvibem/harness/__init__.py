"""Desk-scale study harness: case catalog, convergence studies, CLI."""

from .cases import CaseSpec, case_names, manufactured_case, validate_case
from .config import ConfigError, parse_config, read_config
from .studies import StudyReport, StudyRow, run_eps_study, run_h_study, solve_case

__all__ = [
    "CaseSpec",
    "ConfigError",
    "StudyReport",
    "StudyRow",
    "case_names",
    "manufactured_case",
    "parse_config",
    "read_config",
    "run_eps_study",
    "run_h_study",
    "solve_case",
    "validate_case",
]
