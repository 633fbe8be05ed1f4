"""HJB value iteration on POD-reduced advection-diffusion-reaction models."""

import os
import pathlib

_presets = pathlib.Path(__file__).with_name("presets")
if _presets.is_dir():
    os.environ.setdefault("HJBPOD_PRESETS", str(_presets))

from ._core import (
    ConfigError,
    ContractViolation,
    GridTooLargeError,
    NumericalError,
    RankDeficiencyError,
    ValueGrid,
    load_value_grid,
    pod_basis,
    run_experiment,
    solve_care,
    solve_lyapunov,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "GridTooLargeError",
    "NumericalError",
    "RankDeficiencyError",
    "ValueGrid",
    "load_value_grid",
    "pod_basis",
    "run_experiment",
    "solve_care",
    "solve_lyapunov",
]
