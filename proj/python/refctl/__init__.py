"""Python bindings for the refctl solver.

`Problem` takes a JSON configuration (a string, a dict or a path via
`load`) and exposes the solved free boundary, the value function and a
Monte Carlo check of the policy.
"""

import json
import os

from ._core import (
    Error,
    InputError,
    ModelError,
    NumericalError,
    Problem,
    cylinder_d,
    ou_sweep,
    run_cli,
    solve_ou_boundary,
)

__all__ = [
    "Error",
    "InputError",
    "ModelError",
    "NumericalError",
    "Problem",
    "cylinder_d",
    "load",
    "ou_sweep",
    "run_cli",
    "solve_ou_boundary",
]


def load(config):
    """Build a Problem from a dict, a JSON string or a path to a JSON file."""
    if isinstance(config, dict):
        return Problem(json.dumps(config))
    if isinstance(config, (str, os.PathLike)) and os.path.isfile(config):
        with open(config, encoding="utf-8") as fh:
            return Problem(fh.read())
    return Problem(str(config))
