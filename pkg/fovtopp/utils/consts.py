"""
File: utils/consts.py
Description: numeric defaults, tolerances and package paths shared across fovtopp.
"""

import math
import os
from os import PathLike
from typing import Union

# Physical defaults
GRAVITY = (0.0, 0.0, -9.81)

# Tolerances
EPS_THRUST = 1e-9  # degenerate attitude detection (m/s^2)
EPS_REGULAR = 1e-9  # minimum |gamma'| at grid nodes
EPS_CONTINUITY = 1e-8  # C2 matching across breakpoints
SMOOTHING_MIN_NORM = 1e-6
BOUNDARY_BAND_RAD = 1e-6
CONVEXITY_RESIDUAL_TOL = 1e-9
INTERVAL_TOL = 1e-10
STEP_RESIDUAL_TOL = 1e-8  # relative to the cone right-hand side

# Solver defaults
DEFAULT_SPEED_CAP = 1e6  # m^2/s^2
DEFAULT_EPS_H = 1e-6
DEFAULT_ETA = 2.0  # m/s^2
DEFAULT_SIGMA_FRACTION = 0.05  # of S_end
DEFAULT_BETA = math.pi / 2 - 1e-6
KERNEL_CUTOFF = 4.0  # kernel half-width in sigmas
ANCHOR_SCAN_POINTS = 17

# Output defaults
DEFAULT_DT = 0.005
DEFAULT_MARGIN_DEG = 2.0
DEFAULT_EXACT_MARGIN_DEG = 1e-4
DP_MAX_GRID = 200

LOG_ENV_VAR = "FOVTOPP_LOG"
LOG_LEVELS = {"error": "ERROR", "info": "INFO", "debug": "DEBUG"}
PACKAGE_LOGGER = "fovtopp"


def get_root_dir(n=2) -> Union[str, PathLike]:
    """
    With respect to this file (consts.py), get root directories n levels above.

    Args:
        n (int, optional): number of parents to climb. Defaults to 2.

    Returns:
        path: PathLike
    """
    path_components = [__file__] + [os.pardir] * n
    return os.path.abspath(os.path.join(*path_components))


def get_custom_logging_path() -> Union[str, PathLike]:
    return os.path.join(get_root_dir(n=1), "custom_logging")


def get_log_level(default: str = "info") -> str:
    """
    Read the diagnostic verbosity from the environment.

    Returns:
        str: a logging level name understood by dictConfig
    """
    requested = os.environ.get(LOG_ENV_VAR, default).strip().lower()
    return LOG_LEVELS.get(requested, LOG_LEVELS[default])
