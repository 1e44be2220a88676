"""
File: utils/general.py
Description: helper methods used throughout the project
"""
from __future__ import annotations
import os
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from ..path.problem import ProblemInstance


def get_logger_extras(instance: Optional["ProblemInstance"], stage: Optional[int] = None,
                      index: Optional[int] = None) -> dict:
    extras = {}
    extras["grid_n"] = instance.grid_n if instance else "none"
    extras["s_end"] = instance.path.s_end if instance else "none"
    extras["n_landmarks"] = len(instance.landmarks) if instance else "none"
    extras["stage"] = stage if stage is not None else "none"
    extras["node"] = index if index is not None else "none"
    return extras


def create_dirs(fp):
    os.makedirs(os.path.dirname(fp), exist_ok=True)
