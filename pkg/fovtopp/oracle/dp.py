"""
File: oracle/dp.py
Description: brute-force dynamic program over a (node, h-level) lattice, used to check
             the sweeps on small instances. Transitions are admitted by evaluating each
             inequality directly on the thrust vector, independent of the cone records
             the solver builds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from ..path.pathspec import Grid, requirements_at
from ..path.problem import ProblemInstance
from ..solver.profilesolver import SquareSpeedProfile, build_speed_bounds
from ..utils.consts import DP_MAX_GRID
from ..utils.errors import Infeasible, LandmarkTooClose, ValidationError
from ..utils.general import get_logger_extras

logger = logging.getLogger(__name__)

_REL_TOL = 1e-9


@dataclass(frozen=True)
class DpSettings:
    h_levels: int = 400
    h_cap: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.h_levels, bool) or not isinstance(self.h_levels, (int, np.integer)) or self.h_levels < 2:
            raise ValidationError("h_levels", f"must be an integer >= 2, got {self.h_levels!r}")
        if self.h_cap is not None and not self.h_cap > 0.0:
            raise ValidationError("h_cap", f"must be > 0, got {self.h_cap}")


def _admissible(instance: ProblemInstance, grid: Grid, i: int, h_from: NDArray, h_to: NDArray) -> NDArray:
    """Boolean matrix [a, b]: does the step h_from[a] -> h_to[b] satisfy every inequality at node i."""
    quad, rig = instance.quad, instance.rig
    h_prime = (h_to[None, :] - h_from[:, None]) / grid.ds
    c = (0.5 * grid.dgamma[i] * h_prime[..., None] + grid.ddgamma[i] * h_from[:, None, None]
         - quad.g_vec)
    c_norm = np.linalg.norm(c, axis=-1)
    ok = c_norm <= quad.c_total_max * (1.0 + _REL_TOL)

    reqs = requirements_at(instance, float(grid.s[i]))
    if reqs.has_attitude:
        along = c @ reqs.n
        ok &= along >= math.cos(reqs.beta) * c_norm - _REL_TOL * (1.0 + c_norm)

    theta = math.atan2(grid.psi[i][1], grid.psi[i][0]) + rig.yaw
    side = np.array([-math.sin(theta), math.cos(theta), 0.0])
    for lid in reqs.landmark_ids:
        offset = instance.landmarks[lid] - grid.gamma[i]
        dist = float(np.linalg.norm(offset))
        sin_a, cos_a = math.sin(rig.alpha), math.cos(rig.alpha)
        if dist < rig.d or dist**2 <= (rig.d * sin_a) ** 2:
            raise LandmarkTooClose("landmark inside the camera offset ball", index=i, landmark_id=lid)
        reach = rig.d * sin_a**2 + cos_a * math.sqrt(dist**2 - (rig.d * sin_a) ** 2)
        lhs = c @ np.cross(offset, side)
        rhs = reach * np.linalg.norm(np.cross(side, c), axis=-1)
        ok &= lhs >= rhs - _REL_TOL * (1.0 + np.abs(rhs))
    return ok


def dp_solve(instance: ProblemInstance, grid: Grid, settings: DpSettings) -> SquareSpeedProfile:
    """
    Pointwise-largest h per node over all lattice chains from h_start to h_end.

    Raises:
        ValidationError: grid larger than DP_MAX_GRID steps
        Infeasible: no chain connects the pinned endpoints
    """
    if grid.n > DP_MAX_GRID:
        raise ValidationError("grid_n", f"dp oracle is limited to {DP_MAX_GRID} steps, got {grid.n}")
    B_l, B_u = build_speed_bounds(instance, grid)
    h_cap = settings.h_cap if settings.h_cap is not None else float(np.max(B_u))
    lattice = np.linspace(0.0, h_cap, settings.h_levels)
    slack = 1e-12 * max(1.0, h_cap)

    levels = [np.array([instance.h_start])]
    for i in range(1, grid.n):
        levels.append(lattice[(lattice >= B_l[i] - slack) & (lattice <= B_u[i] + slack)])
    levels.append(np.array([instance.h_end]))

    steps = []
    reach = [np.ones(1, dtype=bool)]
    for i in range(grid.n):
        adm = _admissible(instance, grid, i, levels[i], levels[i + 1])
        steps.append(adm)
        nxt = np.any(reach[i][:, None] & adm, axis=0)
        if not nxt.any():
            logger.info(msg=f"dp oracle: no reachable level at node {i + 1}",
                        extra=get_logger_extras(instance, stage=1, index=i))
            raise Infeasible(1, "dp", i)
        reach.append(nxt)

    live = [None] * (grid.n + 1)
    live[grid.n] = reach[grid.n]
    for i in range(grid.n - 1, -1, -1):
        co = np.any(steps[i] & live[i + 1][None, :], axis=1)
        live[i] = reach[i] & co

    h = np.array([levels[i][live[i]].max() for i in range(grid.n + 1)])
    l = np.array([levels[i][live[i]].min() for i in range(grid.n + 1)])
    return SquareSpeedProfile(grid=grid, h=h, l=l, stage=1)
