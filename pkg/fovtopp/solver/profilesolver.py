"""
File: solver/profilesolver.py
Description: backward-forward sweeps over the square-speed profile h(s).

Each step between nodes i and i+1 is a two-variable convex program in x = (h_i, h_{i+1}).
It is solved by bisection on one coordinate, with a closed-form interval of the other
coordinate as the feasibility test. Every constraint with one coordinate fixed reads
||a x + b|| <= p x + q, whose solution set is a single interval.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar

from ..constraints.actuation import motor_rows
from ..constraints.fovcone import (attitude_cone_constraint, fov_constraint,
                                   nonholonomy_constraint, thrust_ball_constraint)
from ..constraints.soc import Soc2Constraint, thrust_map
from ..dynamics.quadmodel import mixer_matrix
from ..dynamics.rotations import E3
from ..path.pathspec import Grid, discretize, requirements_at
from ..path.problem import ProblemInstance
from ..utils.consts import (ANCHOR_SCAN_POINTS, DEFAULT_SPEED_CAP, INTERVAL_TOL,
                           STEP_RESIDUAL_TOL)
from ..utils.errors import (Infeasible, InfeasibleBounds, LandmarkTooClose,
                            StepInfeasible)
from ..utils.general import get_logger_extras
from .attsmooth import RotationSchedule, smoothen, zb_from_profile

logger = logging.getLogger(__name__)


class Direction(Enum):
    BACKWARD = "backward"
    FORWARD = "forward"


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


EMPTY = Interval(math.inf, -math.inf)


@dataclass
class SquareSpeedProfile:
    """h per grid node, with the lower ends l of the final per-node intervals."""
    grid: Grid
    h: NDArray
    l: NDArray
    stage: int

    @property
    def s(self) -> NDArray:
        return self.grid.s

    @property
    def h_prime(self) -> NDArray:
        """Forward differences (h_{i+1} - h_i)/ds for i < n; the last node repeats the backward difference."""
        d = np.diff(self.h) / self.grid.ds
        return np.append(d, d[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.s, "h": self.h, "l": self.l})


class NodeConstraintSet:
    """
    Constraints of one step i -> i+1, stated over w = (h_i, h'_i) and cached over
    x = (h_i, h_{i+1}) as scalar quadratic forms for the closed-form reduction.
    """

    def __init__(self, index: int, constraints: Sequence[Soc2Constraint], box: Tuple[float, float], ds: float):
        self.index = index
        self.constraints = tuple(constraints)
        self.box = box
        self.ds = ds
        step = [c.in_step_coordinates(ds) for c in self.constraints]
        self._M = np.array([c.M for c in step])
        self._m = np.array([c.m for c in step])
        self._r = np.array([c.r for c in step])
        self._r0 = np.array([c.r0 for c in step])
        self._forms = (self._quadratic_forms(step, fixed=0), self._quadratic_forms(step, fixed=1))

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    @staticmethod
    def _quadratic_forms(step: List[Soc2Constraint], fixed: int) -> List[tuple]:
        free = 1 - fixed
        forms = []
        for c in step:
            cf, cg, m = c.M[:, free], c.M[:, fixed], c.m
            forms.append((float(cf @ cf), float(cf @ cg), float(cf @ m), float(cg @ cg), float(cg @ m),
                          float(m @ m), float(c.r[free]), float(c.r[fixed]), c.r0))
        return forms

    def residual(self, w) -> float:
        """Largest residual over all constraints at w = (h, h')."""
        return max(c.residual(w) for c in self.constraints)

    def step_residual(self, x) -> float:
        """Largest residual at x = (h_i, h_{i+1})."""
        x = np.asarray(x, dtype=float)
        lhs = np.linalg.norm(self._M @ x + self._m, axis=1)
        return float(np.max(lhs - (self._r @ x + self._r0)))

    def step_violation(self, x) -> float:
        """Largest residual at x = (h_i, h_{i+1}), each scaled by 1 + |right-hand side|."""
        x = np.asarray(x, dtype=float)
        rhs = self._r @ x + self._r0
        lhs = np.linalg.norm(self._M @ x + self._m, axis=1)
        return float(np.max((lhs - rhs) / (1.0 + np.abs(rhs))))

    def accepts(self, x) -> bool:
        return self.step_violation(x) <= STEP_RESIDUAL_TOL


def _scalar_soc_interval(A: float, B: float, C: float, p: float, q: float, scale: float) -> Interval:
    """{x : A x^2 + 2 B x + C <= 0 and p x + q >= 0} for the reduced cone ||a x + b|| <= p x + q."""
    lo, hi = -math.inf, math.inf
    if p > 0.0:
        lo = -q / p
    elif p < 0.0:
        hi = -q / p
    elif q < 0.0:
        return EMPTY

    if abs(A) <= 1e-13 * scale:
        if abs(B) <= 1e-13 * max(1.0, scale):
            return Interval(lo, hi) if C <= 1e-12 * max(1.0, q * q) else EMPTY
        root = -C / (2.0 * B)
        return Interval(lo, min(hi, root)) if B > 0.0 else Interval(max(lo, root), hi)

    disc = B * B - A * C
    if A > 0.0:
        if disc < 0.0:
            if disc < -1e-12 * (B * B + abs(A * C)):
                return EMPTY
            disc = 0.0
        r1, r2 = _roots(A, B, C, disc)
        return Interval(max(lo, r1), min(hi, r2))

    # ||a|| < |p|: one ray, on the side where p x + q grows
    if disc <= 0.0:
        return Interval(lo, hi)
    r1, r2 = _roots(A, B, C, disc)
    if p > 0.0:
        return Interval(max(lo, r2), hi)
    return Interval(lo, min(hi, r1))


def _roots(A: float, B: float, C: float, disc: float) -> Tuple[float, float]:
    """Ordered roots of A x^2 + 2 B x + C without cancellation."""
    t = -(B + math.copysign(math.sqrt(disc), B))
    if t == 0.0:
        return -B / A, -B / A
    x1, x2 = t / A, C / t
    return (x1, x2) if x1 <= x2 else (x2, x1)


def reduce_interval(constraints: NodeConstraintSet, which: int, value: float, box: Tuple[float, float]) -> Interval:
    """
    Fix coordinate `which` of x = (h_i, h_{i+1}) to `value` and return the interval of the
    other coordinate, within `box`, on which every constraint holds.
    """
    lo, hi = float(box[0]), float(box[1])
    v = float(value)
    for aa, ag, am, gg, gm, mm, pf, pg, r0 in constraints._forms[which]:
        q = pg * v + r0
        q += INTERVAL_TOL * (1.0 + abs(q))
        A = aa - pf * pf
        B = ag * v + am - pf * q
        C = gg * v * v + 2.0 * gm * v + mm - q * q
        seg = _scalar_soc_interval(A, B, C, pf, q, aa + pf * pf)
        lo, hi = max(lo, seg.lo), min(hi, seg.hi)
        if lo > hi:
            break
    if lo > hi:
        if lo - hi <= 1e-12 * max(1.0, abs(lo), abs(hi)):
            return Interval(hi, hi)
        return EMPTY
    return Interval(lo, hi)


def _bisect(feasible, good: float, target: float, eps_h: float) -> float:
    """Move from a feasible value toward target; returns the last feasible value found."""
    if feasible(target):
        return target
    bad = target
    while abs(bad - good) > eps_h:
        mid = 0.5 * (good + bad)
        if feasible(mid):
            good = mid
        else:
            bad = mid
    return good


def _find_anchor(constraints: NodeConstraintSet, obj: int, obj_box: Interval, other_box: Interval,
                 feasible, eps_h: float) -> float:
    mid = 0.5 * (obj_box.lo + obj_box.hi)
    for v in [obj_box.hi, obj_box.lo, mid, *np.linspace(obj_box.lo, obj_box.hi, ANCHOR_SCAN_POINTS)]:
        if feasible(float(v)):
            return float(v)

    other = 1 - obj
    for u in [other_box.lo, other_box.hi, *np.linspace(other_box.lo, other_box.hi, ANCHOR_SCAN_POINTS)]:
        found = reduce_interval(constraints, other, float(u), obj_box)
        if not found.empty:
            return found.hi

    if obj_box.hi > obj_box.lo:
        def pair(v, u):
            return (v, u) if obj == 0 else (u, v)

        def lowest_residual(v):
            inner = minimize_scalar(lambda u: constraints.step_residual(pair(v, u)),
                                    bounds=(other_box.lo, other_box.hi), method="bounded",
                                    options={"xatol": eps_h})
            return inner.fun

        outer = minimize_scalar(lowest_residual, bounds=(obj_box.lo, obj_box.hi), method="bounded",
                                options={"xatol": eps_h})
        if feasible(float(outer.x)):
            return float(outer.x)
    raise StepInfeasible(f"step {constraints.index} has no feasible pair")


def _tighten(feasible, found: Interval, eps_h: float) -> Tuple[float, float]:
    """
    Pull the ends of a backward interval inward until the forward reduction accepts them.
    The two reductions round differently near a cone root.
    """
    if feasible(found.lo) and feasible(found.hi):
        return found.lo, found.hi
    inner = next((v for v in (found.hi, found.lo, 0.5 * (found.lo + found.hi)) if feasible(v)), None)
    if inner is None:
        return found.lo, found.hi
    return _bisect(feasible, inner, found.lo, eps_h), _bisect(feasible, inner, found.hi, eps_h)


def _closest_pair(constraints: NodeConstraintSet, obj: int, obj_box: Interval, pinned: float,
                  eps_h: float) -> Tuple[float, float]:
    """Least-violating value of the free coordinate, kept only within STEP_RESIDUAL_TOL."""
    def pair(v):
        return (v, pinned) if obj == 0 else (pinned, v)

    candidates = [obj_box.lo, obj_box.hi]
    if obj_box.hi > obj_box.lo:
        best = minimize_scalar(lambda v: constraints.step_violation(pair(v)), bounds=(obj_box.lo, obj_box.hi),
                               method="bounded", options={"xatol": eps_h})
        candidates.append(float(best.x))
    v = min(candidates, key=lambda v: constraints.step_violation(pair(v)))
    if not constraints.accepts(pair(v)):
        raise StepInfeasible(f"step {constraints.index} has no feasible pair")
    logger.debug(msg=f"accepted near-boundary pair, violation {constraints.step_violation(pair(v)):.2e}",
                 extra=get_logger_extras(None, index=constraints.index))
    return v, v


def propagate(direction: Direction, node_constraints: NodeConstraintSet, interval_i: Tuple[float, float],
              interval_ip1: Tuple[float, float], eps_h: float) -> Tuple[float, float]:
    """
    Range of h_i (backward) or h_{i+1} (forward) over the step's feasible pairs with the
    other node restricted to its interval.

    Raises:
        StepInfeasible: no feasible pair exists
    """
    if direction is Direction.BACKWARD:
        obj, obj_box, other_box = 0, Interval(*map(float, interval_i)), Interval(*map(float, interval_ip1))
    else:
        obj, obj_box, other_box = 1, Interval(*map(float, interval_ip1)), Interval(*map(float, interval_i))
    if obj_box.empty or other_box.empty:
        raise StepInfeasible(f"step {node_constraints.index} received an empty interval")
    other = 1 - obj

    def feasible(v: float) -> bool:
        return not reduce_interval(node_constraints, obj, v, other_box).empty

    if other_box.hi <= other_box.lo:
        found = reduce_interval(node_constraints, other, other_box.lo, obj_box)
        if found.empty:
            return _closest_pair(node_constraints, obj, obj_box, other_box.lo, eps_h)
        if direction is Direction.FORWARD:
            return found.lo, found.hi
        return _tighten(feasible, found, eps_h)

    anchor = _find_anchor(node_constraints, obj, obj_box, other_box, feasible, eps_h)
    top = _bisect(feasible, anchor, obj_box.hi, eps_h)
    bottom = _bisect(feasible, anchor, obj_box.lo, eps_h)
    return bottom, top


def build_speed_bounds(instance: ProblemInstance, grid: Grid) -> Tuple[NDArray, NDArray]:
    """
    B_u from v_max (|v| = sqrt(h)|gamma'|) and the caps, B_l from speed floors, with both
    endpoints pinned to h_start and h_end.

    Raises:
        InfeasibleBounds: B_l > B_u somewhere, or a pinned value outside its bounds
    """
    cap = DEFAULT_SPEED_CAP if instance.h_cap is None else min(DEFAULT_SPEED_CAP, instance.h_cap)
    B_u = np.full(grid.n + 1, cap)
    if instance.v_max is not None:
        B_u = np.minimum(instance.v_max**2 / np.sum(grid.dgamma**2, axis=1), cap)
    B_l = np.zeros(grid.n + 1)
    tol = 1e-12 * max(1.0, grid.s[-1])
    for floor in instance.speed_floor:
        covered = (grid.s >= floor.s_range[0] - tol) & (grid.s <= floor.s_range[1] + tol)
        B_l[covered] = np.maximum(B_l[covered], floor.h_min)

    crossed = np.flatnonzero(B_l > B_u)
    if crossed.size:
        i = int(crossed[0])
        raise InfeasibleBounds(i, float(B_l[i]), float(B_u[i]))
    for i, pinned in ((0, instance.h_start), (grid.n, instance.h_end)):
        if pinned > B_u[i]:
            raise InfeasibleBounds(i, float(pinned), float(B_u[i]))
        if pinned < B_l[i]:
            raise InfeasibleBounds(i, float(B_l[i]), float(pinned))
        B_l[i] = B_u[i] = pinned
    return B_l, B_u


def constraint_cache(instance: ProblemInstance, grid: Grid, stage: int,
                     schedule: Optional[RotationSchedule] = None,
                     bounds: Optional[Tuple[NDArray, NDArray]] = None) -> List[NodeConstraintSet]:
    """
    Constraint sets for the steps i -> i+1, i = 0..n-1.

    Stage 1 holds visibility, attitude cone, thrust ball and the h box. Stage 2 adds the
    eight motor rows and the thrust-alignment slack around the scheduled body z axis.

    Raises:
        LandmarkTooClose: carrying the node index and landmark id
    """
    if stage not in (1, 2):
        raise ValueError(f"stage must be 1 or 2, got {stage}")
    if stage == 2 and schedule is None:
        raise ValueError("stage 2 needs a rotation schedule")
    B_l, B_u = bounds if bounds is not None else build_speed_bounds(instance, grid)
    quad, rig, g_vec = instance.quad, instance.rig, instance.quad.g_vec
    mixer = mixer_matrix(quad) if stage == 2 else None

    cache = []
    for i in range(grid.n):
        dg, ddg = grid.dgamma[i], grid.ddgamma[i]
        reqs = requirements_at(instance, float(grid.s[i]))
        constraints = []
        for lid in reqs.landmark_ids:
            try:
                constraints.append(fov_constraint(instance.landmarks[lid], grid.gamma[i], dg, ddg, grid.psi[i],
                                                  g_vec, rig.d, rig.alpha, label=f"fov:{lid}", yaw=rig.yaw))
            except LandmarkTooClose as e:
                raise LandmarkTooClose(str(e), index=i, landmark_id=lid) from e
        if reqs.has_attitude:
            constraints.append(attitude_cone_constraint(reqs.n, reqs.beta, dg, ddg, g_vec))
        constraints.append(thrust_ball_constraint(dg, ddg, g_vec, quad.c_total_max))
        constraints.append(Soc2Constraint.linear((1.0, 0.0), -B_l[i], label="h_min"))
        constraints.append(Soc2Constraint.linear((-1.0, 0.0), B_u[i], label="h_max"))
        if stage == 2:
            P, p = thrust_map(dg, ddg, g_vec)
            R = schedule.R[i]
            constraints.extend(motor_rows(P, p, R, schedule.gamma[i], schedule.dgamma[i], quad, mixer))
            constraints.append(nonholonomy_constraint(R @ E3, dg, ddg, g_vec, instance.eta))
        cache.append(NodeConstraintSet(i, constraints, (float(B_l[i]), float(B_u[i])), grid.ds))
    return cache


def backward_forward(instance: ProblemInstance, grid: Grid, stage: int,
                     schedule: Optional[RotationSchedule] = None) -> SquareSpeedProfile:
    """
    The backward sweep shrinks each node's interval to the values from which the end can
    still be reached; the forward sweep then takes the largest reachable h at every node.

    Raises:
        Infeasible: carrying stage, sweep phase and grid index
    """
    B_l, B_u = build_speed_bounds(instance, grid)
    cache = constraint_cache(instance, grid, stage, schedule, bounds=(B_l, B_u))
    l, h = B_l.copy(), B_u.copy()
    eps_h = instance.eps_h
    extras = get_logger_extras(instance, stage=stage)

    for i in range(grid.n - 1, -1, -1):
        try:
            l[i], h[i] = propagate(Direction.BACKWARD, cache[i], (l[i], h[i]), (l[i + 1], h[i + 1]), eps_h)
        except StepInfeasible:
            logger.info(msg=f"stage {stage} backward sweep infeasible at node {i}", extra={**extras, "node": i})
            raise Infeasible(stage, Direction.BACKWARD.value, i)

    for i in range(grid.n):
        try:
            l[i + 1], h[i + 1] = propagate(Direction.FORWARD, cache[i], (h[i], h[i]), (l[i + 1], h[i + 1]), eps_h)
        except StepInfeasible:
            logger.info(msg=f"stage {stage} forward sweep infeasible at node {i}", extra={**extras, "node": i})
            raise Infeasible(stage, Direction.FORWARD.value, i)

    logger.debug(msg=f"stage {stage} profile: max h {h.max():.6g}", extra=extras)
    return SquareSpeedProfile(grid=grid, h=h, l=l, stage=stage)


class Solution(NamedTuple):
    profile: SquareSpeedProfile
    schedule: RotationSchedule
    stage1_profile: SquareSpeedProfile


def solve(instance: ProblemInstance) -> Solution:
    """Stage-1 sweep, attitude smoothing, then the stage-2 sweep under actuation limits."""
    grid = discretize(instance)
    extras = get_logger_extras(instance)
    stage1 = backward_forward(instance, grid, stage=1)
    logger.info(msg="stage 1 complete", extra={**extras, "stage": 1})
    z_b = zb_from_profile(grid, stage1, instance.quad.g_vec)
    schedule = smoothen(grid, z_b, grid.psi, instance.sigma, yaw=instance.rig.yaw)
    logger.info(msg=f"smoothed body z with sigma={instance.sigma:.6g}", extra=extras)
    stage2 = backward_forward(instance, grid, stage=2, schedule=schedule)
    logger.info(msg="stage 2 complete", extra={**extras, "stage": 2})
    return Solution(profile=stage2, schedule=schedule, stage1_profile=stage1)
