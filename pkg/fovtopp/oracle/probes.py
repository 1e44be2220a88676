"""
File: oracle/probes.py
Description: randomized probes: convexity of constraint sets in (h, h') and agreement
             of the visibility and attitude cones with their geometric definitions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..constraints.fovcone import attitude_cone_constraint, cone_angle, fov_angle, fov_constraint
from ..constraints.soc import thrust_map
from ..dynamics.quadmodel import attitude_from_thrust
from ..utils.consts import (BOUNDARY_BAND_RAD, CONVEXITY_RESIDUAL_TOL, GRAVITY)
from ..utils.errors import DegenerateAttitude, LandmarkTooClose, SamplingExhausted

logger = logging.getLogger(__name__)

DEFAULT_PROBE_BOX = ((0.0, 50.0), (-100.0, 100.0))


@dataclass
class ConvexityResult:
    convex: bool
    trials: int
    counterexample: Optional[Tuple[NDArray, NDArray, float]] = None


def _max_residual(members, W: NDArray) -> NDArray:
    return np.max(np.stack([np.broadcast_to(c.residual(W), W.shape[:-1]) for c in members]), axis=0)


def convexity_probe(constraints: Iterable, trials: int, box: Tuple[Tuple[float, float], Tuple[float, float]] = DEFAULT_PROBE_BOX,
                    rng: Optional[np.random.Generator] = None, max_draws: int = 100_000) -> ConvexityResult:
    """
    Draw feasible pairs w = (h, h') by rejection inside `box`, then test midpoints and
    random convex combinations of them. Anything exposing residual(w) <= 0 works as a member.

    Raises:
        SamplingExhausted: no feasible point in max_draws draws
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = rng if rng is not None else np.random.default_rng(0)
    members = list(constraints)
    lo = np.array([box[0][0], box[1][0]])
    hi = np.array([box[0][1], box[1][1]])

    feasible, draws = [], 0
    while draws < max_draws and sum(len(f) for f in feasible) < 2 * trials:
        batch = min(4096, max_draws - draws)
        W = rng.uniform(lo, hi, size=(batch, 2))
        draws += batch
        feasible.append(W[_max_residual(members, W) <= 0.0])
    points = np.concatenate(feasible)
    if len(points) == 0:
        raise SamplingExhausted(f"no feasible point in {draws} draws")

    first = points[rng.integers(len(points), size=trials)]
    second = points[rng.integers(len(points), size=trials)]
    lam = rng.uniform(size=trials)
    lam[::2] = 0.5
    mixed = lam[:, None] * first + (1.0 - lam[:, None]) * second
    bad = np.flatnonzero(_max_residual(members, mixed) > CONVEXITY_RESIDUAL_TOL)
    if bad.size:
        k = int(bad[0])
        return ConvexityResult(False, k + 1, (first[k], second[k], float(lam[k])))
    return ConvexityResult(True, trials)


@dataclass
class AgreementStats:
    agree: int = 0
    disagree: int = 0
    band: int = 0
    skipped: int = 0
    satisfied: int = 0

    def record(self, conic: bool, geometric: bool, angle_gap: float):
        if abs(angle_gap) < BOUNDARY_BAND_RAD:
            self.band += 1
        elif conic == geometric:
            self.agree += 1
            self.satisfied += int(geometric)
        else:
            self.disagree += 1


@dataclass
class EquivalenceStats:
    trials: int
    fov: AgreementStats = field(default_factory=AgreementStats)
    attitude: AgreementStats = field(default_factory=AgreementStats)

    @property
    def disagreements(self) -> int:
        return self.fov.disagree + self.attitude.disagree

    def to_dict(self) -> dict:
        return {"trials": self.trials, "fov": vars(self.fov), "attitude": vars(self.attitude)}


def _unit(rng: np.random.Generator) -> NDArray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def equivalence_probe(trials: int, seed: int = 0, alpha: Optional[float] = None, d: Optional[float] = None,
                      g_vec=GRAVITY, yaw: float = 0.0) -> EquivalenceStats:
    """
    Compare the visibility and attitude cones in (h, h') with the angle conditions they
    encode, on random path data, landmarks, camera settings and (h, h') pairs.
    Half the landmarks are placed near the camera axis so both outcomes are exercised.
    yaw fixes the camera yaw offset for every trial.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    g_vec = np.asarray(g_vec, dtype=float)
    stats = EquivalenceStats(trials=trials)
    for _ in range(trials):
        gamma = rng.normal(scale=3.0, size=3)
        dgamma = _unit(rng) * rng.uniform(0.3, 2.0)
        ddgamma = rng.normal(scale=0.5, size=3)
        theta = rng.uniform(-math.pi, math.pi)
        psi = np.array([math.cos(theta), math.sin(theta), 0.0])
        w = np.array([rng.uniform(0.0, 30.0), rng.uniform(-40.0, 40.0)])
        a_fov = alpha if alpha is not None else rng.uniform(0.05, math.pi / 2 - 0.05)
        d_fov = d if d is not None else rng.uniform(0.0, 0.5)
        P, p = thrust_map(dgamma, ddgamma, g_vec)
        c = P @ w + p

        try:
            R = attitude_from_thrust(c, psi, yaw)
        except DegenerateAttitude:
            stats.fov.skipped += 1
        else:
            if rng.uniform() < 0.5:
                direction = _unit(rng)
            else:
                axis = R @ np.array([math.cos(yaw), math.sin(yaw), 0.0])
                direction = axis + 1.5 * math.tan(a_fov) * rng.uniform() * _unit(rng)
                direction /= np.linalg.norm(direction)
            l_W = gamma + direction * rng.uniform(0.5, 30.0)
            try:
                K = fov_constraint(l_W, gamma, dgamma, ddgamma, psi, g_vec, d_fov, a_fov, yaw=yaw)
            except LandmarkTooClose:
                stats.fov.skipped += 1
            else:
                angle = fov_angle(gamma, R, l_W, d_fov, yaw)
                stats.fov.record(K.residual(w) <= 0.0, angle <= a_fov, angle - a_fov)

        n = _unit(rng)
        beta = rng.uniform(0.0, math.pi / 2 - 1e-3)
        if np.linalg.norm(c) <= 1e-9:
            stats.attitude.skipped += 1
            continue
        K = attitude_cone_constraint(n, beta, dgamma, ddgamma, g_vec)
        angle = cone_angle(n, c)
        stats.attitude.record(K.residual(w) <= 0.0, angle <= beta, angle - beta)

    logger.info(f"equivalence probe: {stats.to_dict()}")
    return stats
