"""
File: output/trajout.py
Description: time reconstruction from a square-speed profile, trajectory sampling, and
             an independent geometric check of the sampled trajectory.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..constraints.fovcone import cone_angle, fov_angle
from ..dynamics.quadmodel import (attitude_from_thrust, body_rates, collective_thrust, mixer_matrix,
                                  motor_thrusts, torque)
from ..path.pathspec import Grid, discretize, eval_path, requirements_at
from ..path.problem import ProblemInstance
from ..solver.attsmooth import RotationSchedule
from ..solver.profilesolver import SquareSpeedProfile
from ..utils.consts import DEFAULT_EXACT_MARGIN_DEG, DEFAULT_MARGIN_DEG
from ..utils.errors import DegenerateAttitude, SingularProfile

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    t: NDArray
    s: NDArray
    position: NDArray
    velocity: NDArray
    acceleration: NDArray
    rotation: NDArray
    body_rates: NDArray
    motor_thrusts: NDArray
    total_time: float

    def __len__(self):
        return len(self.t)


def reconstruct_time(grid: Grid, profile: SquareSpeedProfile) -> Tuple[NDArray, float]:
    """
    Node timestamps under constant path acceleration per segment:
    dt_i = 2 ds / (sqrt(h_i) + sqrt(h_{i+1})).

    Raises:
        SingularProfile: a segment with zero speed at both ends
    """
    root_h = np.sqrt(np.maximum(np.asarray(profile.h, dtype=float), 0.0))
    denom = root_h[:-1] + root_h[1:]
    zero = np.flatnonzero(denom <= 0.0)
    if zero.size:
        raise SingularProfile(int(zero[0]))
    t = np.concatenate([[0.0], np.cumsum(2.0 * grid.ds / denom)])
    return t, float(t[-1])


class _NodeInputs:
    """Per-node thrust, collective thrust and motor commands implied by the profile."""

    def __init__(self, instance: ProblemInstance, grid: Grid, profile: SquareSpeedProfile,
                 schedule: RotationSchedule):
        self.h = np.asarray(profile.h, dtype=float)
        self.h_prime = profile.h_prime
        g_vec = instance.quad.g_vec
        self.acceleration = 0.5 * grid.dgamma * self.h_prime[:, None] + grid.ddgamma * self.h[:, None]
        mixer = mixer_matrix(instance.quad)
        motors = []
        for i in range(len(self.h)):
            c_par = collective_thrust(schedule.R[i], self.acceleration[i] - g_vec)
            tau = torque(schedule.gamma[i], schedule.dgamma[i], self.h[i], self.h_prime[i], instance.quad.J)
            motors.append(motor_thrusts(c_par, tau, mixer))
        self.motors = np.array(motors)


def node_trajectory(instance: ProblemInstance, grid: Grid, profile: SquareSpeedProfile,
                    schedule: RotationSchedule) -> Trajectory:
    """One sample per grid node, built from exactly the quantities the solver constrained."""
    t, total = reconstruct_time(grid, profile)
    inputs = _NodeInputs(instance, grid, profile, schedule)
    root_h = np.sqrt(np.maximum(inputs.h, 0.0))
    return Trajectory(t=t, s=grid.s.copy(), position=grid.gamma.copy(),
                      velocity=grid.dgamma * root_h[:, None],
                      acceleration=inputs.acceleration,
                      rotation=schedule.R.copy(),
                      body_rates=np.array([body_rates(g, h) for g, h in zip(schedule.gamma, inputs.h)]),
                      motor_thrusts=inputs.motors,
                      total_time=total)


def _output_times(total: float, dt: float) -> NDArray:
    times = np.arange(0.0, total, dt)
    if times.size and total - times[-1] <= 1e-9 * dt:
        times = times[:-1]
    return np.append(times, total)


def sample_trajectory(instance: ProblemInstance, grid: Grid, profile: SquareSpeedProfile,
                      schedule: RotationSchedule, dt: float) -> Trajectory:
    """
    Sample at a uniform dt plus both endpoints.

    Position, velocity and acceleration are evaluated at each sample's own s. Orientation
    comes from the nearest node. Motor thrusts are held from the start node of the
    segment the sample falls in.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    t_nodes, total = reconstruct_time(grid, profile)
    inputs = _NodeInputs(instance, grid, profile, schedule)
    h, h_prime, ds, n = inputs.h, inputs.h_prime, grid.ds, grid.n
    times = _output_times(total, dt)

    fields = {k: [] for k in ("s", "position", "velocity", "acceleration", "rotation", "body_rates", "motors")}
    for tau in times:
        k = min(max(int(np.searchsorted(t_nodes, tau, side="right")) - 1, 0), n - 1)
        local = tau - t_nodes[k]
        a_s = 0.5 * h_prime[k]
        s = grid.s[k] + math.sqrt(max(h[k], 0.0)) * local + 0.5 * a_s * local**2
        s = min(max(s, grid.s[k]), grid.s[k + 1])
        if tau == total:
            s = grid.s[-1]
        h_s = max(h[k] + h_prime[k] * (s - grid.s[k]), 0.0)
        point = eval_path(instance.path, s)
        nearest = min(int(round(s / ds)), n)
        fields["s"].append(s)
        fields["position"].append(point.gamma)
        fields["velocity"].append(point.dgamma * math.sqrt(h_s))
        fields["acceleration"].append(0.5 * point.dgamma * h_prime[k] + point.ddgamma * h_s)
        fields["rotation"].append(schedule.R[nearest])
        fields["body_rates"].append(body_rates(schedule.gamma[nearest], h_s))
        fields["motors"].append(inputs.motors[k])

    logger.debug(f"sampled {len(times)} points over T={total:.6g}s")
    return Trajectory(t=times, s=np.array(fields["s"]), position=np.array(fields["position"]),
                      velocity=np.array(fields["velocity"]), acceleration=np.array(fields["acceleration"]),
                      rotation=np.array(fields["rotation"]), body_rates=np.array(fields["body_rates"]),
                      motor_thrusts=np.array(fields["motors"]), total_time=total)


@dataclass
class VerificationReport:
    """
    Per-sample slacks (positive means satisfied) and violation counts. Angles are in
    radians; NaN marks a constraint that does not apply at that sample.
    """
    landmark_ids: List[Hashable]
    fov_slack: NDArray  # (N, L) on the sampled attitude
    fov_thrust_slack: NDArray  # (N, L) on the attitude implied by the thrust
    attitude_slack: NDArray  # (N,)
    thrust_slack: NDArray  # (N,)
    motor_slack: NDArray  # (N, 4)
    nonholonomy: NDArray  # (N,) on the sampled attitude and acceleration
    node_nonholonomy: NDArray  # (N,) at the segment-start node, NaN where the attitude is another node's
    eta: float
    margin_deg: float
    exact_margin_deg: float
    violations: dict = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    @property
    def max_fov_excess_deg(self) -> Optional[float]:
        """Largest (angle - alpha) in degrees on the sampled attitude; None without requirements."""
        if self.fov_slack.size == 0 or np.all(np.isnan(self.fov_slack)):
            return None
        return float(-np.degrees(np.nanmin(self.fov_slack)))

    def summary(self) -> dict:
        def nanmin(a):
            return None if a.size == 0 or np.all(np.isnan(a)) else float(np.nanmin(a))

        def nanmax(a):
            return None if a.size == 0 or np.all(np.isnan(a)) else float(np.nanmax(a))

        return {"violations": dict(self.violations),
                "total_violations": self.total_violations,
                "max_fov_excess_deg": self.max_fov_excess_deg,
                "min_fov_thrust_slack": nanmin(self.fov_thrust_slack),
                "min_attitude_slack": nanmin(self.attitude_slack),
                "min_thrust_slack": nanmin(self.thrust_slack),
                "min_motor_slack": nanmin(self.motor_slack),
                "max_nonholonomy": None if self.nonholonomy.size == 0 else float(np.max(self.nonholonomy)),
                "max_node_nonholonomy": nanmax(self.node_nonholonomy),
                "eta": self.eta,
                "margin_deg": self.margin_deg,
                "exact_margin_deg": self.exact_margin_deg}

    def to_dict(self) -> dict:
        def listed(a):
            return [None if isinstance(v, float) and math.isnan(v) else v for v in np.asarray(a).ravel().tolist()]

        n = len(self.thrust_slack)
        return {"summary": self.summary(),
                "landmark_ids": list(self.landmark_ids),
                "samples": {"fov_slack": [listed(row) for row in self.fov_slack.reshape(n, -1)],
                            "fov_thrust_slack": [listed(row) for row in self.fov_thrust_slack.reshape(n, -1)],
                            "attitude_slack": listed(self.attitude_slack),
                            "thrust_slack": listed(self.thrust_slack),
                            "motor_slack": [listed(row) for row in self.motor_slack],
                            "nonholonomy": listed(self.nonholonomy),
                            "node_nonholonomy": listed(self.node_nonholonomy)}}


def _segment_thrust(trajectory: Trajectory, instance: ProblemInstance, grid: Grid) -> Tuple[NDArray, NDArray]:
    """
    Segment-start node index of every sample and the thrust at that node, recovered from
    the sample's own velocity and acceleration (h' is constant along a segment).
    """
    k = np.clip(np.floor(trajectory.s / grid.ds + 1e-9).astype(int), 0, grid.n - 1)
    c_nodes = np.empty((len(trajectory), 3))
    for j, s in enumerate(trajectory.s):
        point = eval_path(instance.path, float(s))
        tangent_sq = float(point.dgamma @ point.dgamma)
        h_s = float(trajectory.velocity[j] @ trajectory.velocity[j]) / tangent_sq
        h_prime = 2.0 * float((trajectory.acceleration[j] - point.ddgamma * h_s) @ point.dgamma) / tangent_sq
        h_k = max(h_s - h_prime * (float(s) - grid.s[k[j]]), 0.0)
        c_nodes[j] = 0.5 * grid.dgamma[k[j]] * h_prime + grid.ddgamma[k[j]] * h_k - instance.quad.g_vec
    return k, c_nodes


def verify(trajectory: Trajectory, instance: ProblemInstance, margin_deg: float = DEFAULT_MARGIN_DEG,
           exact_margin_deg: float = DEFAULT_EXACT_MARGIN_DEG, thrust_tol: float = 1e-6) -> VerificationReport:
    """
    Re-check the requirements from raw geometry.

    The camera cone on the sampled attitude is judged at each sample within margin_deg.
    The exact checks (camera cone on the thrust-implied attitude, attitude cones, total
    thrust, thrust-axis deviation) are judged on the data of each sample's segment-start
    node, where the profile was constrained. Thrust-axis deviation is counted only where
    the sampled attitude is that node's. Motor thrusts are held per segment already.
    """
    quad, rig = instance.quad, instance.rig
    grid = discretize(instance)
    ids = list(instance.landmarks)
    column = {lid: j for j, lid in enumerate(ids)}
    N = len(trajectory)
    fov_slack = np.full((N, len(ids)), np.nan)
    fov_thrust_slack = np.full((N, len(ids)), np.nan)
    attitude_slack = np.full(N, np.nan)
    node_nonholonomy = np.full(N, np.nan)
    nodes, c_nodes = _segment_thrust(trajectory, instance, grid)
    thrust_slack = quad.c_total_max - np.linalg.norm(c_nodes, axis=1)
    motor_slack = np.minimum(trajectory.motor_thrusts - quad.c_min, quad.c_max - trajectory.motor_thrusts)
    z_axes = trajectory.rotation[:, :, 2]
    nonholonomy = np.linalg.norm(np.cross(z_axes, trajectory.acceleration - quad.g_vec), axis=1)
    own_attitude = np.rint(trajectory.s / grid.ds).astype(int) == nodes
    node_nonholonomy[own_attitude] = np.linalg.norm(np.cross(z_axes, c_nodes), axis=1)[own_attitude]

    for k in range(N):
        for lid in requirements_at(instance, float(trajectory.s[k])).landmark_ids:
            fov_slack[k, column[lid]] = rig.alpha - fov_angle(trajectory.position[k], trajectory.rotation[k],
                                                              instance.landmarks[lid], rig.d, rig.yaw)

        i = nodes[k]
        reqs = requirements_at(instance, float(grid.s[i]))
        if reqs.has_attitude:
            attitude_slack[k] = reqs.beta - cone_angle(reqs.n, c_nodes[k])
        if not reqs.landmark_ids:
            continue
        try:
            implied = attitude_from_thrust(c_nodes[k], grid.psi[i], rig.yaw)
        except DegenerateAttitude:
            implied = None
        for lid in reqs.landmark_ids:
            fov_thrust_slack[k, column[lid]] = (
                -math.pi if implied is None
                else rig.alpha - fov_angle(grid.gamma[i], implied, instance.landmarks[lid], rig.d, rig.yaw))

    margin, exact = math.radians(margin_deg), math.radians(exact_margin_deg)
    violations = {
        "fov": int(np.sum(fov_slack < -margin)),
        "fov_thrust": int(np.sum(fov_thrust_slack < -exact)),
        "attitude": int(np.sum(attitude_slack < -exact)),
        "thrust": int(np.sum(thrust_slack < -thrust_tol)),
        "motor": int(np.sum(motor_slack < -thrust_tol)),
        "nonholonomy": int(np.sum(node_nonholonomy > instance.eta + thrust_tol)),
    }
    report = VerificationReport(landmark_ids=ids, fov_slack=fov_slack, fov_thrust_slack=fov_thrust_slack,
                                attitude_slack=attitude_slack, thrust_slack=thrust_slack,
                                motor_slack=motor_slack, nonholonomy=nonholonomy,
                                node_nonholonomy=node_nonholonomy, eta=instance.eta,
                                margin_deg=margin_deg, exact_margin_deg=exact_margin_deg,
                                violations=violations)
    if report.total_violations:
        logger.warning(f"verification found violations: {violations}")
    return report
