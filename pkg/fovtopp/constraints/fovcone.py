"""
File: constraints/fovcone.py
Description: convex constraints on (h, h') for landmark visibility, attitude cones,
             total thrust and thrust-axis alignment, plus the purely geometric
             visibility test used to check them.

A landmark l is in view when the angle between l - (p + d x_C) and the camera axis x_C
is at most alpha. With x_C built from the thrust direction and the camera heading psi
(the heading turned by the camera yaw), this becomes
    chi ||psi_perp x c|| <= ((l - gamma) x psi_perp) . c
which is a second-order cone in the thrust c and therefore in (h, h').
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..dynamics.rotations import skew, yaw_rotation
from ..path.pathspec import psi_perp
from ..utils.errors import LandmarkTooClose
from .soc import Soc2Constraint, thrust_map


def chi(l_W: NDArray, gamma_s: NDArray, d: float, alpha: float) -> float:
    """
    Minimum projection of the landmark offset on x_B that keeps the landmark in view.

    Raises:
        LandmarkTooClose: landmark inside the camera-offset ball
    """
    dist_sq = float(np.sum((np.asarray(l_W, dtype=float) - np.asarray(gamma_s, dtype=float)) ** 2))
    sin_sq = math.sin(alpha) ** 2
    if not dist_sq > d * d * sin_sq or dist_sq < d * d:
        raise LandmarkTooClose(f"|l - gamma| = {math.sqrt(dist_sq):.6g} is too close for d={d}, alpha={alpha}")
    return d * sin_sq + math.cos(alpha) * math.sqrt(dist_sq - d * d * sin_sq)


@dataclass(frozen=True)
class FovTerm:
    v: NDArray
    chi: float
    u: NDArray


def camera_heading(psi: NDArray, yaw: float = 0.0) -> NDArray:
    """Heading turned by the camera yaw offset about z_W."""
    psi = np.asarray(psi, dtype=float)
    return psi if yaw == 0.0 else yaw_rotation(yaw) @ psi


def fov_term(l_W: NDArray, gamma_s: NDArray, psi: NDArray, d: float, alpha: float, yaw: float = 0.0) -> FovTerm:
    v = np.asarray(l_W, dtype=float) - np.asarray(gamma_s, dtype=float)
    return FovTerm(v=v, chi=chi(l_W, gamma_s, d, alpha), u=np.cross(v, psi_perp(camera_heading(psi, yaw))))


def fov_constraint(l_W, gamma_s, gamma_p_s, gamma_pp_s, psi, g_vec, d: float, alpha: float,
                   label: str = "fov", yaw: float = 0.0) -> Soc2Constraint:
    term = fov_term(l_W, gamma_s, psi, d, alpha, yaw)
    P, p = thrust_map(gamma_p_s, gamma_pp_s, g_vec)
    S = term.chi * skew(psi_perp(camera_heading(psi, yaw)))
    return Soc2Constraint(S @ P, S @ p, P.T @ term.u, float(p @ term.u), label)


def attitude_cone_constraint(n, beta: float, gamma_p_s, gamma_pp_s, g_vec,
                             label: str = "attitude") -> Soc2Constraint:
    """cos(beta) ||c|| <= n.c"""
    n = np.asarray(n, dtype=float)
    P, p = thrust_map(gamma_p_s, gamma_pp_s, g_vec)
    cb = math.cos(beta)
    return Soc2Constraint(cb * P, cb * p, P.T @ n, float(p @ n), label)


def thrust_ball_constraint(gamma_p_s, gamma_pp_s, g_vec, c_total_max: float,
                           label: str = "thrust") -> Soc2Constraint:
    P, p = thrust_map(gamma_p_s, gamma_pp_s, g_vec)
    return Soc2Constraint(P, p, np.zeros(2), c_total_max, label)


def nonholonomy_constraint(z_b, gamma_p_s, gamma_pp_s, g_vec, eta: float,
                           label: str = "nonholonomy") -> Soc2Constraint:
    """||z_B x c|| <= eta: the thrust may tilt away from the scheduled body z by a bounded amount."""
    P, p = thrust_map(gamma_p_s, gamma_pp_s, g_vec)
    Z = skew(np.asarray(z_b, dtype=float))
    return Soc2Constraint(Z @ P, Z @ p, np.zeros(2), eta, label)


def fov_angle(p_W: NDArray, R: NDArray, l_W: NDArray, d: float, yaw: float = 0.0) -> float:
    """Angle between the camera axis and the ray from the camera center to the landmark."""
    axis = np.asarray(R, dtype=float) @ np.array([math.cos(yaw), math.sin(yaw), 0.0])
    ray = np.asarray(l_W, dtype=float) - (np.asarray(p_W, dtype=float) + d * axis)
    if not np.any(ray):
        return math.pi
    return math.atan2(np.linalg.norm(np.cross(ray, axis)), float(ray @ axis))


def fov_predicate(p_W, R, l_W, d: float, alpha: float, yaw: float = 0.0) -> bool:
    return fov_angle(p_W, R, l_W, d, yaw) <= alpha


def cone_angle(n: NDArray, c_vec: NDArray) -> float:
    n = np.asarray(n, dtype=float)
    c = np.asarray(c_vec, dtype=float)
    return math.atan2(np.linalg.norm(np.cross(n, c)), float(n @ c))
