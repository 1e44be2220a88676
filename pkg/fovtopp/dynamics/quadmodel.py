"""
File: dynamics/quadmodel.py
Description: quadrotor parameters, the motor mixer, and flatness-based recovery of
             attitude, body rates, torque and per-motor thrust along a path.

All quantities are mass-normalized: thrusts in m/s^2, inertia in m^2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..path.pathspec import psi_perp
from ..utils.consts import EPS_THRUST, GRAVITY
from ..utils.errors import DegenerateAttitude, ValidationError
from .rotations import E3, yaw_rotation

logger = logging.getLogger(__name__)


def _as_vector(value, name: str, size: int = 3) -> NDArray:
    try:
        arr = np.asarray(value, dtype=float).reshape(size)
    except (TypeError, ValueError):
        raise ValidationError(name, f"expected {size} numbers, got {value!r}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, "entries must be finite")
    return arr


@dataclass(frozen=True)
class QuadParams:
    """
    Physical parameters of the vehicle.

    Args:
        J: 3x3 symmetric positive-definite inertia divided by mass
        k_L: arm lever coefficient, scales roll/pitch torque
        k_M: drag-torque coefficient, scales yaw torque
        c_min, c_max: per-motor thrust bounds
        g_vec: world-frame gravity
    """
    J: NDArray
    k_L: float
    k_M: float
    c_min: float
    c_max: float
    g_vec: NDArray = field(default_factory=lambda: np.array(GRAVITY))

    def __post_init__(self):
        pre = "quad"
        try:
            J = np.asarray(self.J, dtype=float).reshape(3, 3)
        except (TypeError, ValueError):
            raise ValidationError(f"{pre}.J", "expected a 3x3 matrix")
        if not np.all(np.isfinite(J)):
            raise ValidationError(f"{pre}.J", "entries must be finite")
        if not np.allclose(J, J.T, rtol=1e-12, atol=1e-15):
            raise ValidationError(f"{pre}.J", "must be symmetric")
        if np.min(np.linalg.eigvalsh(J)) <= 0.0:
            raise ValidationError(f"{pre}.J", "must be positive definite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "g_vec", _as_vector(self.g_vec, f"{pre}.g_vec"))

        for name in ("k_L", "k_M", "c_min", "c_max"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValidationError(f"{pre}.{name}", "must be finite")
            object.__setattr__(self, name, value)
        if self.k_L <= 0.0:
            raise ValidationError(f"{pre}.k_L", f"must be > 0, got {self.k_L}")
        if self.k_M <= 0.0:
            raise ValidationError(f"{pre}.k_M", f"must be > 0, got {self.k_M}")
        if self.c_min < 0.0:
            raise ValidationError(f"{pre}.c_min", f"must be >= 0, got {self.c_min}")
        if self.c_min >= self.c_max:
            raise ValidationError(f"{pre}.c_max", f"c_min={self.c_min} must be < c_max={self.c_max}")

    @property
    def c_total_max(self) -> float:
        return 4.0 * self.c_max


@dataclass(frozen=True)
class Mixer:
    F: NDArray
    F_inv: NDArray


@dataclass(frozen=True)
class CameraRig:
    """
    Camera in the body x-y plane, its axis turned by yaw from body x, center offset d
    from the center of mass along that axis, cone half-angle alpha.
    """
    d: float
    alpha: float
    yaw: float = 0.0

    def __post_init__(self):
        d, alpha = float(self.d), float(self.alpha)
        if not np.isfinite(d) or d < 0.0:
            raise ValidationError("camera.d", f"must be >= 0, got {self.d}")
        if not (0.0 < alpha < np.pi / 2):
            raise ValidationError("camera.alpha", f"must lie in (0, pi/2), got {self.alpha}")
        yaw = float(self.yaw)
        if not (np.isfinite(yaw) and abs(yaw) <= np.pi):
            raise ValidationError("camera.yaw", f"must lie in [-pi, pi], got {self.yaw}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "yaw", yaw)


def mixer_matrix(params: QuadParams) -> Mixer:
    """
    Build the thrust/torque mixer. Rows of F are mutually orthogonal, so the inverse is
    F^T scaled by the inverse squared row norms.
    """
    kL, kM = params.k_L, params.k_M
    F = np.array([[1.0, 1.0, 1.0, 1.0],
                  [-kL, kL, kL, -kL],
                  [-kL, -kL, kL, kL],
                  [-kM, kM, -kM, kM]])
    F_inv = F.T @ np.diag([0.25, 0.25 / kL**2, 0.25 / kL**2, 0.25 / kM**2])
    return Mixer(F=F, F_inv=F_inv)


def attitude_from_thrust(c_vec: Sequence[float], psi: Sequence[float], yaw: float = 0.0) -> NDArray:
    """
    Recover the body frame from the thrust direction and the heading.

    With a camera yawed in the body x-y plane the heading steers the camera: the frame is
    built on the camera heading (psi turned by yaw about z_W) and then turned by -yaw about
    its own z axis, so R @ (cos yaw, sin yaw, 0) is the camera axis.

    Args:
        c_vec: world-frame thrust vector (acceleration minus gravity)
        psi: unit heading in the world x-y plane
        yaw: camera yaw offset (rad)

    Raises:
        DegenerateAttitude: thrust vanishes or is parallel to z_W x psi

    Returns:
        NDArray: rotation with columns (x_B, y_B, z_B)
    """
    c = np.asarray(c_vec, dtype=float)
    norm_c = np.linalg.norm(c)
    if norm_c <= EPS_THRUST:
        raise DegenerateAttitude(f"thrust norm {norm_c:.3e} below {EPS_THRUST}")
    heading = np.asarray(psi, dtype=float)
    if yaw != 0.0:
        heading = yaw_rotation(yaw) @ heading
    y_target = psi_perp(heading)
    x_dir = np.cross(y_target, c)
    if np.linalg.norm(x_dir) <= EPS_THRUST:
        raise DegenerateAttitude("thrust is parallel to the body-y target z_W x psi")
    z_b = c / norm_c
    x_b = np.cross(y_target, z_b)
    x_b /= np.linalg.norm(x_b)
    y_b = np.cross(z_b, x_b)
    R = np.column_stack([x_b, y_b, z_b])
    return R if yaw == 0.0 else R @ yaw_rotation(-yaw)


def body_rates(gamma_s: NDArray, h: float) -> NDArray:
    return np.asarray(gamma_s, dtype=float) * np.sqrt(max(h, 0.0))


def torque_map(gamma_s: NDArray, gamma_p_s: NDArray, J: NDArray) -> NDArray:
    """
    3x2 matrix T with torque = T @ (h, h') for fixed body-rate maps.

    omega = Gamma sqrt(h) and domega/dt = Gamma' h + Gamma h' / 2, so
    omega x J omega + J domega/dt is linear in (h, h').
    """
    g = np.asarray(gamma_s, dtype=float)
    gp = np.asarray(gamma_p_s, dtype=float)
    Jg = J @ g
    return np.column_stack([np.cross(g, Jg) + J @ gp, 0.5 * Jg])


def torque(gamma_s: NDArray, gamma_p_s: NDArray, h: float, h_prime: float, J: NDArray) -> NDArray:
    return torque_map(gamma_s, gamma_p_s, J) @ np.array([h, h_prime])


def motor_thrusts(c_par: float, tau: NDArray, mixer: Mixer) -> NDArray:
    return mixer.F_inv @ np.concatenate([[c_par], np.asarray(tau, dtype=float)])


def collective_thrust(R: NDArray, c_vec: NDArray) -> float:
    """Projection of the world thrust vector on body z."""
    return float((R @ E3) @ c_vec)
