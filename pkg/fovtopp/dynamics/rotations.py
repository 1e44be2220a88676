"""
File: dynamics/rotations.py
Description: small SO(3) helpers. Quaternions are scalar-first (w, x, y, z) with w >= 0.
"""
import numpy as np
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

E3 = np.array([0.0, 0.0, 1.0])


def skew(v: NDArray) -> NDArray:
    """[v]x such that skew(v) @ u == cross(v, u)."""
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def vee(S: NDArray) -> NDArray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def skew_part(A: NDArray) -> NDArray:
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def orthonormality_error(R: NDArray) -> float:
    return float(np.max(np.abs(R.T @ R - np.eye(3))))


def to_quaternion(R: NDArray) -> NDArray:
    """
    Convert one rotation matrix or a stack of them to scalar-first unit quaternions.

    Args:
        R (NDArray): (3, 3) or (N, 3, 3)

    Returns:
        NDArray: (4,) or (N, 4) as (w, x, y, z), sign fixed so that w >= 0
    """
    xyzw = Rotation.from_matrix(R).as_quat()
    wxyz = np.roll(xyzw, 1, axis=-1)
    sign = np.where(wxyz[..., :1] < 0.0, -1.0, 1.0)
    return wxyz * sign


def from_quaternion(q: NDArray) -> NDArray:
    """Inverse of to_quaternion. Accepts (4,) or (N, 4) scalar-first quaternions."""
    xyzw = np.roll(np.asarray(q, dtype=float), -1, axis=-1)
    return Rotation.from_quat(xyzw).as_matrix()


def yaw_rotation(angle: float) -> NDArray:
    """Rotation by angle (rad) about the z axis."""
    return Rotation.from_euler("z", angle).as_matrix()
