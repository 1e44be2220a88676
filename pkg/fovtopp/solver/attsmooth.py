"""
File: solver/attsmooth.py
Description: smoothing of the stage-1 thrust directions into a rotation schedule
             R(s), R'(s), R''(s) with body-rate maps Gamma = vee(skew(R^T R')) and Gamma'.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import convolve1d

from ..dynamics.quadmodel import attitude_from_thrust
from ..dynamics.rotations import skew_part, vee
from ..path.pathspec import Grid
from ..utils.consts import EPS_THRUST, KERNEL_CUTOFF, SMOOTHING_MIN_NORM
from ..utils.errors import DegenerateAttitude, DegenerateThrust, SmoothingDegenerate

if TYPE_CHECKING:
    from .profilesolver import SquareSpeedProfile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RotationSchedule:
    R: NDArray  # (n+1, 3, 3)
    dR: NDArray
    ddR: NDArray
    gamma: NDArray  # (n+1, 3)
    dgamma: NDArray
    sigma: float
    z_b: NDArray


def gaussian_weights(ds: float, sigma: float, deriv_order: int = 0) -> NDArray:
    """
    Sampled Gaussian (or its first/second derivative) on [-4 sigma, 4 sigma], trapezoid
    weighted and divided by the discrete mass of the order-0 kernel.

    The derivative kernels use the discrete moments m2, m4 of the order-0 kernel in
    place of sigma^2 and 3 sigma^4, so they are exact on linear and quadratic fields
    despite the truncation.
    """
    if deriv_order not in (0, 1, 2):
        raise ValueError(f"deriv_order must be 0, 1 or 2, got {deriv_order}")
    half = max(1, int(math.ceil(KERNEL_CUTOFF * sigma / ds)))
    x = np.arange(-half, half + 1) * ds
    base = np.exp(-0.5 * (x / sigma) ** 2)
    base[0] *= 0.5
    base[-1] *= 0.5
    base /= base.sum()
    if deriv_order == 0:
        return base
    m2 = float(np.sum(x**2 * base))
    if deriv_order == 1:
        return -x / m2 * base
    m4 = float(np.sum(x**4 * base))
    return 2.0 * (x**2 - m2) / (m4 - m2**2) * base


def gaussian_convolve(samples: NDArray, ds: float, sigma: float, deriv_order: int = 0) -> NDArray:
    """Convolve along the grid axis with replicated end samples."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        raise ValueError("need at least two samples")
    return convolve1d(samples, gaussian_weights(ds, sigma, deriv_order), axis=0, mode="nearest")


def smoothen(grid: Grid, z_samples: NDArray, psi_samples: NDArray, sigma: float,
             yaw: float = 0.0) -> RotationSchedule:
    """
    yaw is the camera yaw offset handed to attitude_from_thrust.

    Raises:
        SmoothingDegenerate: the smoothed field nearly cancels, or the attitude is undefined
    """
    z_tilde = gaussian_convolve(z_samples, grid.ds, sigma, 0)
    norms = np.linalg.norm(z_tilde, axis=1)
    weak = np.flatnonzero(norms < SMOOTHING_MIN_NORM)
    if weak.size:
        i = int(weak[0])
        raise SmoothingDegenerate(i, f"smoothed body z has norm {norms[i]:.3e}")
    z_hat = z_tilde / norms[:, None]

    R = np.empty((len(z_hat), 3, 3))
    for i, (z, psi) in enumerate(zip(z_hat, psi_samples)):
        try:
            R[i] = attitude_from_thrust(z, psi, yaw)
        except DegenerateAttitude as e:
            raise SmoothingDegenerate(i, str(e)) from e

    dR = np.gradient(R, grid.ds, axis=0)
    ddR = np.gradient(dR, grid.ds, axis=0)
    gamma = np.array([vee(skew_part(Ri.T @ dRi)) for Ri, dRi in zip(R, dR)])
    dgamma = np.gradient(gamma, grid.ds, axis=0)
    logger.debug(f"rotation schedule: max |Gamma| {np.max(np.linalg.norm(gamma, axis=1)):.4g} 1/m")
    return RotationSchedule(R=R, dR=dR, ddR=ddR, gamma=gamma, dgamma=dgamma, sigma=sigma, z_b=z_hat)


def zb_from_profile(grid: Grid, profile: "SquareSpeedProfile", g_vec: NDArray) -> NDArray:
    """
    Unit thrust directions at every node from the profile's finite-difference h'.

    Raises:
        DegenerateThrust: the thrust vector vanishes at a node
    """
    h = np.asarray(profile.h, dtype=float)
    h_prime = np.diff(h) / grid.ds
    h_prime = np.append(h_prime, h_prime[-1])
    c = 0.5 * grid.dgamma * h_prime[:, None] + grid.ddgamma * h[:, None] - np.asarray(g_vec, dtype=float)
    norms = np.linalg.norm(c, axis=1)
    weak = np.flatnonzero(norms < EPS_THRUST)
    if weak.size:
        i = int(weak[0])
        raise DegenerateThrust(i, float(norms[i]))
    return c / norms[:, None]
