"""
File: constraints/actuation.py
Description: per-motor thrust bounds as linear rows in (h, h'), given a scheduled
             attitude and body-rate maps.
"""
from __future__ import annotations

from typing import List

import numpy as np
from numpy.typing import NDArray

from ..dynamics.quadmodel import Mixer, QuadParams, torque_map
from ..dynamics.rotations import E3
from .soc import Soc2Constraint


def motor_rows(P: NDArray, p: NDArray, R: NDArray, gamma_s: NDArray, gamma_p_s: NDArray,
               quad: QuadParams, mixer: Mixer) -> List[Soc2Constraint]:
    """
    Eight rows c_min <= f_k <= c_max for f = F_inv (c_par, tau), where the collective
    thrust c_par = (R e3).c(w) and tau are both affine in w.
    """
    z_b = R @ E3
    wrench = np.vstack([z_b @ P, torque_map(gamma_s, gamma_p_s, quad.J)])  # 4x2
    wrench0 = np.array([z_b @ p, 0.0, 0.0, 0.0])
    G = mixer.F_inv @ wrench
    g0 = mixer.F_inv @ wrench0
    rows = []
    for k in range(4):
        rows.append(Soc2Constraint.linear(G[k], g0[k] - quad.c_min, label=f"motor{k + 1}_min"))
        rows.append(Soc2Constraint.linear(-G[k], quad.c_max - g0[k], label=f"motor{k + 1}_max"))
    return rows
