"""
File: constraints/soc.py
Description: the single constraint record used by every constraint family,
             ||M w + m|| <= r.w + r0 over w = (h, h'), and the affine thrust map it is
             built from.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray


def thrust_map(dgamma: NDArray, ddgamma: NDArray, g_vec: NDArray) -> Tuple[NDArray, NDArray]:
    """
    Affine pieces of the thrust vector c(w) = P w + p = gamma'' h + gamma' h'/2 - g.

    Returns:
        (P, p): P is 3x2 with columns multiplying h and h', p = -g
    """
    P = np.column_stack([np.asarray(ddgamma, dtype=float), 0.5 * np.asarray(dgamma, dtype=float)])
    return P, -np.asarray(g_vec, dtype=float)


def step_transform(ds: float) -> NDArray:
    """Maps (h_i, h_{i+1}) to (h_i, (h_{i+1} - h_i)/ds)."""
    return np.array([[1.0, 0.0], [-1.0 / ds, 1.0 / ds]])


@dataclass(frozen=True)
class Soc2Constraint:
    M: NDArray
    m: NDArray
    r: NDArray
    r0: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float).reshape(3, 2))
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float).reshape(3))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(2))
        object.__setattr__(self, "r0", float(self.r0))
        if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.m))
                and np.all(np.isfinite(self.r)) and np.isfinite(self.r0)):
            raise ValueError(f"constraint {self.label!r} has non-finite entries")

    @classmethod
    def linear(cls, r, r0: float, label: str = "") -> "Soc2Constraint":
        """0 <= r.w + r0."""
        return cls(np.zeros((3, 2)), np.zeros(3), r, r0, label)

    @property
    def is_linear(self) -> bool:
        return not (np.any(self.M) or np.any(self.m))

    def residual(self, w) -> NDArray | float:
        """||M w + m|| - (r.w + r0); <= 0 means satisfied. Accepts one pair or a (k, 2) batch."""
        w = np.asarray(w, dtype=float)
        lhs = np.linalg.norm(w @ self.M.T + self.m, axis=-1)
        out = lhs - (w @ self.r + self.r0)
        return float(out) if out.ndim == 0 else out

    def is_satisfied(self, w, tol: float = 0.0):
        return self.residual(w) <= tol

    def in_step_coordinates(self, ds: float) -> "Soc2Constraint":
        """The same set expressed over x = (h_i, h_{i+1}) with h' = (h_{i+1} - h_i)/ds."""
        T = step_transform(ds)
        return Soc2Constraint(self.M @ T, self.m, T.T @ self.r, self.r0, self.label)
