"""
File: path/pathspec.py
Description: piecewise-polynomial path and heading, derivative queries, the uniform
             grid the solver works on, and per-point requirement lookup.

Coefficients are ascending powers in (s - a) for a segment starting at a.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import NDArray
from ordered_set import OrderedSet

from ..utils.consts import DEFAULT_BETA, EPS_CONTINUITY, EPS_REGULAR
from ..utils.errors import IrregularPath, OutOfRange, ValidationError

if TYPE_CHECKING:
    from .problem import ProblemInstance

logger = logging.getLogger(__name__)

Z_WORLD = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class PolySegment:
    a: float
    b: float
    coeffs: NDArray  # (deg+1, dim)
    d1: NDArray = field(init=False, repr=False)
    d2: NDArray = field(init=False, repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "d1", P.polyder(coeffs, 1, axis=0))
        object.__setattr__(self, "d2", P.polyder(coeffs, 2, axis=0))

    def evaluate(self, s: float) -> Tuple[NDArray, NDArray, NDArray]:
        x = s - self.a
        return P.polyval(x, self.coeffs), P.polyval(x, self.d1), P.polyval(x, self.d2)


class PathPoint(NamedTuple):
    gamma: NDArray
    dgamma: NDArray
    ddgamma: NDArray
    psi: NDArray
    dpsi: NDArray
    ddpsi: NDArray


def _check_pieces(pieces: Sequence[PolySegment], name: str, s_end: float) -> None:
    if not pieces:
        raise ValidationError(f"{name}.segments", "at least one segment is required")
    scale = max(1.0, abs(s_end))
    if abs(pieces[0].a) > 1e-12 * scale:
        raise ValidationError(f"{name}.segments[0].s_range", f"must start at 0, starts at {pieces[0].a}")
    for k, piece in enumerate(pieces):
        if not piece.b > piece.a:
            raise ValidationError(f"{name}.segments[{k}].s_range", f"empty interval [{piece.a}, {piece.b}]")
        if not np.all(np.isfinite(piece.coeffs)):
            raise ValidationError(f"{name}.segments[{k}]", "coefficients must be finite")
    for k in range(1, len(pieces)):
        prev, cur = pieces[k - 1], pieces[k]
        if abs(prev.b - cur.a) > 1e-12 * scale:
            raise ValidationError(f"{name}.segments[{k}].s_range",
                                  f"not contiguous: previous ends at {prev.b}, this starts at {cur.a}")
        left = prev.evaluate(cur.a)
        right = cur.evaluate(cur.a)
        for order, (u, v) in enumerate(zip(left, right)):
            if np.any(np.abs(u - v) > EPS_CONTINUITY * (1.0 + np.abs(u))):
                raise ValidationError(f"{name}.segments[{k}]",
                                      f"derivative of order {order} jumps at s={cur.a}")


@dataclass(frozen=True)
class PathSpec:
    """
    Position gamma(s) in R^3 and heading angle theta(s), each piecewise polynomial and C2.
    The two may use different breakpoints but must cover the same [0, s_end].
    """
    gamma_pieces: Tuple[PolySegment, ...]
    heading_pieces: Tuple[PolySegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "gamma_pieces", tuple(self.gamma_pieces))
        object.__setattr__(self, "heading_pieces", tuple(self.heading_pieces))
        s_end = self.gamma_pieces[-1].b if self.gamma_pieces else 0.0
        _check_pieces(self.gamma_pieces, "path", s_end)
        _check_pieces(self.heading_pieces, "heading", s_end)
        for k, piece in enumerate(self.gamma_pieces):
            if piece.coeffs.shape[1] != 3:
                raise ValidationError(f"path.segments[{k}].gamma_coeffs", "expected 3 rows (x, y, z)")
        for k, piece in enumerate(self.heading_pieces):
            if piece.coeffs.shape[1] != 1:
                raise ValidationError(f"heading.segments[{k}].theta_coeffs", "expected one coefficient row")
        if abs(self.heading_pieces[-1].b - s_end) > 1e-12 * max(1.0, s_end):
            raise ValidationError("heading.segments", f"must end at {s_end}, ends at {self.heading_pieces[-1].b}")
        object.__setattr__(self, "_gamma_starts", np.array([p.a for p in self.gamma_pieces]))
        object.__setattr__(self, "_heading_starts", np.array([p.a for p in self.heading_pieces]))

    @property
    def s_end(self) -> float:
        return self.gamma_pieces[-1].b

    @staticmethod
    def _piece(pieces, starts, s):
        k = int(np.searchsorted(starts, s, side="right")) - 1
        return pieces[min(max(k, 0), len(pieces) - 1)]

    def gamma_at(self, s: float) -> Tuple[NDArray, NDArray, NDArray]:
        return self._piece(self.gamma_pieces, self._gamma_starts, s).evaluate(s)

    def theta_at(self, s: float) -> Tuple[float, float, float]:
        th, dth, ddth = self._piece(self.heading_pieces, self._heading_starts, s).evaluate(s)
        return float(th[0]), float(dth[0]), float(ddth[0])

    def irregular_points(self, samples_per_segment: int = 64) -> list:
        """Sample |gamma'| densely and return the s values where it drops to EPS_REGULAR."""
        bad = []
        for piece in self.gamma_pieces:
            for s in np.linspace(piece.a, piece.b, samples_per_segment):
                if np.linalg.norm(piece.evaluate(s)[1]) <= EPS_REGULAR:
                    bad.append(float(s))
        return bad


def psi_perp(psi: NDArray) -> NDArray:
    """z_W x psi; for a unit heading in the x-y plane the result is a unit vector orthogonal to it."""
    return np.array([-psi[1], psi[0], 0.0])


def eval_path(spec: PathSpec, s: float) -> PathPoint:
    """
    Evaluate position, heading and their first two derivatives with respect to s.

    Raises:
        OutOfRange: s outside [0, s_end]
    """
    tol = 1e-12 * max(1.0, spec.s_end)
    if not (-tol <= s <= spec.s_end + tol):
        raise OutOfRange(s, spec.s_end)
    s = min(max(s, 0.0), spec.s_end)
    gamma, dgamma, ddgamma = spec.gamma_at(s)
    th, dth, ddth = spec.theta_at(s)
    psi = np.array([np.cos(th), np.sin(th), 0.0])
    perp = psi_perp(psi)
    dpsi = dth * perp
    ddpsi = ddth * perp - dth**2 * psi
    return PathPoint(gamma, dgamma, ddgamma, psi, dpsi, ddpsi)


@dataclass(frozen=True)
class Grid:
    """Uniform grid s_0 = 0 < ... < s_n = S_end with path data cached per node."""
    s: NDArray
    ds: float
    gamma: NDArray
    dgamma: NDArray
    ddgamma: NDArray
    psi: NDArray
    psi_perp: NDArray

    @property
    def n(self) -> int:
        return len(self.s) - 1


def discretize(instance: "ProblemInstance") -> Grid:
    spec, n = instance.path, instance.grid_n
    s_end = spec.s_end
    ds = s_end / n
    s_values = np.linspace(0.0, s_end, n + 1)
    points = [eval_path(spec, float(s)) for s in s_values]
    dgamma = np.array([p.dgamma for p in points])
    speed = np.linalg.norm(dgamma, axis=1)
    bad = np.flatnonzero(speed <= EPS_REGULAR)
    if bad.size:
        i = int(bad[0])
        raise IrregularPath(i, float(s_values[i]), float(speed[i]))
    psi = np.array([p.psi for p in points])
    grid = Grid(s=s_values, ds=ds,
                gamma=np.array([p.gamma for p in points]),
                dgamma=dgamma,
                ddgamma=np.array([p.ddgamma for p in points]),
                psi=psi,
                psi_perp=np.array([psi_perp(v) for v in psi]))
    logger.debug(f"discretized S_end={s_end:.6g} into {n} steps of {ds:.6g}")
    return grid


class Requirements(NamedTuple):
    landmark_ids: OrderedSet
    n: NDArray
    beta: float
    has_attitude: bool


def _covers(s_range, s: float, tol: float) -> bool:
    return s_range[0] - tol <= s <= s_range[1] + tol


def requirements_at(instance: "ProblemInstance", s: float) -> Requirements:
    """
    Landmarks that must be visible at s (union over all covering visibility windows,
    in document order) and the attitude cone that applies there. Windows are closed.
    When several attitude windows cover s the first one listed wins.
    """
    tol = 1e-12 * max(1.0, instance.path.s_end)
    ids = OrderedSet()
    for window in instance.visibility:
        if _covers(window.s_range, s, tol):
            ids.update(window.ids)
    for window in instance.attitude:
        if _covers(window.s_range, s, tol):
            return Requirements(ids, window.n, window.beta, True)
    return Requirements(ids, Z_WORLD, DEFAULT_BETA, False)
