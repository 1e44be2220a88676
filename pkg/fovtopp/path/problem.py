"""
File: path/problem.py
Description: the problem instance (path, landmarks, requirement windows, vehicle, solver
             settings) and ingestion of the JSON problem document.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Hashable, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..dynamics.quadmodel import CameraRig, QuadParams
from ..utils.consts import (DEFAULT_EPS_H, DEFAULT_ETA, DEFAULT_SIGMA_FRACTION,
                            GRAVITY)
from ..utils.errors import ParseError, ValidationError
from .pathspec import PathSpec, PolySegment

logger = logging.getLogger(__name__)

_MISSING = object()


@dataclass(frozen=True)
class VisibilityWindow:
    s_range: Tuple[float, float]
    ids: Tuple[Hashable, ...]


@dataclass(frozen=True)
class AttitudeWindow:
    s_range: Tuple[float, float]
    n: NDArray
    beta: float


@dataclass(frozen=True)
class SpeedFloor:
    s_range: Tuple[float, float]
    h_min: float


@dataclass(frozen=True)
class ProblemInstance:
    """
    Everything one solve needs. sigma defaults to a fraction of the path length; all
    other optional settings fall back to the package defaults in utils.consts.
    """
    path: PathSpec
    quad: QuadParams
    rig: CameraRig
    grid_n: int
    landmarks: Dict[Hashable, NDArray] = field(default_factory=dict)
    visibility: Tuple[VisibilityWindow, ...] = ()
    attitude: Tuple[AttitudeWindow, ...] = ()
    speed_floor: Tuple[SpeedFloor, ...] = ()
    v_max: Optional[float] = None
    h_start: float = 0.0
    h_end: float = 0.0
    h_cap: Optional[float] = None
    eta: float = DEFAULT_ETA
    sigma: Optional[float] = None
    eps_h: float = DEFAULT_EPS_H

    def __post_init__(self):
        object.__setattr__(self, "visibility", tuple(self.visibility))
        object.__setattr__(self, "attitude", tuple(self.attitude))
        object.__setattr__(self, "speed_floor", tuple(self.speed_floor))
        object.__setattr__(self, "landmarks",
                           {k: np.asarray(v, dtype=float).reshape(3) for k, v in self.landmarks.items()})
        if self.sigma is None:
            object.__setattr__(self, "sigma", DEFAULT_SIGMA_FRACTION * self.path.s_end)
        self._validate()

    def _validate(self):
        s_end = self.path.s_end
        tol = 1e-12 * max(1.0, s_end)

        def check_range(s_range, name):
            a, b = s_range
            if not (-tol <= a <= b <= s_end + tol):
                raise ValidationError(name, f"[{a}, {b}] must be ordered and lie within [0, {s_end}]")

        for k, window in enumerate(self.visibility):
            check_range(window.s_range, f"visibility[{k}].s_range")
            for lid in window.ids:
                if lid not in self.landmarks:
                    raise ValidationError(f"visibility[{k}].ids", f"unknown landmark id {lid!r}")
        for k, window in enumerate(self.attitude):
            check_range(window.s_range, f"attitude[{k}].s_range")
            if not (0.0 <= window.beta < math.pi / 2):
                raise ValidationError(f"attitude[{k}].beta", f"must lie in [0, pi/2), got {window.beta}")
            if not math.isclose(float(np.linalg.norm(window.n)), 1.0, rel_tol=1e-9):
                raise ValidationError(f"attitude[{k}].n", "must be a unit vector")
        for k, floor in enumerate(self.speed_floor):
            check_range(floor.s_range, f"speed_floor[{k}].s_range")
            if not floor.h_min >= 0.0:
                raise ValidationError(f"speed_floor[{k}].h_min", f"must be >= 0, got {floor.h_min}")

        if isinstance(self.grid_n, bool) or not isinstance(self.grid_n, (int, np.integer)) or self.grid_n < 2:
            raise ValidationError("solver.grid_n", f"must be an integer >= 2, got {self.grid_n!r}")
        for name in ("h_start", "h_end"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise ValidationError(f"solver.{name}", f"must be >= 0, got {value}")
        for name in ("eta", "sigma", "eps_h"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValidationError(f"solver.{name}", f"must be > 0, got {value}")
        for name in ("v_max", "h_cap"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0.0):
                raise ValidationError(f"solver.{name}", f"must be > 0 when given, got {value}")

    def with_overrides(self, **overrides) -> "ProblemInstance":
        """Copy with the given solver settings replaced; None values are ignored."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def solver_settings(self) -> dict:
        return {"grid_n": int(self.grid_n), "sigma": self.sigma, "eta": self.eta, "eps_h": self.eps_h,
                "v_max": self.v_max, "h_start": self.h_start, "h_end": self.h_end, "h_cap": self.h_cap}


class _DocumentReader:
    """Typed access into the decoded JSON with field paths and approximate line numbers."""

    def __init__(self, text: str):
        self.text = text

    def line_of(self, key: str) -> Optional[int]:
        pos = self.text.find(f'"{key}"')
        return self.text.count("\n", 0, pos) + 1 if pos >= 0 else None

    def fail(self, field_path: str, message: str) -> ParseError:
        key = field_path.split(".")[-1].split("[")[0]
        return ParseError(message, line=self.line_of(key), field=field_path)

    def get(self, obj: Any, key: str, field_path: str, default=_MISSING):
        if not isinstance(obj, dict):
            raise self.fail(field_path.rsplit(".", 1)[0], "expected an object")
        if key not in obj:
            if default is _MISSING:
                raise self.fail(field_path, "missing required field")
            return default
        return obj[key]

    def number(self, obj, key, field_path, default=_MISSING) -> Optional[float]:
        value = self.get(obj, key, field_path, default)
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(field_path, f"expected a number, got {value!r}")
        return float(value)

    def array(self, obj, key, field_path, shape=None) -> NDArray:
        value = self.get(obj, key, field_path)
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise self.fail(field_path, "expected a numeric array")
        if shape is not None and arr.shape != shape:
            raise self.fail(field_path, f"expected shape {shape}, got {arr.shape}")
        return arr

    def items(self, obj, key, field_path, default=_MISSING) -> list:
        value = self.get(obj, key, field_path, default)
        if not isinstance(value, list):
            raise self.fail(field_path, "expected a list")
        return value

    def s_range(self, obj, field_path) -> Tuple[float, float]:
        arr = self.array(obj, "s_range", f"{field_path}.s_range", shape=(2,))
        return float(arr[0]), float(arr[1])


def _read_pieces(reader: _DocumentReader, section: dict, name: str, coeff_key: str) -> list:
    pieces = []
    for k, seg in enumerate(reader.items(section, "segments", f"{name}.segments")):
        where = f"{name}.segments[{k}]"
        a, b = reader.s_range(seg, where)
        coeffs = reader.array(seg, coeff_key, f"{where}.{coeff_key}")
        if coeff_key == "gamma_coeffs":
            if coeffs.ndim != 2 or coeffs.shape[0] != 3 or coeffs.shape[1] < 1:
                raise reader.fail(f"{where}.{coeff_key}", f"expected a 3 x (deg+1) array, got shape {coeffs.shape}")
            coeffs = coeffs.T
        elif coeffs.ndim != 1 or coeffs.size < 1:
            raise reader.fail(f"{where}.{coeff_key}", "expected a flat list of coefficients")
        pieces.append(PolySegment(a, b, coeffs))
    return pieces


def _landmark_id(reader: _DocumentReader, value, field_path) -> Hashable:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise reader.fail(field_path, f"landmark ids must be integers or strings, got {value!r}")
    return value


def load_problem(document: str) -> ProblemInstance:
    """
    Parse and validate a problem document.

    Raises:
        ParseError: malformed JSON, missing fields or wrong types (with line and field)
        ValidationError: a well-typed document that violates an invariant

    Returns:
        ProblemInstance
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno)
    reader = _DocumentReader(document)
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", line=1)

    path_section = reader.get(doc, "path", "path")
    gamma_pieces = _read_pieces(reader, path_section, "path", "gamma_coeffs")
    if not gamma_pieces:
        raise ValidationError("path.segments", "at least one segment is required")
    s_end = gamma_pieces[-1].b
    heading_section = reader.get(doc, "heading", "heading", default=None)
    if heading_section is None:
        heading_pieces = [PolySegment(0.0, s_end, np.zeros(1))]
    else:
        heading_pieces = _read_pieces(reader, heading_section, "heading", "theta_coeffs")
    path = PathSpec(tuple(gamma_pieces), tuple(heading_pieces))
    irregular = path.irregular_points()
    if irregular:
        raise ValidationError("path.segments", f"|gamma'| vanishes near s={irregular[0]:.6g}")

    landmarks = {}
    for k, item in enumerate(reader.items(doc, "landmarks", "landmarks", default=[])):
        lid = _landmark_id(reader, reader.get(item, "id", f"landmarks[{k}].id"), f"landmarks[{k}].id")
        if lid in landmarks:
            raise ValidationError(f"landmarks[{k}].id", f"duplicate landmark id {lid!r}")
        landmarks[lid] = reader.array(item, "xyz", f"landmarks[{k}].xyz", shape=(3,))

    visibility = []
    for k, item in enumerate(reader.items(doc, "visibility", "visibility", default=[])):
        ids = tuple(_landmark_id(reader, v, f"visibility[{k}].ids")
                    for v in reader.items(item, "ids", f"visibility[{k}].ids"))
        visibility.append(VisibilityWindow(reader.s_range(item, f"visibility[{k}]"), ids))

    attitude = []
    for k, item in enumerate(reader.items(doc, "attitude", "attitude", default=[])):
        n = reader.array(item, "n", f"attitude[{k}].n", shape=(3,))
        norm = np.linalg.norm(n)
        if not norm > 0.0:
            raise ValidationError(f"attitude[{k}].n", "must be nonzero")
        beta = reader.number(item, "beta", f"attitude[{k}].beta")
        attitude.append(AttitudeWindow(reader.s_range(item, f"attitude[{k}]"), n / norm, beta))

    speed_floor = [SpeedFloor(reader.s_range(item, f"speed_floor[{k}]"),
                              reader.number(item, "h_min", f"speed_floor[{k}].h_min"))
                   for k, item in enumerate(reader.items(doc, "speed_floor", "speed_floor", default=[]))]

    quad_section = reader.get(doc, "quad", "quad")
    quad = QuadParams(J=reader.array(quad_section, "J", "quad.J", shape=(3, 3)),
                      k_L=reader.number(quad_section, "k_L", "quad.k_L"),
                      k_M=reader.number(quad_section, "k_M", "quad.k_M"),
                      c_min=reader.number(quad_section, "c_min", "quad.c_min"),
                      c_max=reader.number(quad_section, "c_max", "quad.c_max"),
                      g_vec=np.asarray(reader.get(quad_section, "gravity", "quad.gravity", default=list(GRAVITY)),
                                       dtype=float))

    camera_section = reader.get(doc, "camera", "camera", default={"d": 0.0, "alpha": math.pi / 4})
    rig = CameraRig(d=reader.number(camera_section, "d", "camera.d"),
                    alpha=reader.number(camera_section, "alpha", "camera.alpha"),
                    yaw=reader.number(camera_section, "yaw", "camera.yaw", default=0.0))

    solver = reader.get(doc, "solver", "solver")
    grid_n = reader.get(solver, "grid_n", "solver.grid_n")
    if isinstance(grid_n, bool) or not isinstance(grid_n, int):
        raise reader.fail("solver.grid_n", f"expected an integer, got {grid_n!r}")

    instance = ProblemInstance(
        path=path, quad=quad, rig=rig, grid_n=grid_n,
        landmarks=landmarks, visibility=tuple(visibility), attitude=tuple(attitude),
        speed_floor=tuple(speed_floor),
        v_max=reader.number(solver, "v_max", "solver.v_max", default=None),
        h_start=reader.number(solver, "h_start", "solver.h_start", default=0.0),
        h_end=reader.number(solver, "h_end", "solver.h_end", default=0.0),
        h_cap=reader.number(solver, "h_cap", "solver.h_cap", default=None),
        eta=reader.number(solver, "eta", "solver.eta", default=DEFAULT_ETA),
        sigma=reader.number(solver, "sigma", "solver.sigma", default=None),
        eps_h=reader.number(solver, "eps_h", "solver.eps_h", default=DEFAULT_EPS_H),
    )
    logger.info(f"loaded problem: S_end={s_end:.6g}, {len(landmarks)} landmarks, "
                f"{len(visibility)} visibility and {len(attitude)} attitude windows, grid_n={grid_n}")
    return instance
