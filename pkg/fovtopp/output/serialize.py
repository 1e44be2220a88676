"""
File: output/serialize.py
Description: trajectory and profile documents (json, csv) and their parsers.
"""
from __future__ import annotations

import io
import json
import logging
import os
from os import PathLike
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..dynamics.rotations import from_quaternion, to_quaternion
from ..utils.errors import IoError, ParseError, ValidationError
from ..utils.general import create_dirs
from .trajout import Trajectory, VerificationReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "s", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az",
               "qw", "qx", "qy", "qz", "wx", "wy", "wz", "c1", "c2", "c3", "c4"]
FORMATS = ("json", "csv")
FLOAT_FORMAT = "%.17g"


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    data = np.column_stack([trajectory.t, trajectory.s, trajectory.position, trajectory.velocity,
                            trajectory.acceleration, to_quaternion(trajectory.rotation),
                            trajectory.body_rates, trajectory.motor_thrusts])
    return pd.DataFrame(data, columns=CSV_COLUMNS)


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def serialize(trajectory: Trajectory, report: Optional[VerificationReport], format: str) -> str:
    """
    json: {"total_time", "samples": [{column: value}], "report": {...}}; csv: one row per
    sample with the CSV_COLUMNS header. The csv form carries no report.
    """
    if format not in FORMATS:
        raise ValidationError("format", f"must be one of {FORMATS}, got {format!r}")
    frame = trajectory_frame(trajectory)
    if format == "csv":
        return frame_to_csv(frame)
    document = {"total_time": trajectory.total_time,
                "samples": frame.to_dict(orient="records"),
                "report": report.to_dict() if report is not None else {}}
    return json.dumps(document, indent=1)


def _trajectory_from_frame(frame: pd.DataFrame, total_time: Optional[float] = None) -> Trajectory:
    if list(frame.columns) != CSV_COLUMNS:
        raise ParseError(f"expected columns {','.join(CSV_COLUMNS)}, got {','.join(map(str, frame.columns))}",
                         line=1)
    try:
        values = frame.to_numpy(dtype=float)
    except (TypeError, ValueError) as e:
        raise ParseError(f"non-numeric sample value: {e}")
    if len(values) == 0:
        raise ParseError("trajectory has no samples")
    return Trajectory(t=values[:, 0], s=values[:, 1], position=values[:, 2:5], velocity=values[:, 5:8],
                      acceleration=values[:, 8:11], rotation=from_quaternion(values[:, 11:15]),
                      body_rates=values[:, 15:18], motor_thrusts=values[:, 18:22],
                      total_time=float(values[-1, 0]) if total_time is None else float(total_time))


def parse_trajectory(document: str, format: str) -> Tuple[Trajectory, dict]:
    """
    Read a document written by serialize.

    Returns:
        (Trajectory, report dict); the report is empty for csv
    """
    if format not in FORMATS:
        raise ValidationError("format", f"must be one of {FORMATS}, got {format!r}")
    if format == "csv":
        try:
            frame = pd.read_csv(io.StringIO(document), float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ParseError(str(e))
        return _trajectory_from_frame(frame), {}

    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno)
    for key in ("total_time", "samples"):
        if key not in doc:
            raise ParseError("missing required field", field=key)
    frame = pd.DataFrame.from_records(doc["samples"], columns=CSV_COLUMNS)
    return _trajectory_from_frame(frame, doc["total_time"]), doc.get("report", {})


def format_from_path(path: Union[str, PathLike]) -> str:
    ext = os.path.splitext(str(path))[1].lstrip(".").lower()
    if ext not in FORMATS:
        raise ValidationError("trajectory", f"cannot infer format from extension {ext!r}")
    return ext


def write_text(path: Union[str, PathLike], text: str) -> None:
    try:
        create_dirs(os.path.abspath(path))
        with open(path, "w", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    logger.debug(f"wrote {path}")


def read_text(path: Union[str, PathLike]) -> str:
    try:
        with open(path, "r") as f:
            return f.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
