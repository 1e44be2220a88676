"""
File: utils/errors.py
Description: exception hierarchy for fovtopp. Every error carries the field or grid
             index that caused it so the CLI can report it without parsing messages.
"""
from typing import Hashable, Optional


class FovToppError(Exception):
    """Base class for all fovtopp errors."""


class ValidationError(FovToppError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(FovToppError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 field: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.column = column
        self.field = field


class OutOfRange(FovToppError, ValueError):
    def __init__(self, s: float, s_end: float):
        super().__init__(f"s={s!r} lies outside [0, {s_end!r}]")
        self.s = s


class IrregularPath(FovToppError, ValueError):
    def __init__(self, index: int, s: float, speed: float):
        super().__init__(f"|gamma'(s)| = {speed:.3e} at node {index} (s={s:.6g}) violates regularity")
        self.index = index
        self.s = s


class DegenerateAttitude(FovToppError, ArithmeticError):
    """Thrust vector vanishes or is parallel to the body-y target."""


class LandmarkTooClose(FovToppError, ValueError):
    def __init__(self, message: str, index: Optional[int] = None,
                 landmark_id: Optional[Hashable] = None):
        if index is not None or landmark_id is not None:
            message = f"{message} (node {index}, landmark {landmark_id})"
        super().__init__(message)
        self.index = index
        self.landmark_id = landmark_id


class InfeasibleBounds(FovToppError, ValueError):
    def __init__(self, index: int, lower: float, upper: float):
        super().__init__(f"speed bounds cross at node {index}: B_l={lower:.6g} > B_u={upper:.6g}")
        self.index = index


class StepInfeasible(FovToppError):
    """The two-variable feasible set of a propagation step is empty."""


class Infeasible(FovToppError):
    def __init__(self, stage: int, phase: str, index: int):
        super().__init__(f"stage {stage} {phase} sweep infeasible at grid index {index}")
        self.stage = stage
        self.phase = phase
        self.index = index


class SmoothingDegenerate(FovToppError, ArithmeticError):
    def __init__(self, index: int, message: str):
        super().__init__(f"node {index}: {message}")
        self.index = index


class DegenerateThrust(FovToppError, ArithmeticError):
    def __init__(self, index: int, norm: float):
        super().__init__(f"thrust vector vanishes at node {index} (|c|={norm:.3e})")
        self.index = index


class SingularProfile(FovToppError, ArithmeticError):
    def __init__(self, segment: int):
        super().__init__(f"segment {segment} has zero speed at both ends")
        self.segment = segment


class SamplingExhausted(FovToppError):
    """Rejection sampling found no feasible point."""


class IoError(FovToppError, OSError):
    """Reading or writing an artifact failed."""
