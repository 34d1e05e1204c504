"""
Exception hierarchy for arclength-lab

Every failure raised by the library derives from ArclengthLabError so the
CLI can map it to an exit code. Config-shaped failures map to exit 2,
everything else to exit 1.
"""

from typing import Any, List, Optional, Sequence, Tuple


class ArclengthLabError(Exception):
    """Base class for all library failures"""


class ConfigError(ArclengthLabError):
    """Invalid run configuration; carries the dotted field path"""

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(f"{prefix}{message}")


class CurveSpecError(ConfigError):
    """Malformed curve description or coefficient"""


class DegenerateCurveError(ArclengthLabError):
    """The torsion L_P vanishes identically"""


class MinorIndexError(ArclengthLabError):
    """Minor index outside -1..d"""


class RootFindingError(ArclengthLabError):
    """Root refinement could not certify a root within tolerance"""

    def __init__(self, message: str, residuals: Optional[Sequence[Tuple[complex, float]]] = None):
        self.residuals = list(residuals or [])
        super().__init__(message)


class DecompositionError(ArclengthLabError):
    """Inconsistent interval bookkeeping during decomposition"""


class QuadratureError(ArclengthLabError):
    """Nested quadrature failed to converge"""

    def __init__(self, level: int, subinterval: Tuple[Any, Any], estimate: float = float("nan")):
        self.level = level
        self.subinterval = subinterval
        self.estimate = estimate
        super().__init__(
            f"quadrature did not converge at level {level} on {subinterval} "
            f"(relative error estimate {estimate:.3e})"
        )


class ExponentError(ArclengthLabError):
    """Invalid exponent in an alternating power sum"""

    def __init__(self, message: str, level: Optional[int] = None):
        self.level = level
        where = f"level {level}: " if level is not None else ""
        super().__init__(f"{where}{message}")


class DivisionRemainderError(ArclengthLabError):
    """Alternant not divisible by the Vandermonde product"""


class InvariantViolation(ArclengthLabError):
    """A structural invariant failed on computed data"""


class BandError(ArclengthLabError):
    """Invalid band-structure input"""


class ParameterChainError(BandError):
    """Two-stage scale parameters violate their ordering chain"""


class PreconditionError(ArclengthLabError):
    """Numeric precondition of a check does not hold"""


class ClauseViolationError(ArclengthLabError):
    """A conditional bound was requested on data violating its clauses"""

    def __init__(self, clause: str, witnesses: Optional[List[Any]] = None):
        self.clause = clause
        self.witnesses = list(witnesses or [])
        super().__init__(f"clause {clause} violated ({len(self.witnesses)} witness pairs)")


class TowerShortfallError(ArclengthLabError):
    """Admissible mass fell below the demanded level while building a tuple tower"""

    def __init__(self, level: int, mass: float, demand: float):
        self.level = level
        self.mass = mass
        self.demand = demand
        super().__init__(f"tower level {level}: admissible mass {mass:.6g} below demand {demand:.6g}")


class HypothesisError(ArclengthLabError):
    """A sampled hypothesis of an inequality check failed"""

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        super().__init__(f"hypothesis '{hypothesis}' not satisfied{': ' + detail if detail else ''}")


class ExponentConstraintError(ArclengthLabError):
    """A named exponent constraint failed"""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        super().__init__(f"constraint '{constraint}' violated{': ' + detail if detail else ''}")


class MeasureError(ArclengthLabError):
    """Invalid measure input (negative endpoints, empty or overlapping sets)"""


class ReportError(ArclengthLabError):
    """Malformed report or missing report section"""
