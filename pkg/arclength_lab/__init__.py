"""
arclength-lab: numerical verification of endpoint bounds for convolution
with affine arclength measure on polynomial curves.
"""

__version__ = "0.1.0"

from arclength_lab.errors import ArclengthLabError, ConfigError  # noqa: E402
from arclength_lab.poly_core import PolyCurve, Polynomial, jacobian_J, minor_ladder, torsion  # noqa: E402
from arclength_lab.measures import GridSet, MuMeasure  # noqa: E402
from arclength_lab.report import CheckStatus, VerificationReport, parse_report  # noqa: E402

__all__ = [
    "__version__",
    "ArclengthLabError",
    "ConfigError",
    "PolyCurve",
    "Polynomial",
    "jacobian_J",
    "minor_ladder",
    "torsion",
    "GridSet",
    "MuMeasure",
    "CheckStatus",
    "VerificationReport",
    "parse_report",
]
