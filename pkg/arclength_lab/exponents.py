"""
Endpoint exponents and exponent bookkeeping

All exponents are exact Fractions computed from (d, K); nothing is tabulated
per dimension.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Optional, Sequence, Tuple

from arclength_lab.errors import ExponentConstraintError

logger = logging.getLogger(__name__)


class Variant(Enum):
    """Which restricted estimate a tower, band structure or bound belongs to"""
    MLE = "mlE"
    MLF = "mlF"


def _check_dim(d: int) -> None:
    if d < 2:
        raise ExponentConstraintError("d >= 2", f"got d={d}")


def endpoint_p(d: int) -> Fraction:
    _check_dim(d)
    return Fraction(d + 1, 2)


def endpoint_q(d: int) -> Fraction:
    _check_dim(d)
    return Fraction(d * (d + 1), 2 * (d - 1))


def endpoint_exponents(d: int) -> Tuple[Fraction, Fraction]:
    """(p_d, q_d)"""
    return endpoint_p(d), endpoint_q(d)


def conjugate(q) -> Fraction:
    q = Fraction(q)
    if q <= 1:
        raise ExponentConstraintError("q > 1", f"got q={q}")
    return q / (q - 1)


def n_exponent(K: int, d: int) -> Fraction:
    """n = d(d+1) / (2K + d(d+1))"""
    if K < 0:
        raise ExponentConstraintError("K >= 0", f"got K={K}")
    D = d * (d + 1)
    return Fraction(D, 2 * K + D)


def kappa(K: int, d: int) -> Fraction:
    """Weight exponent K / d(d+1) of the separation metric"""
    return Fraction(K, d * (d + 1))


def jacobian_dimension(d: int) -> int:
    """D = d(d+1)/2"""
    return d * (d + 1) // 2


def r_d(d: int) -> int:
    """1 + 3 + ... + (d-1) for even d, 2 + 4 + ... + (d-1) for odd d"""
    if d < 1:
        raise ExponentConstraintError("d >= 1", f"got d={d}")
    start = 1 if d % 2 == 0 else 2
    return sum(range(start, d, 2))


def initial_bound_exponents(d: int, K: int, variant: Variant = Variant.MLE) -> Dict[str, Fraction]:
    """Exponents of alpha_1, (beta_1/alpha_1) and the top ratio in the initial lower bound.

    mlE: alpha_1^D (beta_1/alpha_1)^r_d (alpha_2/alpha_1)^((d+1)/2 + n(d-1)/2)
    mlF: alpha_1^D (beta_1/alpha_1)^r_(d+1) (beta_2/beta_1)^((d+1)/2 + n(d-1)/2)
    """
    n = n_exponent(K, d)
    return {
        "alpha1": Fraction(jacobian_dimension(d)),
        "beta_ratio": Fraction(r_d(d) if variant is Variant.MLE else r_d(d + 1)),
        "top_ratio": Fraction(d + 1, 2) + n * (d - 1) / 2,
    }


def mle_exponents(d: int, K: int) -> Dict[str, Fraction]:
    """Exponents on the right of |E_2| >~ alpha_1^D (beta_1/alpha_1)^(d-1) (alpha_2/alpha_1)^(...)"""
    n = n_exponent(K, d)
    return {
        "alpha1": Fraction(jacobian_dimension(d)),
        "beta_ratio": Fraction(d - 1),
        "top_ratio": Fraction(d + 1, 2) + n * (d - 1) / 2,
    }


Quadruple = Tuple[Fraction, Fraction, Fraction, Fraction]


def validate_quadruple(d: int, quadruple: Sequence) -> Quadruple:
    """Check r1 + r2 = d(d-1)/2, s1 + s2 = d and s2/q_d' - r2/q_d - 1 > 0"""
    _check_dim(d)
    if len(quadruple) != 4:
        raise ExponentConstraintError("quadruple shape", f"expected (r1, r2, s1, s2), got {quadruple!r}")
    r1, r2, s1, s2 = (Fraction(x) for x in quadruple)
    q = endpoint_q(d)
    if r1 + r2 != Fraction(d * (d - 1), 2):
        raise ExponentConstraintError("r1 + r2 = d(d-1)/2", f"r1 + r2 = {r1 + r2}")
    if s1 + s2 != d:
        raise ExponentConstraintError("s1 + s2 = d", f"s1 + s2 = {s1 + s2}")
    margin = s2 / conjugate(q) - r2 / q - 1
    if margin <= 0:
        raise ExponentConstraintError("s2/q' - r2/q - 1 > 0", f"margin {margin}")
    return r1, r2, s1, s2


def mlf_quadruples(d: int, K: int) -> Dict[str, Quadruple]:
    """Quadruples read off the two second-case lower bounds for |F_2|.

    small-top (t_(2d-1) << alpha_1^n):
        alpha_1^D (beta_1/alpha_1)^d (beta_2/beta_1)^2 (alpha_2/alpha_1)^m, m = max(0, (1-n)(d-1)/2 - 1)
    large-top (t_(2d-1) >~ alpha_1^n):
        alpha_1^(d(d-1)/2) beta_1^d (beta_2/beta_1)^2
    """
    n = n_exponent(K, d)
    m = max(Fraction(0), (1 - n) * (d - 1) / 2 - 1)
    half = Fraction(d * (d - 1), 2)
    return {
        "small-top": (half - m, m, Fraction(d - 2), Fraction(2)),
        "large-top": (half, Fraction(0), Fraction(d - 2), Fraction(2)),
    }


def minimum_free_indices(d: int, k: int, variant: Variant) -> int:
    """Lower bound on the free-index count forced by parity.

    mlE bands live on [2d-k+1, 2d]: every even index is free, and so is the least index.
    mlF bands live on [2d-k, 2d-1]: additionally the top index 2d-1 is free.
    """
    if variant is Variant.MLE:
        if not d <= k < 2 * d:
            raise ExponentConstraintError("d <= k < 2d", f"got k={k}")
        indices = range(2 * d - k + 1, 2 * d + 1)
        forced = {i for i in indices if i % 2 == 0} | {indices[0]}
    else:
        if not d <= k <= 2 * d - 1:
            raise ExponentConstraintError("d <= k <= 2d-1", f"got k={k}")
        indices = range(2 * d - k, 2 * d)
        forced = {i for i in indices if i % 2 == 0} | {indices[0], 2 * d - 1}
    return len(forced)


@dataclass
class ExponentRecord:
    d: int
    k: int
    M: int
    variant: Variant
    r: int
    free_count: int
    minimum_free: int
    beta_exponent: int
    quadruple: Optional[Quadruple] = None
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "k": self.k,
            "M": self.M,
            "variant": self.variant.value,
            "r_d": self.r,
            "free_count": self.free_count,
            "minimum_free": self.minimum_free,
            "beta_exponent": self.beta_exponent,
            "quadruple": None if self.quadruple is None else [str(x) for x in self.quadruple],
            "checks": dict(self.checks),
        }


def exponent_bookkeeping(d: int, k: int, M: int, variant: Variant = Variant.MLE,
                         quadruple: Optional[Sequence] = None) -> ExponentRecord:
    """Named exponent record; raises ExponentConstraintError on the first violated constraint.

    beta_exponent is M + floor(k/2) for mlE and M + ceil(k/2) for mlF; both
    must be at most d-1 once the parity count of free indices is applied.
    """
    _check_dim(d)
    r = r_d(d)
    if r < d - 1:
        raise ExponentConstraintError("r_d >= d-1", f"r_{d} = {r}")
    if not 0 <= M <= d:
        raise ExponentConstraintError("0 <= M <= d", f"got M={M}")

    minimum_free = minimum_free_indices(d, k, variant)
    free_count = d - M
    if free_count < minimum_free:
        raise ExponentConstraintError(
            "free indices", f"{free_count} free indices but parity forces at least {minimum_free}")

    beta_exponent = M + (k // 2 if variant is Variant.MLE else (k + 1) // 2)
    name = "M + floor(k/2) <= d-1" if variant is Variant.MLE else "M + ceil(k/2) <= d-1"
    if beta_exponent > d - 1:
        raise ExponentConstraintError(name, f"got {beta_exponent}")

    checks = {"r_d >= d-1": True, "free indices": True, name: True}
    validated = None
    if quadruple is not None:
        validated = validate_quadruple(d, quadruple)
        checks["quadruple"] = True
    record = ExponentRecord(d, k, M, variant, r, free_count, minimum_free, beta_exponent, validated, checks)
    logger.debug("exponent bookkeeping %s", record.to_dict())
    return record
