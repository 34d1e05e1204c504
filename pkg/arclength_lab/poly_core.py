"""
Polynomial curve algebra

Exact rational and double precision arithmetic for polynomial curves
P: R -> R^d. Provides evaluation, derivatives, the torsion determinant L_P,
the minor ladder L_j, the Jacobian J_P and the affine arclength density.

Symbolic determinants go through sympy's fraction-free Bareiss elimination;
sampling paths use numpy.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import sympy

from arclength_lab.errors import CurveSpecError, MinorIndexError

logger = logging.getLogger(__name__)

S = sympy.Symbol("s")

Scalar = Union[int, float, Fraction]


def parse_rational(value: Any) -> Fraction:
    """Parse an int, finite float, Fraction or "p/q" / decimal string"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise CurveSpecError(f"boolean is not a coefficient: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise CurveSpecError(f"non-finite coefficient {value!r}")
        return Fraction(value)
    if isinstance(value, sympy.Rational):
        return Fraction(int(value.p), int(value.q))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ZeroDivisionError as exc:
            raise CurveSpecError(f"zero denominator in {value!r}") from exc
        except ValueError as exc:
            raise CurveSpecError(f"malformed rational {value!r}") from exc
    raise CurveSpecError(f"unsupported coefficient type {type(value).__name__}")


def format_rational(value: Fraction) -> str:
    """Serialize as "p/q" (or "p" for integers)"""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _is_exact(value: Any) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def _to_sympy_rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


@dataclass(frozen=True)
class Polynomial:
    """Univariate polynomial; coeffs[k] multiplies s**k"""
    coeffs: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        coeffs = [parse_rational(c) for c in self.coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @classmethod
    def constant(cls, value: Scalar) -> "Polynomial":
        return cls((value,))

    @classmethod
    def monomial(cls, k: int, coefficient: Scalar = 1) -> "Polynomial":
        return cls(tuple([0] * k + [coefficient]))

    @classmethod
    def from_sympy(cls, poly: Any) -> "Polynomial":
        if not isinstance(poly, sympy.Poly):
            poly = sympy.Poly(sympy.expand(poly), S, domain=sympy.QQ)
        if poly.is_zero:
            return cls(())
        return cls(tuple(parse_rational(sympy.Rational(c)) for c in reversed(poly.all_coeffs())))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    @cached_property
    def float_coeffs(self) -> np.ndarray:
        if not self.coeffs:
            return np.zeros(1)
        return np.array([float(c) for c in self.coeffs])

    def __call__(self, s: Any):
        if isinstance(s, np.ndarray):
            return self.evaluate(s)
        if _is_exact(s):
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * s + c
            return acc
        acc = 0.0 if not isinstance(s, complex) else 0j
        for c in reversed(self.coeffs):
            acc = acc * s + float(c)
        return acc

    def evaluate(self, s: Any) -> np.ndarray:
        """Vectorized double precision evaluation"""
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), self.float_coeffs)

    def derivative(self, order: int = 1) -> "Polynomial":
        coeffs = list(self.coeffs)
        for _ in range(order):
            coeffs = [k * c for k, c in enumerate(coeffs)][1:]
        return Polynomial(tuple(coeffs))

    def __add__(self, other: Any) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [Fraction(0)] * (n - len(self.coeffs))
        b = list(other.coeffs) + [Fraction(0)] * (n - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: Any) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self + (-other)

    def __mul__(self, other: Any) -> "Polynomial":
        if not isinstance(other, Polynomial):
            factor = parse_rational(other)
            return Polynomial(tuple(c * factor for c in self.coeffs))
        if self.is_zero or other.is_zero:
            return Polynomial(())
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(tuple(out))

    __rmul__ = __mul__

    def compose_affine(self, a: Scalar, b: Scalar) -> "Polynomial":
        """p(a*s + b), exact"""
        inner = Polynomial((parse_rational(b), parse_rational(a)))
        acc = Polynomial(())
        for c in reversed(self.coeffs):
            acc = acc * inner + c
        return acc

    def to_sympy(self) -> sympy.Poly:
        if self.is_zero:
            return sympy.Poly(0, S, domain=sympy.QQ)
        rep = [_to_sympy_rational(c) for c in reversed(self.coeffs)]
        return sympy.Poly.from_list(rep, S, domain=sympy.QQ)

    def to_strings(self) -> List[str]:
        return [format_rational(c) for c in self.coeffs]

    def __str__(self) -> str:
        return str(self.to_sympy().as_expr()) if self.coeffs else "0"


@dataclass(frozen=True)
class PolyCurve:
    """Polynomial curve with exact rational component polynomials"""
    components: Tuple[Polynomial, ...]
    name: str = field(default="", compare=False)
    nondegenerate: bool = field(init=False, compare=False, default=False)

    def __post_init__(self):
        components = tuple(
            c if isinstance(c, Polynomial) else Polynomial(tuple(c)) for c in self.components
        )
        if len(components) < 2:
            raise CurveSpecError(f"curve needs dim >= 2, got {len(components)} components")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "nondegenerate", not torsion(self).is_zero)

    @classmethod
    def from_spec(cls, spec: Dict[str, Any], name: str = "") -> "PolyCurve":
        """Build from {dim, coeffs: [[c0, c1, ...], ...]} with "p/q" strings"""
        try:
            dim = int(spec["dim"])
            coeff_lists = spec["coeffs"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CurveSpecError(f"curve spec needs 'dim' and 'coeffs': {exc}") from exc
        if len(coeff_lists) != dim:
            raise CurveSpecError(f"dim={dim} but {len(coeff_lists)} coefficient lists")
        components = tuple(Polynomial(tuple(parse_rational(c) for c in coeffs)) for coeffs in coeff_lists)
        return cls(components, name=name or spec.get("name", ""))

    @classmethod
    def moment(cls, d: int) -> "PolyCurve":
        return cls(tuple(Polynomial.monomial(j) for j in range(1, d + 1)), name=f"moment-{d}")

    def to_spec(self) -> Dict[str, Any]:
        return {"dim": self.dim, "coeffs": [c.to_strings() for c in self.components]}

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def derivative_components(self, order: int = 1) -> Tuple[Polynomial, ...]:
        return tuple(c.derivative(order) for c in self.components)


class DerivShape(Enum):
    """Which derivative matrix a DerivMatrix holds"""
    POINT = "derivatives-at-point"       # columns P^(j)(s), j = 1..d
    MULTI_POINT = "tangents-at-points"   # columns P'(t_k), k = 1..d


@dataclass(frozen=True)
class DerivMatrix:
    entries: Tuple[Tuple[Scalar, ...], ...]
    provenance: DerivShape

    def __post_init__(self):
        size = len(self.entries)
        if any(len(row) != size for row in self.entries):
            raise CurveSpecError("derivative matrix must be square")

    @property
    def dim(self) -> int:
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    def det(self):
        if all(_is_exact(x) for row in self.entries for x in row):
            matrix = sympy.Matrix([[_to_sympy_rational(Fraction(x)) for x in row] for row in self.entries])
            return parse_rational(matrix.det(method="bareiss"))
        return float(np.linalg.det(self.as_array()))


def eval_curve(curve: PolyCurve, s: Any, exact: bool = False):
    """Point P(s); exact tuple of Fractions when requested and s is rational"""
    if exact:
        s = parse_rational(s)
        return tuple(c(s) for c in curve.components)
    if isinstance(s, np.ndarray):
        return np.stack([c.evaluate(s) for c in curve.components], axis=-1)
    return np.array([c.evaluate(float(s)) for c in curve.components], dtype=float)


def derivative_matrix(curve: PolyCurve, s: Any) -> DerivMatrix:
    """Columns P'(s), ..., P^(d)(s)"""
    d = curve.dim
    rows = tuple(
        tuple(curve.components[i].derivative(j + 1)(s) for j in range(d)) for i in range(d)
    )
    return DerivMatrix(rows, DerivShape.POINT)


def tangent_matrix(curve: PolyCurve, t: Sequence[Any]) -> DerivMatrix:
    """Columns P'(t_1), ..., P'(t_d)"""
    if len(t) != curve.dim:
        raise CurveSpecError(f"expected {curve.dim} parameters, got {len(t)}")
    velocity = curve.derivative_components(1)
    rows = tuple(tuple(v(tk) for tk in t) for v in velocity)
    return DerivMatrix(rows, DerivShape.MULTI_POINT)


@lru_cache(maxsize=1024)
def minor_ladder(curve: PolyCurve, j: int) -> Polynomial:
    """L_j: determinant of the top-left j x j block of (P', ..., P^(d)); L_0 = L_-1 = 1"""
    d = curve.dim
    if j in (-1, 0):
        return Polynomial((1,))
    if not 1 <= j <= d:
        raise MinorIndexError(f"minor index {j} outside -1..{d}")
    entries = [
        [curve.components[i].derivative(k + 1).to_sympy().as_expr() for k in range(j)]
        for i in range(j)
    ]
    det = sympy.Matrix(entries).det(method="bareiss")
    result = Polynomial.from_sympy(sympy.Poly(sympy.expand(det), S, domain=sympy.QQ))
    logger.debug("L_%d of %s = %s", j, curve.name or "curve", result)
    return result


def torsion(curve: PolyCurve) -> Polynomial:
    """L_P = det(P'(s), ..., P^(d)(s))"""
    return minor_ladder(curve, curve.dim)


def minor_values(curve: PolyCurve, j: int, s: Any) -> np.ndarray:
    return minor_ladder(curve, j).evaluate(s)


def jacobian_J(curve: PolyCurve, t: Sequence[Any], exact: bool = None):
    """J_P(t) = det(P'(t_1), ..., P'(t_d)); exact when every t_k is rational"""
    if exact is None:
        exact = all(_is_exact(x) for x in t)
    if exact:
        t = [parse_rational(x) for x in t]
    else:
        t = [float(x) for x in t]
    return tangent_matrix(curve, t).det()


def jacobian_J_batch(curve: PolyCurve, T: np.ndarray) -> np.ndarray:
    """J_P for each row of T (shape (B, d)), double precision"""
    T = np.asarray(T, dtype=float)
    velocity = curve.derivative_components(1)
    matrices = np.stack([v.evaluate(T) for v in velocity], axis=1)
    return np.linalg.det(matrices)


def log_abs_jacobian_batch(curve: PolyCurve, T: np.ndarray) -> np.ndarray:
    """log|J_P| per row; -inf where the determinant vanishes"""
    T = np.asarray(T, dtype=float)
    velocity = curve.derivative_components(1)
    matrices = np.stack([v.evaluate(T) for v in velocity], axis=1)
    sign, logdet = np.linalg.slogdet(matrices)
    return np.where(sign == 0, -np.inf, logdet)


def arclength_density(curve: PolyCurve, s: Any):
    """|L_P(s)|^(2/(d(d+1)))"""
    d = curve.dim
    values = np.abs(torsion(curve).evaluate(s))
    density = values ** (2.0 / (d * (d + 1)))
    if np.ndim(density) == 0:
        return float(density)
    return density


def affine_transform(curve: PolyCurve, matrix: Sequence[Sequence[Scalar]],
                     shift: Sequence[Scalar] = None) -> PolyCurve:
    """Exact M P + v"""
    d = curve.dim
    shift = shift if shift is not None else [0] * d
    rows = [[parse_rational(x) for x in row] for row in matrix]
    if len(rows) != d or any(len(r) != d for r in rows):
        raise CurveSpecError(f"affine map must be {d} x {d}")
    components = []
    for i in range(d):
        acc = Polynomial.constant(parse_rational(shift[i]))
        for j in range(d):
            acc = acc + curve.components[j] * rows[i][j]
        components.append(acc)
    return PolyCurve(tuple(components), name=f"{curve.name}|affine" if curve.name else "")


def reparametrize(curve: PolyCurve, a: Scalar, b: Scalar) -> PolyCurve:
    """P(a*s + b)"""
    if parse_rational(a) == 0:
        raise CurveSpecError("reparametrization slope must be nonzero")
    return PolyCurve(
        tuple(c.compose_affine(a, b) for c in curve.components),
        name=f"{curve.name}|reparam" if curve.name else "",
    )


def scale_curve(curve: PolyCurve, factor: Scalar) -> PolyCurve:
    """factor * P"""
    factor = parse_rational(factor)
    return PolyCurve(tuple(c * factor for c in curve.components), name=curve.name)


def vandermonde(t: Iterable[Any]):
    """prod_{i<k} (t_k - t_i)"""
    t = list(t)
    out = Fraction(1) if all(_is_exact(x) for x in t) else 1.0
    for k in range(len(t)):
        for i in range(k):
            out = out * (t[k] - t[i])
    return out
