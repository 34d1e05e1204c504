"""
Jacobian identities as executable checks

- The J_k ladder: J_1 = L_(d-2) L_d / L_(d-1)^2 and
  J_k(t) = prod_j g_k(t_j) * integral of J_(k-1) over the box
  [t_1, t_2] x ... x [t_(k-1), t_k], with g_k = L_(d-k-1) L_(d-k+1) / L_(d-k)^2.
  Evaluated by nested tensor Gauss-Legendre quadrature.
- The identity J_P = J_d on single-signed pieces.
- Alternating power determinants: division by the Vandermonde product and
  the iterated integration that produces them from an exponent schedule.
- Sampled bounds on log-derivatives of L_1 and on partial derivatives of
  J_P / prod L_1(tau_j).
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations, product
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy import ZZ
from sympy.polys.rings import ring

from arclength_lab import sampling
from arclength_lab.dw_decomp import Interval, find_roots
from arclength_lab.errors import (
    DivisionRemainderError,
    ExponentError,
    InvariantViolation,
    PreconditionError,
    QuadratureError,
)
from arclength_lab.poly_core import PolyCurve, jacobian_J_batch, minor_ladder, parse_rational
from config.settings import QuadratureSettings

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def _tensor_rule(order: int, dims: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes/weights on [-1, 1]^dims"""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = np.stack([g.ravel() for g in np.meshgrid(*([x] * dims), indexing="ij")], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([w] * dims), indexing="ij")], axis=1), axis=1)
    return nodes, weights


@dataclass
class JLadder:
    """Evaluator for J_1..J_d of a curve on a piece where every minor is single-signed"""
    curve: PolyCurve
    piece: Interval
    level: Optional[int] = None
    settings: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        d = self.curve.dim
        self.level = d if self.level is None else self.level
        if not 1 <= self.level <= d:
            raise ValueError(f"ladder level must be in 1..{d}")
        self._minors = {j: minor_ladder(self.curve, j) for j in range(-1, d + 1)}

    @property
    def dim(self) -> int:
        return self.curve.dim

    def prefactor(self, k: int, t: np.ndarray) -> np.ndarray:
        d = self.dim
        top = self._minors[d - k - 1].evaluate(t) * self._minors[d - k + 1].evaluate(t)
        return top / self._minors[d - k].evaluate(t) ** 2

    def evaluate(self, k: int, T: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(J_k, error estimate) for each row of T, shape (B, k)"""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        pref = np.prod(self.prefactor(k, T), axis=1)
        if k == 1:
            return pref, np.zeros(len(T))
        integral, err = self._nested_integral(k, T)
        return pref * integral, np.abs(pref) * err

    def _evaluate_chunked(self, k: int, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        step = self.settings.chunk_rows
        if len(rows) <= step:
            return self.evaluate(k, rows)
        parts = [self.evaluate(k, rows[i:i + step]) for i in range(0, len(rows), step)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def _nested_integral(self, k: int, T: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        B, dims = len(T), k - 1
        lo, hi = T[:, :-1], T[:, 1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        jac = np.prod(half, axis=1)
        tol = self.settings.level_tolerance(self.dim - k)

        previous = None
        worst, worst_rel = 0, float("nan")
        for order in self.settings.orders_for(dims):
            nodes, weights = _tensor_rule(order, dims)
            G = len(weights)
            S = mid[:, None, :] + half[:, None, :] * nodes[None, :, :]
            inner, inner_err = self._evaluate_chunked(k - 1, S.reshape(-1, dims))
            estimate = (inner.reshape(B, G) @ weights) * jac
            propagated = (inner_err.reshape(B, G) @ weights) * np.abs(jac)
            if previous is not None:
                err = np.abs(estimate - previous) + propagated
                scale = np.abs(estimate) + 1e-14 * np.max(np.abs(estimate), initial=0.0)
                if np.all(err <= tol * scale):
                    return estimate, err
                rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), np.inf)
                worst = int(np.argmax(rel))
                worst_rel = float(rel[worst])
            previous = estimate
        raise QuadratureError(k, (tuple(lo[worst]), tuple(hi[worst])), worst_rel)


def eval_J_ladder(ladder: JLadder, k: int, t: Sequence[float]) -> float:
    if len(t) != k:
        raise ValueError(f"J_{k} takes {k} arguments, got {len(t)}")
    values, _ = ladder.evaluate(k, np.array([t], dtype=float))
    return float(values[0])


def identity_box(piece: Interval, radius: float = 2.0, margin: float = 0.05) -> Tuple[float, float]:
    """Finite middle part of a (possibly unbounded) piece for tuple sampling"""
    lo, hi = max(piece.lo, -radius), min(piece.hi, radius)
    if not lo < hi:
        # piece entirely outside [-radius, radius]: use a unit window at its near end
        lo, hi = (piece.lo, piece.lo + 1.0) if math.isfinite(piece.lo) else (piece.hi - 1.0, piece.hi)
    width = hi - lo
    return lo + margin * width, hi - margin * width


@dataclass
class IdentityCheck:
    max_relative_error: float
    max_error_estimate: float
    samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def check_identity_JP_equals_Jd(curve: PolyCurve, piece: Interval, samples: int, tol_rel: float,
                                seed: int = 0, settings: Optional[QuadratureSettings] = None) -> IdentityCheck:
    """Compare the direct determinant J_P with the quadrature ladder J_d on ordered tuples"""
    ladder = JLadder(curve, piece, settings=settings or QuadratureSettings())
    d = curve.dim
    lo, hi = identity_box(piece)
    rng = sampling.stream(seed, f"identity:{piece.lo!r}:{piece.hi!r}")
    T = np.sort(rng.uniform(lo, hi, size=(samples, d)), axis=1)
    direct = jacobian_J_batch(curve, T)
    ladder_values, errors = ladder.evaluate(d, T)
    rel = np.abs(ladder_values - direct) / np.abs(direct)
    est = errors / np.abs(direct)
    result = IdentityCheck(float(rel.max()), float(est.max()), samples, tol_rel)
    logger.info("J_P = J_d on (%g, %g): max relative error %.3e", lo, hi, result.max_relative_error)
    return result


def check_ladder_antisymmetry(ladder: JLadder, k: int, swaps: int, seed: int = 0) -> float:
    """Max |J_k(t) + J_k(t with one adjacent swap)| / |J_k(t)| over seeded samples"""
    if k < 2:
        raise PreconditionError(f"an adjacent swap needs k >= 2, got k={k}")
    lo, hi = identity_box(ladder.piece)
    rng = sampling.stream(seed, f"antisymmetry:{k}")
    T = np.sort(rng.uniform(lo, hi, size=(swaps, k)), axis=1)
    positions = rng.integers(0, k - 1, size=swaps)
    swapped = T.copy()
    rows = np.arange(swaps)
    swapped[rows, positions], swapped[rows, positions + 1] = T[rows, positions + 1], T[rows, positions]
    base, _ = ladder.evaluate(k, T)
    flipped, _ = ladder.evaluate(k, swapped)
    return float(np.max(np.abs(base + flipped) / np.abs(base)))


def _validated_exponents(exponents: Sequence[int]) -> Tuple[int, ...]:
    alphas = tuple(int(a) for a in exponents)
    if any(a < 0 for a in alphas):
        raise ExponentError(f"negative exponent in {alphas}")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ExponentError(f"exponents must be strictly increasing: {alphas}")
    return alphas


def _permutation_sign(perm: Sequence[int]) -> int:
    sign, seen = 1, set()
    for start in range(len(perm)):
        if start in seen:
            continue
        length, j = 0, start
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _ring(d: int):
    return ring(",".join(f"t{i + 1}" for i in range(d)), ZZ)


def alternant_polynomial(exponents: Sequence[int]):
    """det[t_j^alpha_i] expanded by Leibniz in ZZ[t_1..t_d]; returns (ring, generators, polynomial)"""
    alphas = tuple(int(a) for a in exponents)
    R, *xs = _ring(len(alphas))
    det = R.zero
    for perm in permutations(range(len(alphas))):
        term = R.one
        for j, i in enumerate(perm):
            term *= xs[j] ** alphas[i]
        det += _permutation_sign(perm) * term
    return R, xs, det


def vandermonde_polynomial(R, xs):
    out = R.one
    for k in range(len(xs)):
        for i in range(k):
            out *= xs[k] - xs[i]
    return out


@dataclass(frozen=True)
class SymmetricFactor:
    """Quotient of an alternant by the Vandermonde product"""
    exponents: Tuple[int, ...]
    terms: Tuple[Tuple[Tuple[int, ...], int], ...]

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def as_dict(self) -> Dict[Tuple[int, ...], int]:
        return dict(self.terms)

    @property
    def is_symmetric(self) -> bool:
        coeffs = self.as_dict()
        for monom, c in coeffs.items():
            for perm in permutations(range(self.dim)):
                if coeffs.get(tuple(monom[p] for p in perm), 0) != c:
                    return False
        return True

    @property
    def nonnegative(self) -> bool:
        return all(c >= 0 for _, c in self.terms)

    def evaluate(self, t: Sequence):
        total = 0
        for monom, c in self.terms:
            term = c
            for x, e in zip(t, monom):
                term = term * x ** e
            total = total + term
        return total

    def __str__(self) -> str:
        syms = sympy.symbols(f"t1:{self.dim + 1}")
        expr = sum(c * sympy.prod(s ** e for s, e in zip(syms, monom)) for monom, c in self.terms)
        return str(sympy.expand(expr))


@dataclass(frozen=True)
class PowerDeterminant:
    """coefficient * det[t_j^alpha_i]"""
    exponents: Tuple[int, ...]
    coefficient: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "exponents", _validated_exponents(self.exponents))
        object.__setattr__(self, "coefficient", parse_rational(self.coefficient))

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def value(self, t: Sequence):
        return self.coefficient * power_determinant_value(self.exponents, t)


def power_determinant_value(exponents: Sequence[int], t: Sequence):
    """det[t_j^alpha_i]; exact for rational t"""
    alphas = _validated_exponents(exponents)
    if len(t) != len(alphas):
        raise ValueError(f"expected {len(alphas)} points, got {len(t)}")
    if all(isinstance(x, (int, Fraction)) for x in t):
        matrix = sympy.Matrix([[sympy.Rational(parse_rational(x)) ** a for a in alphas] for x in t])
        return parse_rational(matrix.det(method="bareiss"))
    return float(np.linalg.det(np.array([[float(x) ** a for a in alphas] for x in t])))


def power_determinant_factor(exponents: Sequence[int]) -> SymmetricFactor:
    """Exact quotient of det[t_j^alpha_i] by prod_{i<j}(t_j - t_i)"""
    alphas = _validated_exponents(exponents)
    R, xs, det = alternant_polynomial(alphas)
    quotient, remainder = det.div(vandermonde_polynomial(R, xs))
    if remainder:
        raise DivisionRemainderError(f"alternant {alphas} leaves remainder {remainder}")
    factor = SymmetricFactor(alphas, tuple(sorted((tuple(m), int(c)) for m, c in quotient.terms())))
    if not factor.is_symmetric:
        raise InvariantViolation(f"quotient for {alphas} is not symmetric")
    if not factor.nonnegative:
        raise InvariantViolation(f"quotient for {alphas} has a negative coefficient")
    return factor


def exhaustive_exponent_family(max_dim: int, max_sum: int) -> Iterator[Tuple[int, ...]]:
    """Every strictly increasing non-negative exponent list with 2 <= d <= max_dim and sum <= max_sum"""
    for d in range(2, max_dim + 1):
        for alphas in combinations(range(max_sum + 1), d):
            if sum(alphas) <= max_sum:
                yield alphas


def difference_alternant(exponents: Sequence[int]):
    """sum over permutations of sign * prod_j (t_(j+1)^m_rho(j) - t_j^m_rho(j)).

    Expanding the products creates monomials with repeated indices; they
    cancel in the alternating sum, leaving the alternant with exponents
    (0, m_1, ..., m_(r-1)).
    """
    ms = tuple(int(m) for m in exponents)
    R, *xs = _ring(len(ms) + 1)
    total = R.zero
    for perm in permutations(range(len(ms))):
        term = R.one
        for j, i in enumerate(perm):
            term *= xs[j + 1] ** ms[i] - xs[j] ** ms[i]
        total += _permutation_sign(perm) * term
    return R, xs, total


def s_r_recursion(schedule: Sequence[int], base_exponents: Sequence[int] = (0,),
                  base_coefficient=1) -> PowerDeterminant:
    """Iterate S_(r-1) -> S_r for each sigma in the schedule.

    Each step integrates the alternating power sum over the box
    [t_1, t_2] x ... x [t_(r-1), t_r] (w^k -> w^(k+1) / (k+1), then the
    difference rows collapse into an r x r alternant with a leading column
    of ones) and multiplies by prod_j t_j^sigma.
    """
    exps = [int(k) for k in base_exponents]
    coefficient = parse_rational(base_coefficient)
    for offset, sigma in enumerate(schedule):
        level = len(exps) + 1
        if any(k == -1 for k in exps):
            raise ExponentError("integrating t^-1 produces a logarithm", level=level)
        for k in exps:
            coefficient /= k + 1
        exps = [0] + [k + 1 for k in exps]
        exps = [k + int(sigma) for k in exps]
        logger.debug("S_%d exponents %s coefficient %s", level, exps, coefficient)

    order = sorted(range(len(exps)), key=exps.__getitem__)
    sorted_exps = [exps[i] for i in order]
    if len(set(sorted_exps)) != len(sorted_exps):
        raise ExponentError(f"repeated exponents {sorted_exps}: the alternant vanishes", level=len(exps))
    if sorted_exps[0] < 0:
        raise ExponentError(f"negative exponent in final alternant {sorted_exps}", level=len(exps))
    return PowerDeterminant(tuple(sorted_exps), _permutation_sign(order) * coefficient)


@dataclass
class DerivativeBoundCheck:
    measured: float
    bound: float
    grid: int

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + 1e-9 * max(1.0, self.bound)


def check_L1_derivative_bound(curve: PolyCurve, piece: Interval, grid: int = 64) -> DerivativeBoundCheck:
    """max over a geometric grid of |L_1'(s)| s / |L_1(s)| on a normalized piece inside (0, inf)"""
    if piece.lo < 0:
        raise ValueError(f"normalized piece must lie in (0, inf), got {piece}")
    L1 = minor_ladder(curve, 1)
    if L1.degree <= 0:
        return DerivativeBoundCheck(0.0, float(max(L1.degree, 0)), grid)
    roots = find_roots(L1)
    hi = piece.hi if math.isfinite(piece.hi) else max(2.0 * piece.lo, 1.0)
    s = np.geomspace(max(piece.lo, 2.0 ** -40), hi, grid)
    log_derivative = np.zeros(grid, dtype=complex)
    for root in roots:
        log_derivative += root.multiplicity / (s - root.value)
    measured = float(np.max(np.abs(log_derivative) * s))
    return DerivativeBoundCheck(measured, float(L1.degree), grid)


@dataclass
class PartialBoundCheck:
    max_ratio: float
    samples: int
    resampled: int
    subset: Tuple[int, ...]


def _h_values(curve: PolyCurve, T: np.ndarray) -> np.ndarray:
    L1 = minor_ladder(curve, 1)
    return jacobian_J_batch(curve, T) / np.prod(L1.evaluate(T), axis=1)


def check_Id1_partial_bound(curve: PolyCurve, piece: Interval, subset: Sequence[int], samples: int,
                            seed: int = 0, probe_radius: float = 2.0) -> PartialBoundCheck:
    """Max of |d^subset H| / (|H| prod_j ((d-1)/tau_j + sum_(i!=j) 1/|tau_j - tau_i|)), H = J_P / prod L_1(tau_j).

    Mixed partials by central differences with step eps^(1/(m+2)) |tau_j|.
    Indices in `subset` are 0-based.
    """
    d = curve.dim
    subset = tuple(sorted(set(int(j) for j in subset)))
    if any(not 0 <= j < d for j in subset):
        raise ValueError(f"subset indices must be in 0..{d - 1}")
    if len(subset) == d:
        return PartialBoundCheck(0.0, samples, 0, subset)
    m = len(subset)
    hi_edge = piece.hi if math.isfinite(piece.hi) else probe_radius * max(1.0, piece.lo)
    lo, hi = max(piece.lo, 0.0), hi_edge
    lo, hi = lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)
    rng = sampling.stream(seed, f"id1:{subset}")
    step_scale = np.finfo(float).eps ** (1.0 / (m + 2))

    T = rng.uniform(lo, hi, size=(samples, d))
    resampled = 0
    for _ in range(100):
        h = step_scale * np.abs(T[:, subset])
        bad = np.zeros(samples, dtype=bool)
        for col, j in enumerate(subset):
            gaps = np.abs(T - T[:, [j]])
            gaps[:, j] = np.inf
            bad |= 4.0 * h[:, col] >= gaps.min(axis=1)
            bad |= T[:, j] - h[:, col] <= 0.0
        if not bad.any():
            break
        resampled += int(bad.sum())
        T[bad] = rng.uniform(lo, hi, size=(int(bad.sum()), d))

    h = step_scale * np.abs(T[:, subset])
    derivative = np.zeros(samples)
    for signs in product((1.0, -1.0), repeat=m):
        shifted = T.copy()
        shifted[:, subset] += np.array(signs) * h
        derivative += np.prod(signs) * _h_values(curve, shifted)
    derivative /= np.prod(2.0 * h, axis=1)

    H = _h_values(curve, T)
    bound = np.abs(H)
    for j in subset:
        gaps = np.abs(T - T[:, [j]])
        gaps[:, j] = np.inf
        bound = bound * ((d - 1) / T[:, j] + np.sum(1.0 / gaps, axis=1))
    ratio = np.abs(derivative) / bound
    return PartialBoundCheck(float(ratio.max()), samples, resampled, subset)


def error_term_first_kind(curve: PolyCurve, tau: Sequence[float], shifts: Dict[int, float]) -> float:
    """det with column j replaced by P'(tau_j + s_j) - P'(tau_j) for j in shifts"""
    d = curve.dim
    velocity = curve.derivative_components(1)
    matrix = np.empty((d, d))
    for j in range(d):
        col = np.array([v(float(tau[j])) for v in velocity])
        if j in shifts:
            col = np.array([v(float(tau[j]) + float(shifts[j])) for v in velocity]) - col
        matrix[:, j] = col
    return float(np.linalg.det(matrix))


def error_term_second_kind(curve: PolyCurve, tau: Sequence[float], bound_points: Dict[int, float]) -> float:
    """(prod_j s_j / tau_j) J_P(tau with tau_j replaced by the bound point t_i(j)), s_j = t_i(j) - tau_j"""
    point = [float(x) for x in tau]
    weight = 1.0
    for j, t_i in bound_points.items():
        weight *= (float(t_i) - point[j]) / point[j]
        point[j] = float(t_i)
    return weight * float(jacobian_J_batch(curve, np.array([point]))[0])


@dataclass
class ThetaRecord:
    values: Dict[int, int]

    @property
    def all_nonzero(self) -> bool:
        return all(v != 0 for v in self.values.values())


def theta_coefficients(free: Sequence[int], binding: Dict[int, int]) -> ThetaRecord:
    """theta_j = (-1)^(j+1) + sum over i bound to j of (-1)^(i+1), for free j"""
    values = {j: (-1) ** (j + 1) for j in free}
    for i, j in binding.items():
        if j not in values:
            raise InvariantViolation(f"index {i} bound to non-free index {j}")
        values[j] += (-1) ** (i + 1)
    record = ThetaRecord(values)
    if not record.all_nonzero:
        logger.warning("vanishing theta coefficient in %s", values)
    return record
