"""
Discretized averaging operator and its restricted weak-type functionals

T f(x) = int_I f(x - P(s)) d mu(s) and T* g(x) = int_I g(x + P(s)) d mu(s)
on indicator functions of box unions. Membership of x -/+ P(s) in a box is
resolved exactly by the real roots of the coordinate polynomials, so the
only numerical error comes from sampling x.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from arclength_lab import sampling
from arclength_lab.dw_decomp import Interval
from arclength_lab.errors import HypothesisError, MeasureError, PreconditionError
from arclength_lab.exponents import (
    Variant,
    conjugate,
    endpoint_exponents,
    initial_bound_exponents,
    jacobian_dimension,
    mle_exponents,
    validate_quadruple,
)
from arclength_lab.measures import ArclengthMeasure, Box, GridSet, MuMeasure
from arclength_lab.poly_core import PolyCurve, affine_transform, eval_curve
from config.settings import BandSettings

logger = logging.getLogger(__name__)

Measure = Union[MuMeasure, ArclengthMeasure]


def _real_roots_in(coeffs: np.ndarray, a: float, b: float) -> List[float]:
    coeffs = np.trim_zeros(coeffs, "b")
    if len(coeffs) <= 1:
        return []
    roots = npoly.polyroots(coeffs)
    scale = 1e-9 * (1.0 + np.abs(roots))
    real = roots.real[np.abs(roots.imag) <= scale]
    return [float(r) for r in real if a < r < b]


def _poly_range(coeffs: np.ndarray, a: float, b: float) -> Tuple[float, float]:
    points = [a, b] + _real_roots_in(npoly.polyder(coeffs), a, b) if len(coeffs) > 1 else [a, b]
    values = npoly.polyval(np.array(points), coeffs)
    return float(values.min()), float(values.max())


class _Preimage:
    """Parameter sets {s in segments : x + sign P(s) in E}, in the local frame of E"""

    def __init__(self, curve: PolyCurve, target: GridSet, sign: int, segments: Sequence[Tuple[float, float]]):
        d = curve.dim
        degree = max(len(c.float_coeffs) for c in curve.components)
        P = np.zeros((d, degree))
        for k, comp in enumerate(curve.components):
            P[k, :len(comp.float_coeffs)] = comp.float_coeffs
        self.target = target
        self.segments = list(segments)
        self.minv = target.frame_inverse
        self.poly = sign * (self.minv @ P)
        self.lowers = np.array([b.lower for b in target.boxes])
        self.uppers = np.array([b.upper for b in target.boxes])
        ranges = [[_poly_range(self.poly[i], a, b) for i in range(d)] for a, b in self.segments]
        self.hull_lo = np.min([[r[0] for r in seg] for seg in ranges], axis=0) if ranges else np.zeros(d)
        self.hull_hi = np.max([[r[1] for r in seg] for seg in ranges], axis=0) if ranges else np.zeros(d)

    def mass(self, x: np.ndarray, measure: Measure) -> float:
        base = self.minv @ (np.asarray(x, dtype=float) - self.target.shift)
        reach_lo, reach_hi = base + self.hull_lo, base + self.hull_hi
        candidates = np.flatnonzero(np.all((self.uppers > reach_lo) & (self.lowers <= reach_hi), axis=1))
        total = 0.0
        for k in candidates:
            lo, hi = self.lowers[k], self.uppers[k]
            for a, b in self.segments:
                cuts = set()
                for i in range(len(base)):
                    shifted = self.poly[i].copy()
                    shifted[0] += base[i]
                    for edge in (lo[i], hi[i]):
                        c = shifted.copy()
                        c[0] -= edge
                        cuts.update(_real_roots_in(c, a, b))
                edges = [a] + sorted(cuts) + [b]
                for u, v in zip(edges[:-1], edges[1:]):
                    if v <= u:
                        continue
                    mid = 0.5 * (u + v)
                    y = base + npoly.polyval(mid, self.poly.T)
                    if np.all((y >= lo) & (y < hi)):
                        total += measure.interval_mass(u, v)
        return total


def _segments(interval: Interval, gamma: Optional[float], c: float, n: float) -> List[Tuple[float, float]]:
    if not interval.bounded or interval.lo < 0:
        raise PreconditionError(f"the operator needs a bounded interval in [0, inf), got {interval}")
    lo = interval.lo
    if gamma is not None:
        lo = max(lo, c * gamma ** n)
    return [(lo, interval.hi)] if lo < interval.hi else []


def _measure_n(measure: Measure) -> float:
    return float(measure.n) if isinstance(measure, MuMeasure) else 1.0


def mu_interval(measure: MuMeasure, a: float, b: float) -> float:
    return measure.interval_mass(a, b)


def apply_T(curve: PolyCurve, interval: Interval, measure: Measure, E: GridSet, x: Sequence[float],
            gamma: Optional[float] = None, c: float = 1.0, adjoint: bool = False) -> float:
    """T chi_E(x), or T* chi_E(x) when adjoint; gamma truncates [0, c gamma^n] off the interval"""
    segments = _segments(interval, gamma, c, _measure_n(measure))
    if not segments:
        return 0.0
    return _Preimage(curve, E, 1 if adjoint else -1, segments).mass(np.asarray(x, dtype=float), measure)


@dataclass
class OperatorFunctionals:
    T_value: float
    error: float
    E_measure: float
    F_measure: float
    mu_I: float
    x_samples: int
    adjoint_value: Optional[float] = None
    adjoint_error: Optional[float] = None

    @property
    def alpha(self) -> float:
        return self.T_value / self.F_measure

    @property
    def beta(self) -> float:
        return self.T_value / self.E_measure

    @property
    def duality_gap(self) -> Optional[float]:
        if self.adjoint_value is None:
            return None
        return abs(self.T_value - self.adjoint_value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "T": self.T_value,
            "error": self.error,
            "alpha": self.alpha,
            "beta": self.beta,
            "E_measure": self.E_measure,
            "F_measure": self.F_measure,
            "mu_I": self.mu_I,
            "x_samples": self.x_samples,
            "adjoint": self.adjoint_value,
            "adjoint_error": self.adjoint_error,
        }


def _stratified_pairing(curve: PolyCurve, interval: Interval, measure: Measure, target: GridSet,
                        outer: GridSet, x_samples: int, seed: int, adjoint: bool, tag: str,
                        gamma: Optional[float] = None, c: float = 1.0, workers: int = 1,
                        chunk_size: int = 4096) -> Tuple[float, float]:
    """<T chi_target, chi_outer> (or with T*) by Monte Carlo stratified over the boxes of outer"""
    segments = _segments(interval, gamma, c, _measure_n(measure))
    if not segments:
        return 0.0, 0.0
    preimage = _Preimage(curve, target, 1 if adjoint else -1, segments)
    total, variance = 0.0, 0.0
    for k, (box, count) in enumerate(zip(outer.boxes, outer.allocation(x_samples))):
        def work(rng, size, _index, box=box):
            local = box.sample(rng, size)
            points = outer.to_world(local)
            return np.array([preimage.mass(x, measure) for x in points])

        values = np.concatenate(sampling.parallel_chunks(seed, f"{tag}:{k}", count, work,
                                                         chunk_size=chunk_size, workers=workers))
        weight = outer.jacobian * box.volume
        total += weight * float(values.mean())
        variance += weight ** 2 * float(values.var(ddof=1)) / count
    return total, 2.0 * math.sqrt(variance)


def functionals(curve: PolyCurve, interval: Interval, measure: Measure, E: GridSet, F: GridSet,
                x_samples: int, seed: int, duality: bool = False, gamma: Optional[float] = None,
                c: float = 1.0, workers: int = 1, chunk_size: int = 4096) -> OperatorFunctionals:
    """T(E, F) = <T chi_E, chi_F>, alpha = T/|F|, beta = T/|E|; error is two standard errors"""
    if E.measure <= 0 or F.measure <= 0:
        raise MeasureError("functionals need sets of positive measure")
    value, error = _stratified_pairing(curve, interval, measure, E, F, x_samples, seed, False, "T",
                                       gamma, c, workers, chunk_size)
    result = OperatorFunctionals(value, error, E.measure, F.measure,
                                 measure.interval_mass(interval.lo, interval.hi), x_samples)
    if duality:
        result.adjoint_value, result.adjoint_error = _stratified_pairing(
            curve, interval, measure, F, E, x_samples, seed, True, "T*", gamma, c, workers, chunk_size)
    logger.debug("T(E,F) = %.6g +- %.2g", value, error)
    return result


def sampled_infimum(curve: PolyCurve, interval: Interval, measure: Measure, target: GridSet, over: GridSet,
                    samples: int, seed: int, adjoint: bool = False, tag: str = "infimum") -> float:
    """min over sampled points of over of T chi_target (or T* chi_target)"""
    segments = _segments(interval, None, 1.0, _measure_n(measure))
    preimage = _Preimage(curve, target, 1 if adjoint else -1, segments)
    rng = sampling.stream(seed, tag)
    volumes = np.array([b.volume for b in over.boxes])
    choice = rng.choice(len(over.boxes), size=samples, p=volumes / volumes.sum())
    local = np.array([over.boxes[k].sample(rng, 1)[0] for k in choice])
    return float(min(preimage.mass(x, measure) for x in over.to_world(local)))


@dataclass
class KnappPair:
    E: GridSet
    F: GridSet
    delta: float
    t0: float


def knapp_family(curve: PolyCurve, interval: Interval, delta: float, t0: Optional[float] = None,
                 hull_points: int = 257) -> KnappPair:
    """Anisotropic box around the arc P([t0, t0 + delta]) - P(t0) in the Taylor frame at t0.

    Frame columns are P^(j)(t0)/j!; the j-th side is widened to at least
    delta^j. F is the same construction at 2 delta, translated by P(t0).
    """
    t0 = interval.lo if t0 is None else float(t0)
    if not (interval.lo <= t0 and t0 + 2 * delta <= interval.hi):
        raise PreconditionError(f"[t0, t0 + 2 delta] = [{t0}, {t0 + 2 * delta}] leaves {interval}")
    d = curve.dim
    frame = np.column_stack([
        np.array([c.derivative(j)(float(t0)) for c in curve.components], dtype=float) / math.factorial(j)
        for j in range(1, d + 1)
    ])
    if abs(np.linalg.det(frame)) == 0.0:
        raise PreconditionError(f"degenerate Taylor frame at t0={t0}")
    minv = np.linalg.inv(frame)
    base = eval_curve(curve, t0)

    def local_box(scale: float) -> Box:
        s = t0 + np.linspace(0.0, scale, hull_points)
        arc = (eval_curve(curve, s) - base) @ minv.T
        lo, hi = arc.min(axis=0), arc.max(axis=0)
        widths = np.array([scale ** j for j in range(1, d + 1)])
        hi = np.maximum(hi, lo + widths)
        return Box.from_bounds(lo, hi)

    E = GridSet([local_box(delta)], frame=frame)
    F = GridSet([local_box(2 * delta)], frame=frame, shift=base)
    return KnappPair(E, F, delta, t0)


def _exponents(d: int, p, q):
    pd, qd = endpoint_exponents(d)
    return float(pd if p is None else p), float(qd if q is None else q)


@dataclass
class RatioResult:
    ratio: float
    error: float
    p: float
    q: float
    functionals: OperatorFunctionals


def rwt_ratio(curve: PolyCurve, interval: Interval, measure: Measure, E: GridSet, F: GridSet,
              p=None, q=None, x_samples: int = 2048, seed: int = 0, workers: int = 1) -> RatioResult:
    """T(E, F) / (|E|^(1/p) |F|^(1/q')), endpoint exponents by default"""
    p, q = _exponents(curve.dim, p, q)
    f = functionals(curve, interval, measure, E, F, x_samples, seed, workers=workers)
    denominator = E.measure ** (1.0 / p) * F.measure ** (1.0 / float(conjugate(q)))
    return RatioResult(f.T_value / denominator, f.error / denominator, p, q, f)


def expected_trend(d: int, p: float, q: float, K: int = 0, t0: float = 1.0) -> int:
    """Sign of the change of the Knapp ratio as delta decreases.

    ratio ~ delta^(D + m - D(1/p + 1/q')), D = d(d+1)/2, m the scaling of mu
    on [t0, t0 + delta] (1, or 1/n at t0 = 0 with K > 0). Returns +1 when
    the ratio grows as delta -> 0, -1 when it shrinks, 0 at the flat endpoint.
    """
    D = jacobian_dimension(d)
    m = 1.0 if (K == 0 or t0 > 0) else float(MuMeasure(K, d).n) ** -1
    exponent = D + m - D * (1.0 / p + 1.0 / float(conjugate(q)))
    if abs(exponent) < 1e-12:
        return 0
    return 1 if exponent < 0 else -1


def _observed_trend(ratios: Sequence[float]) -> int:
    steps = np.diff(np.asarray(ratios))
    if len(steps) and np.all(steps > 0):
        return 1
    if len(steps) and np.all(steps < 0):
        return -1
    return 0


@dataclass
class KnappSweep:
    rows: List[Tuple[float, float, float]]
    p: float
    q: float
    expected: int

    @property
    def ratios(self) -> List[float]:
        return [r[1] for r in self.rows]

    @property
    def observed(self) -> int:
        return _observed_trend(self.ratios)

    @property
    def flatness(self) -> float:
        return max(self.ratios) / min(self.ratios)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p, "q": self.q, "expected_trend": self.expected, "observed_trend": self.observed,
            "flatness": self.flatness, "columns": ["delta", "ratio", "error"],
            "rows": [list(r) for r in self.rows],
        }


def knapp_sweep(curve: PolyCurve, interval: Interval, measure: Measure, deltas: Sequence[float],
                p=None, q=None, x_samples: int = 512, seed: int = 0, t0: Optional[float] = None,
                workers: int = 1) -> KnappSweep:
    """rwt_ratio over the Knapp family; deltas in decreasing order, common random numbers across delta"""
    p, q = _exponents(curve.dim, p, q)
    t0 = interval.lo if t0 is None else t0
    rows = []
    for delta in sorted(deltas, reverse=True):
        pair = knapp_family(curve, interval, delta, t0)
        result = rwt_ratio(curve, interval, measure, pair.E, pair.F, p, q, x_samples, seed, workers)
        rows.append((float(delta), result.ratio, result.error))
        logger.debug("knapp delta=%.3e ratio=%.6g", delta, result.ratio)
    K = measure.K if isinstance(measure, MuMeasure) else 0
    return KnappSweep(rows, p, q, expected_trend(curve.dim, p, q, K, t0))


@dataclass
class OffEndpointSweep:
    sweeps: Dict[str, KnappSweep]

    def growth(self) -> Dict[str, float]:
        """max/min ratio across delta per exponent offset"""
        return {name: s.flatness for name, s in self.sweeps.items()}


def off_endpoint_sweep(curve: PolyCurve, interval: Interval, measure: Measure, deltas: Sequence[float],
                       offsets: Sequence[Tuple[float, float]], x_samples: int = 512, seed: int = 0,
                       workers: int = 1) -> OffEndpointSweep:
    """Knapp sweeps at (p_d + dp, q_d + dq); no rate is asserted, only growth is recorded"""
    pd, qd = _exponents(curve.dim, None, None)
    sweeps = {}
    for dp, dq in offsets:
        sweeps[f"{dp:+g},{dq:+g}"] = knapp_sweep(curve, interval, measure, deltas, pd + dp, qd + dq,
                                                 x_samples, seed, workers=workers)
    return OffEndpointSweep(sweeps)


@dataclass
class InequalityCheck:
    name: str
    lhs: float
    rhs: float
    hypotheses: Dict[str, float]
    samples: int
    relaxation: str = "infima over sampled points"

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
            "hypotheses": dict(self.hypotheses), "samples": self.samples, "relaxation": self.relaxation,
        }


def _mle_measurements(curve, interval, measure, E1, E2, F, x_samples, seed, workers) -> Dict[str, float]:
    alpha1 = sampled_infimum(curve, interval, measure, E1, F, x_samples, seed, tag="alpha1")
    alpha2 = sampled_infimum(curve, interval, measure, E2, F, x_samples, seed, tag="alpha2")
    beta1 = functionals(curve, interval, measure, E1, F, x_samples, seed, workers=workers).beta
    beta2 = functionals(curve, interval, measure, E2, F, x_samples, seed, workers=workers).beta
    values = {"alpha1": alpha1, "alpha2": alpha2, "beta1": beta1, "beta2": beta2}
    if alpha1 <= 0 or beta1 <= 0:
        raise HypothesisError("positive alpha1 and beta1", str(values))
    if alpha2 < alpha1:
        raise HypothesisError("alpha2 >= alpha1", f"alpha1={alpha1:.6g}, alpha2={alpha2:.6g}")
    return values


def check_mlE_inequality(curve: PolyCurve, interval: Interval, measure: MuMeasure, E1: GridSet, E2: GridSet,
                         F: GridSet, x_samples: int = 1024, seed: int = 0, workers: int = 1) -> InequalityCheck:
    """|E_2| against alpha1^D (beta1/alpha1)^(d-1) (alpha2/alpha1)^((d+1)/2 + n(d-1)/2)"""
    h = _mle_measurements(curve, interval, measure, E1, E2, F, x_samples, seed, workers)
    exps = mle_exponents(curve.dim, measure.K)
    rhs = (h["alpha1"] ** float(exps["alpha1"]) * (h["beta1"] / h["alpha1"]) ** float(exps["beta_ratio"])
           * (h["alpha2"] / h["alpha1"]) ** float(exps["top_ratio"]))
    logger.warning("mlE hypotheses verified on %d sampled points only", x_samples)
    return InequalityCheck("mlE", E2.measure, rhs, h, x_samples)


def _mlf_measurements(curve, interval, measure, E, F1, F2, eta, x_samples, seed, workers,
                      settings: BandSettings) -> Dict[str, float]:
    beta1 = sampled_infimum(curve, interval, measure, F1, E, x_samples, seed, adjoint=True, tag="beta1")
    beta2 = sampled_infimum(curve, interval, measure, F2, E, x_samples, seed, adjoint=True, tag="beta2")
    f1 = functionals(curve, interval, measure, E, F1, x_samples, seed, workers=workers)
    f2 = functionals(curve, interval, measure, E, F2, x_samples, seed, workers=workers)
    values = {"alpha1": f1.alpha, "alpha2": f2.alpha, "beta1": beta1, "beta2": beta2, "eta": eta}
    for j, (beta, f) in enumerate(((beta1, f1), (beta2, f2)), start=1):
        if beta < settings.gtrsim * eta * f.beta:
            raise HypothesisError(f"beta{j} >~ eta T(E,F{j})/|E|", f"beta{j}={beta:.6g}, average={f.beta:.6g}")
    if beta2 < beta1:
        raise HypothesisError("beta2 >= beta1", f"beta1={beta1:.6g}, beta2={beta2:.6g}")
    if values["alpha2"] > values["alpha1"]:
        raise HypothesisError("alpha2 <= alpha1", f"alpha1={f1.alpha:.6g}, alpha2={f2.alpha:.6g}")
    return values


def check_mlF_inequality(curve: PolyCurve, interval: Interval, measure: MuMeasure, E: GridSet, F1: GridSet,
                         F2: GridSet, eta: float, quadruple: Sequence, C: float = 1.0, x_samples: int = 1024,
                         seed: int = 0, workers: int = 1,
                         settings: Optional[BandSettings] = None) -> InequalityCheck:
    """|F_2| against eta^C alpha1^r1 alpha2^r2 beta1^s1 beta2^s2"""
    r1, r2, s1, s2 = (float(x) for x in validate_quadruple(curve.dim, quadruple))
    h = _mlf_measurements(curve, interval, measure, E, F1, F2, eta, x_samples, seed, workers,
                          settings or BandSettings())
    rhs = eta ** C * h["alpha1"] ** r1 * h["alpha2"] ** r2 * h["beta1"] ** s1 * h["beta2"] ** s2
    logger.warning("mlF hypotheses verified on %d sampled points only", x_samples)
    return InequalityCheck("mlF", F2.measure, rhs, h, x_samples)


def check_initial_lower_bound(curve: PolyCurve, interval: Interval, measure: MuMeasure,
                              sets: Dict[str, GridSet], variant: Variant, eta: float = 1.0,
                              x_samples: int = 1024, seed: int = 0, workers: int = 1) -> InequalityCheck:
    """Initial lower bound for the case beta1 >~ alpha1.

    mlE: |E_2| >~ alpha1^D (beta1/alpha1)^r_d (alpha2/alpha1)^((d+1)/2 + n(d-1)/2)
    mlF: |F_2| >~ alpha1^D (beta1/alpha1)^r_(d+1) (beta2/beta1)^((d+1)/2 + n(d-1)/2)
    """
    exps = initial_bound_exponents(curve.dim, measure.K, variant)
    if variant is Variant.MLE:
        h = _mle_measurements(curve, interval, measure, sets["E1"], sets["E2"], sets["F"], x_samples, seed, workers)
        top, lhs = h["alpha2"] / h["alpha1"], sets["E2"].measure
    else:
        h = _mlf_measurements(curve, interval, measure, sets["E"], sets["F1"], sets["F2"], eta, x_samples,
                              seed, workers, BandSettings())
        top, lhs = h["beta2"] / h["beta1"], sets["F2"].measure
    rhs = (h["alpha1"] ** float(exps["alpha1"]) * (h["beta1"] / h["alpha1"]) ** float(exps["beta_ratio"])
           * top ** float(exps["top_ratio"]))
    return InequalityCheck(f"initial-{variant.value}", lhs, rhs, h, x_samples)


@dataclass
class AffineInvarianceResult:
    ratios: List[float]
    base_ratio: float
    errors: List[float] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max(abs(r / self.base_ratio - 1.0) for r in self.ratios)


def random_affine(rng: np.random.Generator, d: int, condition: float = 10.0) -> np.ndarray:
    """Random invertible matrix with singular values in [1/condition^(1/2), condition^(1/2)]"""
    q1, _ = np.linalg.qr(rng.normal(size=(d, d)))
    q2, _ = np.linalg.qr(rng.normal(size=(d, d)))
    spread = math.sqrt(condition)
    return q1 @ np.diag(rng.uniform(1.0 / spread, spread, size=d)) @ q2


def check_affine_invariance(curve: PolyCurve, interval: Interval, E: GridSet, F: GridSet, trials: int = 10,
                            seed: int = 0, x_samples: int = 512) -> AffineInvarianceResult:
    """Endpoint ratio with affine arclength, before and after x -> M x applied to curve, E and F jointly"""
    base = rwt_ratio(curve, interval, ArclengthMeasure(curve), E, F, x_samples=x_samples, seed=seed)
    rng = sampling.stream(seed, "affine-invariance")
    ratios, errors = [], []
    for _ in range(trials):
        M = random_affine(rng, curve.dim)
        moved = affine_transform(curve, M.tolist())
        result = rwt_ratio(moved, interval, ArclengthMeasure(moved), E.transformed(M), F.transformed(M),
                           x_samples=x_samples, seed=seed)
        ratios.append(result.ratio)
        errors.append(result.error)
    return AffineInvarianceResult(ratios, base.ratio, errors)
