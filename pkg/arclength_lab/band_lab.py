"""
Band structures, tuple towers and the conditional Jacobian lower bound

A band structure partitions tuple indices by pairwise separation in the
weighted metric |t_i - t_j| (t_i t_j)^(K/d(d+1)). Within each band the least
index is free, the larger element of a two-element band is quasi-free
(quasi-bound to the free one), and every other non-free index is bound.

Towers are greedy grid analogues of the nested parameter sets Omega_i whose
alternating curve sums x0 + sum_j (-1)^(j+1) P(t_j) land in prescribed sets.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from arclength_lab import sampling
from arclength_lab.dw_decomp import Interval
from arclength_lab.errors import (
    BandError,
    ClauseViolationError,
    ParameterChainError,
    PreconditionError,
    TowerShortfallError,
)
from arclength_lab.exponents import Variant, kappa, n_exponent
from arclength_lab.measures import GridSet, MuMeasure
from arclength_lab.poly_core import PolyCurve, eval_curve, jacobian_J_batch
from config.settings import BandSettings

logger = logging.getLogger(__name__)


class IndexClass(Enum):
    FREE = "free"
    QUASI_FREE = "quasi-free"
    BOUND = "bound"


@dataclass(frozen=True)
class SeparationMetric:
    """m(t_i, t_j) = |t_i - t_j| (t_i t_j)^kappa, kappa = K/(d(d+1))"""
    K: int
    d: int

    @property
    def kappa(self) -> float:
        return float(kappa(self.K, self.d))

    @property
    def n(self) -> float:
        return float(n_exponent(self.K, self.d))

    def weight(self, ti, tj):
        """(t_i t_j)^(-kappa)"""
        return (np.asarray(ti, dtype=float) * np.asarray(tj, dtype=float)) ** (-self.kappa)

    def __call__(self, ti, tj):
        ti, tj = np.asarray(ti, dtype=float), np.asarray(tj, dtype=float)
        return np.abs(ti - tj) * (ti * tj) ** self.kappa

    def threshold(self, scale: float, ti, tj):
        return scale * self.weight(ti, tj)


@dataclass
class BandParams:
    delta: float
    alpha1: float
    metric: SeparationMetric
    delta_prime: Optional[float] = None
    beta1: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta": self.delta,
            "alpha1": self.alpha1,
            "K": self.metric.K,
            "d": self.metric.d,
            "delta_prime": self.delta_prime,
            "beta1": self.beta1,
        }


def _as_index_map(t: Sequence[float], indices: Optional[Sequence[int]]) -> Dict[int, float]:
    values = [float(x) for x in t]
    indices = list(range(1, len(values) + 1)) if indices is None else [int(i) for i in indices]
    if len(indices) != len(values):
        raise BandError(f"{len(values)} points for {len(indices)} indices")
    if len(set(indices)) != len(indices):
        raise BandError(f"repeated index in {indices}")
    return dict(zip(indices, values))


@dataclass
class BandStructure:
    """Partition of an index set into bands with the free/quasi-free/bound classification"""
    indices: Tuple[int, ...]
    bands: Tuple[Tuple[int, ...], ...]
    params: Optional[BandParams] = None
    order: Tuple[int, ...] = ()
    split_positions: Tuple[int, ...] = ()
    classification: Dict[int, IndexClass] = field(default_factory=dict, init=False)
    quasi_bind: Dict[int, int] = field(default_factory=dict, init=False)
    bind: Dict[int, int] = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.indices = tuple(sorted(self.indices))
        self.bands = tuple(tuple(sorted(b)) for b in self.bands)
        seen = [i for b in self.bands for i in b]
        if any(not b for b in self.bands):
            raise BandError("empty band")
        if sorted(seen) != list(self.indices):
            raise BandError(f"bands {self.bands} do not partition {self.indices}")
        for band in self.bands:
            least = band[0]
            self.classification[least] = IndexClass.FREE
            if len(band) == 2:
                self.classification[band[1]] = IndexClass.QUASI_FREE
                self.quasi_bind[band[1]] = least
            else:
                for i in band[1:]:
                    self.classification[i] = IndexClass.BOUND
                    self.bind[i] = least

    @classmethod
    def from_bands(cls, bands: Sequence[Sequence[int]], params: Optional[BandParams] = None) -> "BandStructure":
        indices = tuple(i for b in bands for i in b)
        return cls(indices, tuple(tuple(b) for b in bands), params)

    def _of(self, kind: IndexClass) -> List[int]:
        return [i for i in self.indices if self.classification[i] is kind]

    @property
    def free(self) -> List[int]:
        return self._of(IndexClass.FREE)

    @property
    def quasi_free(self) -> List[int]:
        return self._of(IndexClass.QUASI_FREE)

    @property
    def bound(self) -> List[int]:
        return self._of(IndexClass.BOUND)

    @property
    def M(self) -> int:
        return len(self.quasi_free)

    @property
    def lam(self) -> List[int]:
        """Free and quasi-free indices"""
        return sorted(self.free + self.quasi_free)

    def band_of(self, i: int) -> Tuple[int, ...]:
        for band in self.bands:
            if i in band:
                return band
        raise BandError(f"index {i} not in {self.indices}")

    def same_band(self, i: int, j: int) -> bool:
        return j in self.band_of(i)

    def partition(self) -> frozenset:
        return frozenset(frozenset(b) for b in self.bands)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "indices": list(self.indices),
            "bands": [list(b) for b in self.bands],
            "classification": {str(i): c.value for i, c in sorted(self.classification.items())},
            "quasi_bind": {str(i): j for i, j in sorted(self.quasi_bind.items())},
            "bind": {str(i): j for i, j in sorted(self.bind.items())},
            "M": self.M,
            "params": self.params.to_dict() if self.params else None,
        }


def partition_from_splits(order: Sequence[int], split_positions: Sequence[int]) -> Tuple[Tuple[int, ...], ...]:
    """Cut the value-sorted index order before each split position"""
    edges = [0] + sorted(split_positions) + [len(order)]
    return tuple(tuple(order[a:b]) for a, b in zip(edges[:-1], edges[1:]))


def build_bands(t: Sequence[float], delta: float, alpha1: float, metric: SeparationMetric,
                indices: Optional[Sequence[int]] = None, delta_prime: Optional[float] = None,
                beta1: Optional[float] = None) -> BandStructure:
    """Split the sorted points wherever the weighted gap exceeds delta * alpha1"""
    values = _as_index_map(t, indices)
    if any(v <= 0 for v in values.values()):
        raise BandError("band structures live on (0, inf)")
    order = tuple(sorted(values, key=values.__getitem__))
    sorted_values = [values[i] for i in order]
    if any(b <= a for a, b in zip(sorted_values, sorted_values[1:])):
        raise BandError("coincident points")
    splits = tuple(
        p for p in range(1, len(order))
        if sorted_values[p] - sorted_values[p - 1]
        > metric.threshold(delta * alpha1, sorted_values[p - 1], sorted_values[p])
    )
    params = BandParams(delta, alpha1, metric, delta_prime, beta1)
    return BandStructure(tuple(order), partition_from_splits(order, splits), params, order, splits)


def idempotence_failures(bs: BandStructure, t: Sequence[float],
                         indices: Optional[Sequence[int]] = None) -> List[str]:
    """Rebuild bands from the split points of `bs`; empty when the partition is a fixed point.

    Each band rebuilt on its own points must stay one band, and the two
    points straddling each split must stay apart.
    """
    if bs.params is None:
        raise BandError("band structure carries no construction parameters")
    values = _as_index_map(t, indices)
    p = bs.params

    def rebuild(members: Sequence[int]) -> BandStructure:
        return build_bands([values[i] for i in members], p.delta, p.alpha1, p.metric, indices=members)

    failures = []
    recut = frozenset(frozenset(b) for b in partition_from_splits(bs.order, bs.split_positions))
    if recut != bs.partition():
        failures.append(f"splits {list(bs.split_positions)} do not cut {[list(b) for b in bs.bands]}")
    for band in bs.bands:
        again = rebuild(band)
        if len(again.bands) != 1:
            failures.append(f"band {list(band)} splits into {[list(b) for b in again.bands]}")
    for position in bs.split_positions:
        pair = bs.order[position - 1:position + 1]
        if len(rebuild(pair).bands) != 2:
            failures.append(f"split between {pair[0]} and {pair[1]} merges")
    return failures


def refines(fine: BandStructure, coarse: BandStructure) -> bool:
    """Every band of `fine` lies inside one band of `coarse`"""
    return all(set(band) <= set(coarse.band_of(band[0])) for band in fine.bands)


@dataclass
class RefinedBands:
    structure: BandStructure
    rounds: int
    delta: float
    delta_prime: float


def refine_band_structure(t: Sequence[float], delta: float, alpha1: float, metric: SeparationMetric,
                          epsilon: float, indices: Optional[Sequence[int]] = None,
                          beta1: Optional[float] = None) -> RefinedBands:
    """Shrink delta until no consecutive weighted gap falls in the window (delta_(r+1) alpha1, delta_r alpha1].

    Each round multiplies delta by epsilon / (2k); k - 1 gaps can occupy at
    most k - 1 of the 2d windows, so a clean window appears within 2d rounds
    when k <= 2d. Bands are then built at delta_r with delta' = epsilon delta_r.
    """
    values = _as_index_map(t, indices)
    k = len(values)
    shrink = epsilon / (2 * k)
    srt = sorted(values.values())
    gaps = [float(metric(a, b)) for a, b in zip(srt, srt[1:])]
    rounds = max(2 * metric.d, k)
    current = delta
    for r in range(rounds + 1):
        lower = current * shrink
        if not any(lower * alpha1 < g <= current * alpha1 for g in gaps):
            structure = build_bands(list(values.values()), current, alpha1, metric,
                                    indices=list(values), delta_prime=epsilon * current, beta1=beta1)
            logger.debug("band refinement settled after %d rounds at delta=%.3e", r, current)
            return RefinedBands(structure, r, current, epsilon * current)
        current = lower
    raise BandError(f"no clean scale window within {rounds} rounds for {k} points")


@dataclass
class ClauseReport:
    clause: str
    checked: int = 0
    witnesses: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.witnesses

    def to_dict(self) -> Dict[str, Any]:
        return {
            "clause": self.clause,
            "checked": self.checked,
            "passed": self.passed,
            "witnesses": [list(w) for w in self.witnesses],
        }


def _pair_check(report: ClauseReport, i: int, j: int, ok: bool) -> None:
    report.checked += 1
    if not ok:
        report.witnesses.append((i, j))


def verify_band_conclusions(bs: BandStructure, t: Sequence[float], c0: float, beta1: float,
                            delta_prime: Optional[float] = None,
                            settings: Optional[BandSettings] = None) -> Dict[str, ClauseReport]:
    """Pointwise check of the separation clauses.

    (ii)  different bands: |t_i - t_j| > c delta alpha1 w_ij, with c the module ">~" constant
    (iii) i quasi-bound to j: c0 beta1 w_ij < |t_i - t_j| < delta alpha1 w_ij
    (iv)  i bound to j: |t_i - t_j| < delta' alpha1 w_ij
    where w_ij = (t_i t_j)^(-K/d(d+1)).
    """
    if bs.params is None:
        raise BandError("band structure carries no parameters")
    settings = settings or BandSettings()
    values = _as_index_map(t, bs.indices)
    p = bs.params
    metric = p.metric
    delta_prime = delta_prime if delta_prime is not None else p.delta_prime

    clauses = {name: ClauseReport(name) for name in ("ii", "iii", "iv")}
    for i, j in combinations(bs.indices, 2):
        if bs.same_band(i, j):
            continue
        gap = abs(values[i] - values[j])
        _pair_check(clauses["ii"], i, j,
                    gap > settings.gtrsim * metric.threshold(p.delta * p.alpha1, values[i], values[j]))
    for i, j in bs.quasi_bind.items():
        gap = abs(values[i] - values[j])
        w = metric.weight(values[i], values[j])
        _pair_check(clauses["iii"], i, j, c0 * beta1 * w < gap < p.delta * p.alpha1 * w)
    if delta_prime is not None:
        for i, j in bs.bind.items():
            gap = abs(values[i] - values[j])
            _pair_check(clauses["iv"], i, j, gap < delta_prime * p.alpha1 * metric.weight(values[i], values[j]))
    for report in clauses.values():
        if not report.passed:
            logger.info("clause (%s) fails on %d pair(s)", report.clause, len(report.witnesses))
    return clauses


@dataclass
class ComparabilityResult:
    max_ratio: float
    pairs: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_ratio < self.threshold


def within_band_comparability(bs: BandStructure, t: Sequence[float], c_floor: float,
                              settings: Optional[BandSettings] = None) -> ComparabilityResult:
    """max |t_i - t_j| / min(t_i, t_j) over same-band pairs; needs every t_i >= c_floor alpha1^n"""
    if bs.params is None:
        raise BandError("band structure carries no parameters")
    settings = settings or BandSettings()
    values = _as_index_map(t, bs.indices)
    floor = c_floor * bs.params.alpha1 ** bs.params.metric.n
    low = [i for i, v in values.items() if v < floor]
    if low:
        raise PreconditionError(f"t below the floor {floor:.3e} at indices {low}")
    ratio, pairs = 0.0, 0
    for band in bs.bands:
        for i, j in combinations(band, 2):
            pairs += 1
            ratio = max(ratio, abs(values[i] - values[j]) / min(values[i], values[j]))
    return ComparabilityResult(ratio, pairs, settings.within_band_threshold)


@dataclass
class TwoStageBands:
    first: BandStructure
    second: BandStructure
    top: int
    clauses: Dict[str, ClauseReport]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "first": self.first.to_dict(),
            "second": self.second.to_dict(),
            "top": self.top,
            "clauses": {k: v.to_dict() for k, v in self.clauses.items()},
        }


def check_parameter_chain(delta: float, delta_prime: float, rho: float, rho_prime: float, epsilon: float) -> None:
    """0 < rho' < epsilon rho, rho < delta', delta' < epsilon delta"""
    if not 0 < rho_prime < epsilon * rho:
        raise ParameterChainError(f"need 0 < rho' < epsilon rho, got rho'={rho_prime}, rho={rho}")
    if not rho < delta_prime:
        raise ParameterChainError(f"need rho < delta', got rho={rho}, delta'={delta_prime}")
    if not delta_prime < epsilon * delta:
        raise ParameterChainError(f"need delta' < epsilon delta, got delta'={delta_prime}, delta={delta}")


def build_two_stage_bands(t: Sequence[float], delta: float, delta_prime: float, rho: float, rho_prime: float,
                          alpha1: float, gamma2: float, metric: SeparationMetric, beta1: float, beta2: float,
                          c_n: float = 0.125, epsilon: float = 1.0 / 64.0) -> TwoStageBands:
    """First stage at delta alpha1 on {1..2d-1}; second stage at rho gamma2 on the band holding 2d-1"""
    check_parameter_chain(delta, delta_prime, rho, rho_prime, epsilon)
    values = _as_index_map(t, None)
    top = len(values)
    if top != 2 * metric.d - 1:
        raise BandError(f"two-stage structures take 2d-1 = {2 * metric.d - 1} points, got {top}")

    first = build_bands(list(values.values()), delta, alpha1, metric, delta_prime=delta_prime, beta1=beta1)
    band = first.band_of(top)
    second = build_bands([values[i] for i in band], rho, gamma2, metric, indices=band,
                         delta_prime=rho_prime, beta1=beta1)

    names = ("first-separated", "first-quasi", "first-bound", "second-separated", "second-quasi", "second-bound")
    clauses = {name: ClauseReport(name) for name in names}

    def gap(i: int, j: int) -> float:
        return abs(values[i] - values[j])

    def w(i: int, j: int) -> float:
        return float(metric.weight(values[i], values[j]))

    for i, j in combinations(first.indices, 2):
        if not first.same_band(i, j):
            _pair_check(clauses["first-separated"], i, j, gap(i, j) >= delta * alpha1 * w(i, j))
    for i, j in first.quasi_bind.items():
        _pair_check(clauses["first-quasi"], i, j, c_n * beta1 * w(i, j) <= gap(i, j) < delta * alpha1 * w(i, j))
    for i, j in first.bind.items():
        _pair_check(clauses["first-bound"], i, j, gap(i, j) < delta_prime * alpha1 * w(i, j))

    for i, j in combinations(second.indices, 2):
        if not second.same_band(i, j):
            _pair_check(clauses["second-separated"], i, j, gap(i, j) >= rho * gamma2 * w(i, j))
    for i, j in second.quasi_bind.items():
        upper_ok = gap(i, j) < rho * gamma2 * w(i, j)
        if i == top:
            lower_ok = c_n * beta2 * w(i, j) < gap(i, j)
        else:
            lower_ok = c_n * beta1 * w(i, j) <= gap(i, j)
        _pair_check(clauses["second-quasi"], i, j, upper_ok and lower_ok)
    for i, j in second.bind.items():
        _pair_check(clauses["second-bound"], i, j, gap(i, j) <= rho_prime * gamma2 * w(i, j))

    return TwoStageBands(first, second, top, clauses)


def alternating_sum(curve: PolyCurve, t: Sequence[float]) -> np.ndarray:
    """sum_j (-1)^(j+1) P(t_j)"""
    out = np.zeros(curve.dim)
    for j, tj in enumerate(t, start=1):
        out += (1.0 if j % 2 else -1.0) * eval_curve(curve, float(tj))
    return out


@dataclass
class TowerParams:
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    c: float = 0.125
    c_prime: float = 0.5
    grid: int = 2048
    branching: int = 4
    max_tuples: int = 64
    x0_candidates: int = 16

    @property
    def gamma1(self) -> float:
        return max(self.alpha1, self.beta1)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class LevelRecord:
    level: int
    target: str
    sign: int
    demand: float
    floor: float
    retained: int
    pruned: int
    min_mass: float
    max_mass: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class ExcisionRecord:
    level: int
    center: float
    radius: float
    mass: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.mass <= self.bound * (1.0 + 1e-12)


@dataclass
class TupleTower:
    x0: np.ndarray
    variant: Variant
    params: TowerParams
    levels: List[np.ndarray]
    records: List[LevelRecord]
    excisions: List[ExcisionRecord]
    K: int
    d: int

    @property
    def top(self) -> int:
        return len(self.levels)

    def tuples(self, level: Optional[int] = None) -> np.ndarray:
        return self.levels[(level or self.top) - 1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "x0": self.x0.tolist(),
            "params": self.params.to_dict(),
            "levels": [r.to_dict() for r in self.records],
            "excisions_within_bound": all(e.within_bound for e in self.excisions),
        }


def _level_rules(variant: Variant, d: int, i: int) -> Tuple[str, int, str]:
    """(target name, sign of P(t_i), demand key) for level i"""
    sign = 1 if i % 2 else -1
    if variant is Variant.MLE:
        top = 2 * d
        if i % 2:
            return "F", sign, "beta1"
        return ("E2" if i == top else "E1"), sign, ("alpha2" if i == top else "alpha1")
    top = 2 * d - 1
    if i % 2 == 0:
        return "E", sign, "alpha1"
    return ("F2" if i == top else "F1"), sign, ("beta2" if i == top else "beta1")


def _separation_thresholds(variant: Variant, params: TowerParams, i: int, top: int,
                           prior: np.ndarray, two_kappa: float, n: float) -> Tuple[np.ndarray, float]:
    """Excision radii around prior t_j and an extra floor for level i"""
    if i < top:
        scale = params.beta1 if i % 2 else params.alpha1
        return params.c * scale * prior ** (-two_kappa), 0.0
    top_scale = params.alpha2 if variant is Variant.MLE else params.beta2
    low_cut = (params.c if variant is Variant.MLE else params.c_prime) * top_scale ** n
    radii = np.where(prior < low_cut, 0.0, params.c_prime * top_scale * prior ** (-two_kappa))
    extra_floor = 2.0 * low_cut if np.any(prior < low_cut) else 0.0
    return radii, extra_floor


def build_tuple_tower(curve: PolyCurve, interval: Interval, sets: Dict[str, GridSet], variant: Variant,
                      params: TowerParams, K: int = 0, seed: int = 0) -> TupleTower:
    """Greedy grid construction of the nested parameter sets.

    `sets` maps target names to GridSets: E1, E2, F for mlE and E, F1, F2 for mlF.
    Fails with TowerShortfallError when no tuple keeps the demanded mu-mass.
    """
    if not (interval.bounded and interval.lo >= 0):
        raise BandError(f"towers need a bounded interval in [0, inf), got {interval}")
    d = curve.dim
    required = ("E1", "E2", "F") if variant is Variant.MLE else ("E", "F1", "F2")
    missing = [name for name in required if name not in sets]
    if missing:
        raise BandError(f"missing target sets {missing}")
    if variant is Variant.MLE and params.alpha2 < params.alpha1:
        logger.warning("alpha2 < alpha1: the tower floors no longer dominate alpha1^n")

    mu = MuMeasure(K, d)
    n = float(mu.n)
    two_kappa = float(mu.weight_exponent)
    r_edges = np.linspace(float(mu.radius(interval.lo)), float(mu.radius(interval.hi)), params.grid + 1)
    s_grid = mu.point_at_radius(0.5 * (r_edges[:-1] + r_edges[1:]))
    cell_mass = n * (r_edges[1] - r_edges[0])
    P_grid = eval_curve(curve, s_grid)
    top = 2 * d if variant is Variant.MLE else 2 * d - 1

    def floor_for(i: int) -> float:
        if i < top:
            return params.c * params.gamma1 ** n
        return params.c * (params.alpha2 if variant is Variant.MLE else params.beta2) ** n

    def admissible(y: np.ndarray, prefix: np.ndarray, i: int) -> Tuple[np.ndarray, List[ExcisionRecord]]:
        target, sign, _ = _level_rules(variant, d, i)
        mask = sets[target].contains(y + sign * P_grid)
        mask &= s_grid >= floor_for(i)
        excised = []
        if len(prefix):
            radii, extra_floor = _separation_thresholds(variant, params, i, top, prefix, two_kappa, n)
            if extra_floor:
                mask &= s_grid > extra_floor
            for tj, radius in zip(prefix, radii):
                if radius > 0:
                    mask &= np.abs(s_grid - tj) >= radius
                    if i == top:
                        excised.append(ExcisionRecord(
                            i, float(tj), float(radius), near_point_excision_mass(mu, float(tj), float(radius)),
                            2.0 * radius * (tj + radius) ** two_kappa))
        return mask, excised

    source_name = "E1" if variant is Variant.MLE else "E"
    source = sets[source_name]
    rng = sampling.stream(seed, f"tower:{variant.value}:x0")
    candidates = _sample_set(source, rng, params.x0_candidates)
    masses = [admissible(x, np.empty(0), 1)[0].sum() for x in candidates]
    x0 = candidates[int(np.argmax(masses))]

    levels: List[np.ndarray] = []
    records: List[LevelRecord] = []
    excisions: List[ExcisionRecord] = []
    prefixes = np.empty((1, 0))
    for i in range(1, top + 1):
        target, sign, key = _level_rules(variant, d, i)
        demand = params.c * getattr(params, key)
        level_rng = sampling.stream(seed, f"tower:{variant.value}:level", i)
        children, kept_masses, pruned = [], [], 0
        best = 0.0
        for prefix in prefixes:
            y = x0 + alternating_sum(curve, prefix)
            mask, excised = admissible(y, prefix, i)
            mass = float(mask.sum()) * cell_mass
            best = max(best, mass)
            if mass < demand:
                pruned += 1
                continue
            excisions.extend(excised)
            kept_masses.append(mass)
            cells = np.flatnonzero(mask)
            pick = level_rng.choice(cells, size=min(params.branching, len(cells)), replace=False)
            for cell in np.sort(pick):
                children.append(np.append(prefix, s_grid[cell]))
        if not children:
            raise TowerShortfallError(i, best, demand)
        children = np.array(children)
        if len(children) > params.max_tuples:
            keep = np.sort(level_rng.choice(len(children), size=params.max_tuples, replace=False))
            children = children[keep]
        records.append(LevelRecord(i, target, sign, demand, floor_for(i), len(children), pruned,
                                   min(kept_masses), max(kept_masses)))
        levels.append(children)
        prefixes = children
        logger.debug("tower level %d: %d tuples, min mass %.4g (demand %.4g)", i, len(children),
                     min(kept_masses), demand)

    return TupleTower(np.asarray(x0), variant, params, levels, records, excisions, K, d)


def _sample_set(gs: GridSet, rng: np.random.Generator, count: int) -> np.ndarray:
    volumes = np.array([b.volume for b in gs.boxes])
    choice = rng.choice(len(gs.boxes), size=count, p=volumes / volumes.sum())
    local = np.array([gs.boxes[k].sample(rng, 1)[0] for k in choice])
    return gs.to_world(local)


def near_point_excision_mass(mu: MuMeasure, center: float, radius: float) -> float:
    """mu-mass of (center - radius, center + radius) within [0, inf)"""
    return mu.ball_mass(center, radius)


@dataclass
class ElimDiffReport:
    bullets: Dict[str, ClauseReport]
    branches: Dict[str, int]

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.bullets.values())


def check_elim_diff(t: Sequence[float], params: TowerParams, variant: Variant, K: int, d: int,
                    settings: Optional[BandSettings] = None) -> ElimDiffReport:
    """Separations of a top-level tower tuple from every earlier coordinate.

    k odd: beta1; k even below the top: alpha1; k at the top:
    alpha2^((1+n)/2) alpha1^((1-n)/2) (mlE) or beta2^((1+n)/2) beta1^((1-n)/2) (mlF),
    each times c/8 (t_k t_j)^(-K/d(d+1)).
    """
    settings = settings or BandSettings()
    metric = SeparationMetric(K, d)
    n = metric.n
    top = 2 * d if variant is Variant.MLE else 2 * d - 1
    values = [float(x) for x in t]
    if len(values) != top:
        raise BandError(f"expected a level-{top} tuple, got {len(values)} entries")

    if variant is Variant.MLE:
        top_scale = params.alpha2 ** ((1 + n) / 2) * params.alpha1 ** ((1 - n) / 2)
    else:
        top_scale = params.beta2 ** ((1 + n) / 2) * params.beta1 ** ((1 - n) / 2)

    bullets = {name: ClauseReport(name) for name in ("odd", "even", "top")}
    branches = {"separated": 0, "comparable": 0}
    for k in range(2, top + 1):
        if k == top:
            name, scale = "top", top_scale
        elif k % 2:
            name, scale = "odd", params.beta1
        else:
            name, scale = "even", params.alpha1
        tk = values[k - 1]
        for j in range(1, k):
            tj = values[j - 1]
            if min(tj, tk) <= settings.much_less * max(tj, tk):
                branches["separated"] += 1
            else:
                branches["comparable"] += 1
            threshold = settings.gtrsim * params.c * scale * metric.weight(tk, tj)
            _pair_check(bullets[name], j, k, abs(tk - tj) >= threshold)
    return ElimDiffReport(bullets, branches)


@dataclass
class LowerBoundParams:
    alpha1: float
    alpha2: float
    beta1: float
    K: int = 0
    c0: float = 1.0 / 64.0


@dataclass
class LowerBoundResult:
    lhs: float
    rhs: float
    second_lhs: float
    second_rhs: float
    M: int

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs

    @property
    def second_ratio(self) -> float:
        return self.second_lhs / self.second_rhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
            "second_lhs": self.second_lhs, "second_rhs": self.second_rhs,
            "second_ratio": self.second_ratio, "M": self.M,
        }


def lower_bound_JP_product(curve: PolyCurve, t: Sequence[float], bs: BandStructure,
                           params: LowerBoundParams,
                           settings: Optional[BandSettings] = None) -> LowerBoundResult:
    """|J_P(tau)| against alpha1^(d(d-1)/2) (beta1/alpha1)^M (alpha2/alpha1)^((1+n)(d-1)/2) prod tau^(2K/d(d+1)).

    tau collects the free and quasi-free coordinates of t. Refuses data that
    violates the band clauses, since the bound is conditional on them.
    """
    d = curve.dim
    values = _as_index_map(t, bs.indices)
    if len(bs.lam) != d:
        raise ClauseViolationError("i", [tuple(bs.lam)])
    clauses = verify_band_conclusions(bs, list(values.values()), params.c0, params.beta1, settings=settings)
    for name, report in clauses.items():
        if not report.passed:
            raise ClauseViolationError(name, report.witnesses)

    metric = SeparationMetric(params.K, d)
    n, kap = metric.n, metric.kappa
    tau = np.array([values[i] for i in bs.lam])
    M = bs.M
    scale = (params.alpha1 ** (d * (d - 1) / 2) * (params.beta1 / params.alpha1) ** M
             * (params.alpha2 / params.alpha1) ** ((1 + n) * (d - 1) / 2))
    lhs = float(abs(jacobian_J_batch(curve, tau[None, :])[0]))
    rhs = float(scale * np.prod(tau ** (2 * kap)))

    diffs = np.prod([abs(tau[b] - tau[a]) for a, b in combinations(range(d), 2)])
    weights = np.prod([(tau[a] * tau[b]) ** (-kap) for a, b in combinations(range(d), 2)])
    power = np.prod(tau ** (params.K / d))
    return LowerBoundResult(lhs, rhs, float(power * diffs), float(scale * power * weights), M)


def sample_tower_configurations(tower: TupleTower, count: int, seed: int = 0) -> np.ndarray:
    """count top-level tuples drawn with replacement from the tower"""
    rng = sampling.stream(seed, f"tower-configurations:{tower.variant.value}")
    pool = tower.tuples()
    return pool[rng.integers(0, len(pool), size=count)]


@dataclass
class LowerBoundCampaign:
    ratios: List[float]
    refused: int
    skipped: int

    @property
    def evaluated(self) -> int:
        return len(self.ratios)

    @property
    def min_ratio(self) -> float:
        return min(self.ratios) if self.ratios else float("nan")


def lower_bound_campaign(curve: PolyCurve, tower: TupleTower, params: LowerBoundParams, count: int,
                         seed: int = 0, settings: Optional[BandSettings] = None) -> LowerBoundCampaign:
    """Evaluate the conditional lower bound on tower-generated configurations.

    For each configuration the trailing k coordinates (k = d, ..., top - 1)
    get a refined band structure; the first k with exactly d free or
    quasi-free indices is used.
    """
    settings = settings or BandSettings()
    d = curve.dim
    metric = SeparationMetric(params.K, d)
    top = tower.top
    ratios, refused, skipped = [], 0, 0
    for config in sample_tower_configurations(tower, count, seed):
        chosen = None
        for k in range(d, top):
            indices = list(range(top - k + 1, top + 1))
            refined = refine_band_structure(config[top - k:], settings.much_less, params.alpha1, metric,
                                            settings.epsilon, indices=indices, beta1=params.beta1)
            if len(refined.structure.lam) == d:
                chosen = refined.structure
                break
        if chosen is None:
            skipped += 1
            continue
        try:
            result = lower_bound_JP_product(curve, config[top - len(chosen.indices):], chosen, params, settings)
        except ClauseViolationError as exc:
            refused += 1
            logger.debug("configuration refused: %s", exc)
            continue
        ratios.append(result.ratio)
    logger.info("lower bound campaign: %d evaluated, %d refused, %d skipped", len(ratios), refused, skipped)
    return LowerBoundCampaign(ratios, refused, skipped)
