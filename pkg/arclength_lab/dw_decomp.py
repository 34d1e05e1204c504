"""
Interval decomposition of polynomial curves

Splits the real line into pieces on which the torsion behaves like a
monomial centred off the piece: |L_P(s)| ~ A |s - b|^K. Built from two
procedures. D1 partitions an interval by nearest root and records per-root
power comparability. D2 separates a centre from a root set into gaps and
dyadic shells. The pipeline applies them step by step along the minor
ladder L_1, ..., L_d.

All comparabilities use factor-2 dyadic splitting; measured constants are
reported by the verification probes in this module.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from arclength_lab import sampling
from arclength_lab.errors import DecompositionError, DegenerateCurveError, RootFindingError
from arclength_lab.poly_core import (
    PolyCurve,
    Polynomial,
    eval_curve,
    log_abs_jacobian_batch,
    minor_ladder,
    reparametrize,
    scale_curve,
    torsion,
)
from config.settings import ComparabilitySettings, RootSettings

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); endpoints may be infinite"""
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DecompositionError(f"empty interval ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, s: float) -> bool:
        return self.lo < s < self.hi

    def split(self, points: Sequence[float]) -> List["Interval"]:
        cuts = sorted({float(p) for p in points if self.lo < p < self.hi})
        edges = [self.lo] + cuts + [self.hi]
        return [Interval(a, b) for a, b in zip(edges[:-1], edges[1:])]

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo < hi else None

    def distance_range(self, b: float) -> Tuple[float, float]:
        """Range of |s - b| over the interval; b must not be interior"""
        if b <= self.lo:
            return self.lo - b, self.hi - b
        if b >= self.hi:
            return b - self.hi, b - self.lo
        raise DecompositionError(f"centre {b} lies inside ({self.lo}, {self.hi})")

    def side(self, b: float) -> int:
        return 1 if b <= self.lo else -1

    def to_dict(self) -> Dict[str, float]:
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Root:
    value: complex
    multiplicity: int

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


@dataclass(frozen=True)
class RootSet:
    roots: Tuple[Root, ...]
    tolerance: float

    @property
    def degree(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    def values(self) -> List[complex]:
        return [r.value for r in self.roots]

    def real_values(self) -> List[float]:
        return sorted(r.value.real for r in self.roots if r.is_real)

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def _newton_polish(coeffs: np.ndarray, z: complex, steps: int) -> Tuple[complex, float, float]:
    """Refine a simple root of the polynomial with highest-first `coeffs`.

    Returns (root, residual, certified radius); the radius n|f/f'| bounds the
    distance to some true root.
    """
    deriv = np.polyder(coeffs)
    n = len(coeffs) - 1
    for _ in range(steps):
        fz = np.polyval(coeffs, z)
        dz = np.polyval(deriv, z)
        if dz == 0:
            break
        step = fz / dz
        z = z - step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    fz = np.polyval(coeffs, z)
    dz = np.polyval(deriv, z)
    radius = INF if dz == 0 else n * abs(fz / dz)
    return complex(z), float(abs(fz)), float(radius)


def find_roots(p: Polynomial, tol: float = 1e-10, settings: Optional[RootSettings] = None) -> RootSet:
    """All complex roots of p with multiplicity.

    Multiplicities come from an exact squarefree decomposition; each squarefree
    factor is solved by companion-matrix eigenvalues plus Newton refinement
    and every root is certified within tol * max(1, |root|).
    """
    settings = settings or RootSettings(tol=tol)
    if p.is_zero:
        raise RootFindingError("the zero polynomial has no finite root set")
    if p.degree == 0:
        return RootSet((), tol)

    _, factors = p.to_sympy().sqf_list()
    candidates: List[Tuple[complex, int]] = []
    failures = []
    for factor, multiplicity in factors:
        coeffs = np.array([float(c) for c in factor.all_coeffs()])
        if factor.degree() == 1:
            candidates.append((complex(-coeffs[1] / coeffs[0]), multiplicity))
            continue
        for z0 in np.roots(coeffs):
            z, residual, radius = _newton_polish(coeffs, complex(z0), settings.newton_steps)
            if radius > tol * max(1.0, abs(z)):
                failures.append((z, residual))
            candidates.append((z, multiplicity))
    if failures:
        report = ", ".join(f"{z:.6g} (residual {r:.3e})" for z, r in failures)
        raise RootFindingError(f"could not certify roots of {p}: {report}", failures)

    # merge clusters closer than merge_factor * tol
    merged: List[List] = []
    for z, m in sorted(candidates, key=lambda item: (item[0].real, item[0].imag)):
        for cluster in merged:
            if abs(cluster[0] - z) <= settings.merge_factor * tol * max(1.0, abs(z)):
                cluster[0] = (cluster[0] * cluster[1] + z * m) / (cluster[1] + m)
                cluster[1] += m
                break
        else:
            merged.append([z, m])

    reals, upper, lower = [], [], []
    for z, m in merged:
        if abs(z.imag) <= tol * max(1.0, abs(z)):
            reals.append(Root(complex(z.real, 0.0), m))
        elif z.imag > 0:
            upper.append(Root(z, m))
        else:
            lower.append(Root(z, m))
    if sorted(r.multiplicity for r in upper) != sorted(r.multiplicity for r in lower):
        raise RootFindingError(f"non-conjugate complex roots for real polynomial {p}")
    pairs = []
    for r in upper:
        pairs.append(r)
        pairs.append(Root(r.value.conjugate(), r.multiplicity))
    roots = tuple(sorted(reals + pairs, key=lambda r: (r.value.real, r.value.imag)))
    result = RootSet(roots, tol)
    if result.degree != p.degree:
        raise RootFindingError(f"multiplicities sum to {result.degree}, expected {p.degree}")
    return result


def _representative(u_lo: float, u_hi: float) -> float:
    if math.isinf(u_hi):
        return max(2.0 * u_lo, u_lo + 1.0)
    return 0.5 * (u_lo + u_hi)


@dataclass(frozen=True)
class RootComparability:
    """|s - root| ~ A |s - b|^delta on a piece"""
    root: complex
    delta: int
    A: float


@dataclass(frozen=True)
class D1Piece:
    interval: Interval
    b: Optional[float]
    factors: Tuple[RootComparability, ...] = ()
    flags: Tuple[str, ...] = ()


def _comparability(z: complex, b: float, u_lo: float, u_hi: float) -> RootComparability:
    rho = abs(z - b)
    if _representative(u_lo, u_hi) < rho:
        return RootComparability(z, 0, rho)
    return RootComparability(z, 1, 1.0)


def d1_decompose(J: Interval, etas: Sequence[complex]) -> List[D1Piece]:
    """Nearest-root partition of J.

    Each piece gets the real part b of its nearest root (|s - b| <= |s - eta|
    for every eta) and, per root, |s - eta| within [1/2, 2] of A |s - b|^delta.
    """
    roots = [complex(z) for z in (etas.values() if isinstance(etas, RootSet) else etas)]
    if not roots:
        return [D1Piece(J, None, (), ("no-roots",))]

    centers = sorted({z.real for z in roots})
    cuts = [0.5 * (a + c) for a, c in zip(centers[:-1], centers[1:])]
    pieces: List[D1Piece] = []
    for i, b in enumerate(centers):
        lo = cuts[i - 1] if i > 0 else -INF
        hi = cuts[i] if i < len(cuts) else INF
        cell = J.intersect(Interval(lo, hi)) if lo < hi else None
        if cell is None:
            continue
        radii = sorted({abs(z - b) for z in roots})
        breakpoints = [b] + [b + sign * r for r in radii if r > 0 for sign in (-1.0, 1.0)]
        for part in cell.split(breakpoints):
            u_lo, u_hi = part.distance_range(b)
            factors = tuple(_comparability(z, b, u_lo, u_hi) for z in roots)
            pieces.append(D1Piece(part, b, factors))
    return pieces


class PieceKind(Enum):
    GAP = "gap"
    DYADIC = "dyadic"


@dataclass(frozen=True)
class GapDyadicPiece:
    interval: Interval
    kind: PieceKind
    exponents: Tuple[int, ...] = ()
    level: Optional[float] = None


def _merge_shells(radii: Sequence[float]) -> List[Tuple[float, float]]:
    shells: List[List[float]] = []
    for r in sorted(radii):
        lo, hi = r / 2.0, 2.0 * r
        if shells and lo <= shells[-1][1]:
            shells[-1][1] = max(shells[-1][1], hi)
        else:
            shells.append([lo, hi])
    return [(a, c) for a, c in shells]


def d2_decompose(J: Interval, b: float, betas: Sequence[complex]) -> List[GapDyadicPiece]:
    """Gaps and dyadic shells of J around b for offsets beta (roots shifted by b).

    Dyadic pieces satisfy |s - b| in [D, 2D]. On gaps every offset is either
    far outside (|s - b - beta| ~ |beta|, exponent 0) or far inside
    (|s - b - beta| ~ |s - b|, exponent 1), with |s - b - beta| >= |s - b| / 2.
    """
    offsets = sorted((complex(z) for z in (betas.values() if isinstance(betas, RootSet) else betas)), key=abs)
    if not offsets:
        return [GapDyadicPiece(J, PieceKind.GAP, ())]

    shells = _merge_shells([abs(z) for z in offsets if abs(z) > 0])
    u_points = set()
    for a, c in shells:
        u = a
        while u < c:
            u_points.add(u)
            u *= 2.0
        u_points.add(c)
    breakpoints = [b] + [b + sign * u for u in u_points for sign in (-1.0, 1.0)]

    pieces = []
    for part in J.split(breakpoints):
        u_lo, u_hi = part.distance_range(b)
        u_rep = _representative(u_lo, u_hi)
        if any(a <= u_rep <= c for a, c in shells):
            pieces.append(GapDyadicPiece(part, PieceKind.DYADIC, level=u_lo))
        else:
            exponents = tuple(0 if u_rep < abs(z) else 1 for z in offsets)
            pieces.append(GapDyadicPiece(part, PieceKind.GAP, exponents))
    return pieces


class CaseTag(Enum):
    INITIAL = "initial"
    D1 = "d1"
    GAP = "gap"
    DYADIC = "dyadic"
    FINAL = "final"


@dataclass(frozen=True)
class LineageStep:
    step: int
    case: CaseTag
    center: Optional[float]


@dataclass(frozen=True)
class DecompInterval:
    interval: Interval
    b: float
    K: int
    A: float
    comparability: Tuple[float, float] = (float("nan"), float("nan"))
    lineage: Tuple[LineageStep, ...] = ()
    flags: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {
            "interval": self.interval.to_dict(),
            "b": self.b,
            "K": self.K,
            "A": self.A,
            "comparability": {"c_lo": self.comparability[0], "c_hi": self.comparability[1]},
            "lineage": [
                {"step": s.step, "case": s.case.value, "center": s.center} for s in self.lineage
            ],
            "flags": list(self.flags),
        }

    def with_flag(self, flag: str) -> "DecompInterval":
        return self if flag in self.flags else replace(self, flags=self.flags + (flag,))


def lineage_centers(piece: DecompInterval) -> List[float]:
    return [step.center for step in piece.lineage if step.center is not None]


@dataclass
class _Branch:
    interval: Interval
    center: float
    lineage: Tuple[LineageStep, ...]
    ancestors: Tuple[float, ...]


def initial_decomposition(curve: PolyCurve, tol: float = 1e-10) -> List[Interval]:
    """Split R at every real root of L_1..L_d, so each minor is single-signed per piece"""
    cuts = []
    for j in range(1, curve.dim + 1):
        cuts.extend(find_roots(minor_ladder(curve, j), tol).real_values())
    return Interval(-INF, INF).split(cuts)


def piece_count_bound(N: int, d: int) -> int:
    """Worst-case leaf count of dw_decompose as a function of degree N and dimension d"""
    degrees = [max(0, j * N - j * (j + 1) // 2) for j in range(1, d + 1)]
    total_roots = sum(degrees)

    def d1(m: int) -> int:
        return max(1, m) * (2 * m + 2)

    def d2(m: int) -> int:
        return 2 * (3 * m + 2)

    count = (total_roots + 1) * d1(degrees[d - 1])
    for n in range(d - 1):
        m = degrees[n]
        count *= d2(m) * d1(m + n + 1)
    return count * d1(total_roots + d)


def dw_decompose(curve: PolyCurve, tol: float = 1e-10,
                 settings: Optional[ComparabilitySettings] = None) -> List[DecompInterval]:
    """Decompose R into pieces where |L_P(s)| ~ A |s - b|^K with b off the piece.

    Steps: (a) split at real roots of every minor; (b) D1 against the torsion
    zeros; (c) for n = 0..d-2, D2 around b_n against the zeros of L_(n+1),
    keeping b on gaps and re-centring dyadic pieces by D1 against those zeros
    and all earlier centres; (d) a final D1 against every minor zero and every
    ancestor centre, so no leaf contains any of them. Every branch is kept.
    """
    settings = settings or ComparabilitySettings()
    d = curve.dim
    if not curve.nondegenerate:
        raise DegenerateCurveError(f"torsion of {curve.name or 'curve'} vanishes identically")

    minor_roots = [find_roots(minor_ladder(curve, j), tol) for j in range(1, d + 1)]
    torsion_roots = minor_roots[d - 1]
    all_roots = [z for rs in minor_roots for z in rs.values()]

    cuts = sorted({x for rs in minor_roots for x in rs.real_values()})
    frontier: List[_Branch] = []
    for J in Interval(-INF, INF).split(cuts):
        start = (LineageStep(0, CaseTag.INITIAL, None),)
        for part in d1_decompose(J, torsion_roots):
            # constant torsion: centre at the origin
            b0 = part.b if part.b is not None else 0.0
            frontier.append(_Branch(part.interval, b0, start + (LineageStep(0, CaseTag.D1, b0),), (b0,)))

    for n in range(d - 1):
        step_roots = minor_roots[n].values()
        next_frontier: List[_Branch] = []
        for branch in frontier:
            betas = [z - branch.center for z in step_roots]
            for piece in d2_decompose(branch.interval, branch.center, betas):
                if piece.kind is PieceKind.GAP:
                    next_frontier.append(_Branch(
                        piece.interval, branch.center,
                        branch.lineage + (LineageStep(n + 1, CaseTag.GAP, branch.center),),
                        branch.ancestors,
                    ))
                    continue
                etas = list(step_roots) + [complex(a) for a in branch.ancestors]
                for part in d1_decompose(piece.interval, etas):
                    next_frontier.append(_Branch(
                        part.interval, part.b,
                        branch.lineage + (LineageStep(n + 1, CaseTag.DYADIC, part.b),),
                        branch.ancestors + (part.b,),
                    ))
        frontier = next_frontier

    leaves: List[DecompInterval] = []
    lc = abs(float(torsion(curve).leading))
    for branch in frontier:
        etas = all_roots + [complex(a) for a in branch.ancestors]
        for part in d1_decompose(branch.interval, etas):
            b = part.b
            u_lo, u_hi = part.interval.distance_range(b)
            u_rep = _representative(u_lo, u_hi)
            K, A = 0, lc
            for root in torsion_roots:
                rho = abs(root.value - b)
                if u_rep < rho:
                    A *= rho ** root.multiplicity
                else:
                    K += root.multiplicity
            flags = []
            if not part.interval.bounded:
                flags.append("unbounded")
            if K > curve.degree:
                flags.append("K-exceeds-degree")
            leaf = DecompInterval(
                part.interval, b, K, A,
                lineage=branch.lineage + (LineageStep(d, CaseTag.FINAL, b),),
                flags=tuple(flags),
            )
            c_lo, c_hi = _comparability_range(leaf, torsion_roots, lc, settings)
            leaves.append(replace(leaf, comparability=(c_lo, c_hi)))

    leaves.sort(key=lambda p: (p.interval.lo, p.interval.hi))
    bound = piece_count_bound(curve.degree, d)
    logger.info("decomposed %s into %d pieces (bound %d)", curve.name or "curve", len(leaves), bound)
    if len(leaves) > bound:
        raise DecompositionError(f"{len(leaves)} pieces exceeds the bound {bound}")
    return leaves


def _log_abs_torsion(s: np.ndarray, roots: RootSet, lc: float) -> np.ndarray:
    out = np.full(np.shape(s), math.log(lc))
    for root in roots:
        out = out + root.multiplicity * np.log(np.abs(s - root.value))
    return out


def _distance_grid(piece: DecompInterval, grid: int, settings: ComparabilitySettings) -> np.ndarray:
    limit = 2.0 ** settings.truncation_exponent
    u_lo, u_hi = piece.interval.distance_range(piece.b)
    u_lo = max(u_lo, 1.0 / limit)
    u_hi = min(u_hi, limit)
    return np.geomspace(u_lo, u_hi, grid)


def _comparability_range(piece: DecompInterval, roots: RootSet, lc: float,
                         settings: ComparabilitySettings, grid: Optional[int] = None) -> Tuple[float, float]:
    _, ratios = _comparability_samples(piece, roots, lc, settings, grid or settings.grid)
    return float(ratios.min()), float(ratios.max())


def _comparability_samples(piece: DecompInterval, roots: RootSet, lc: float,
                           settings: ComparabilitySettings, grid: int) -> Tuple[np.ndarray, np.ndarray]:
    u = _distance_grid(piece, grid, settings)
    s = piece.b + piece.interval.side(piece.b) * u
    log_ratio = _log_abs_torsion(s, roots, lc) - math.log(piece.A) - piece.K * np.log(u)
    return s, np.exp(log_ratio)


def comparability_profile(piece: DecompInterval, curve: PolyCurve, grid: int = 64,
                          settings: Optional[ComparabilitySettings] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(s, |L_P(s)| / (A |s - b|^K)) on the geometric grid"""
    settings = settings or ComparabilitySettings()
    L = torsion(curve)
    return _comparability_samples(piece, find_roots(L), abs(float(L.leading)), settings, grid)


def verify_torsion_comparability(piece: DecompInterval, curve: PolyCurve, grid: int = 64,
                                 settings: Optional[ComparabilitySettings] = None) -> Tuple[float, float]:
    """(c_lo, c_hi) over a grid geometric in |s - b|, truncated at 2^(+-40)"""
    if grid < 2:
        raise ValueError("grid must have at least 2 points")
    _, ratios = comparability_profile(piece, curve, grid, settings)
    return float(ratios.min()), float(ratios.max())


def _probe_distances(piece: DecompInterval, settings: ComparabilitySettings,
                     radius: Optional[float]) -> Tuple[float, float]:
    limit = 2.0 ** settings.truncation_exponent
    u_lo, u_hi = piece.interval.distance_range(piece.b)
    if math.isinf(u_hi):
        u_hi = settings.probe_radius_factor * max(1.0, u_lo) if radius is None else radius
    # distances below 2^-truncation relative to |b| are not resolvable around b
    return max(u_lo, (1.0 + abs(piece.b)) / limit), min(u_hi, limit)


def sampling_box(piece: DecompInterval, settings: Optional[ComparabilitySettings] = None,
                 radius: Optional[float] = None) -> Tuple[float, float]:
    """Finite sub-box of the piece used by the sampling probes.

    Unbounded pieces are cut at |s - b| = radius, which defaults to
    probe_radius_factor * max(1, u_lo).
    """
    u_lo_eff, u_hi_eff = _probe_distances(piece, settings or ComparabilitySettings(), radius)
    side = piece.interval.side(piece.b)
    ends = sorted((piece.b + side * u_lo_eff, piece.b + side * u_hi_eff))
    return ends[0], ends[1]


@dataclass
class GeometricProbe:
    min_ratio: float
    max_ratio: float
    samples: int
    resampled: int
    box: Tuple[float, float]


def _draw_distinct(rng: np.random.Generator, count: int, d: int,
                   draw: Callable[[np.random.Generator, Tuple[int, int]], np.ndarray]) -> Tuple[np.ndarray, int]:
    tuples = draw(rng, (count, d))
    resampled = 0
    for _ in range(100):
        bad = np.zeros(count, dtype=bool)
        for k in range(d):
            for l in range(k):
                bad |= tuples[:, k] == tuples[:, l]
        if not bad.any():
            break
        resampled += int(bad.sum())
        tuples[bad] = draw(rng, (int(bad.sum()), d))
    return tuples, resampled


def verify_geometric_inequality(piece: DecompInterval, curve: PolyCurve, samples: int, seed: int,
                                settings: Optional[ComparabilitySettings] = None,
                                chunk_size: int = 4096, workers: int = 1, log_scale: bool = False) -> GeometricProbe:
    """min over seeded tuples of |J_P(t)| / (prod |L_P(t_k)|^(1/d) prod_{l<k} |t_k - t_l|)

    Tuples are uniform on the piece cut at |s - b| = 2^(+-truncation_exponent);
    with log_scale the distances |t - b| are log-uniform instead.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    settings = settings or ComparabilitySettings()
    d = curve.dim
    L = torsion(curve)
    roots = find_roots(L)
    lc = abs(float(L.leading))
    lo, hi = sampling_box(piece, settings, radius=2.0 ** settings.truncation_exponent)
    b, side = piece.b, piece.interval.side(piece.b)
    log_u = np.log(_probe_distances(piece, settings, 2.0 ** settings.truncation_exponent))
    tag = f"geometric{'-log' if log_scale else ''}:{piece.interval.lo!r}:{piece.interval.hi!r}"

    def draw(rng, shape):
        if log_scale:
            return b + side * np.exp(rng.uniform(log_u[0], log_u[1], size=shape))
        return rng.uniform(lo, hi, size=shape)

    def work(rng, count, _index):
        tuples, resampled = _draw_distinct(rng, count, d, draw)
        log_j = log_abs_jacobian_batch(curve, tuples)
        log_l = _log_abs_torsion(tuples, roots, lc).sum(axis=1) / d
        log_v = np.zeros(count)
        for k in range(d):
            for l in range(k):
                log_v += np.log(np.abs(tuples[:, k] - tuples[:, l]))
        log_ratio = log_j - log_l - log_v
        return float(log_ratio.min()), float(log_ratio.max()), resampled

    parts = sampling.parallel_chunks(seed, tag, samples, work, chunk_size, workers)
    min_ratio = math.exp(min(p[0] for p in parts))
    max_ratio = math.exp(max(p[1] for p in parts))
    resampled = sum(p[2] for p in parts)
    if min_ratio <= 0:
        logger.warning("geometric probe on %s found a vanishing ratio", piece.interval)
    return GeometricProbe(min_ratio, max_ratio, samples, resampled, (lo, hi))


@dataclass
class CollisionProbe:
    max_multiplicity: int
    bound: int
    witnesses: List[Tuple[float, ...]] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return self.max_multiplicity > self.bound


def _canonical(tuples: np.ndarray, eps: Sequence[int]) -> np.ndarray:
    canon = tuples.copy()
    for value in set(eps):
        idx = [i for i, e in enumerate(eps) if e == value]
        canon[:, idx] = np.sort(canon[:, idx], axis=1)
    return canon


def collision_multiplicity(curve: PolyCurve, tuples: np.ndarray, eps: Sequence[int],
                           quantum: float) -> CollisionProbe:
    """Max number of distinct (up to eps-preserving permutation) tuples per quantized image box"""
    eps = [int(e) for e in eps]
    if any(e not in (-1, 1) for e in eps) or len(eps) != curve.dim:
        raise ValueError(f"eps must be a sign vector of length {curve.dim}")
    tuples = np.atleast_2d(np.asarray(tuples, dtype=float))
    images = np.zeros((len(tuples), curve.dim))
    for j, e in enumerate(eps):
        images += e * eval_curve(curve, tuples[:, j])
    keys = np.floor(images / quantum).astype(np.int64)
    canon = np.round(_canonical(tuples, eps), 12)

    classes: Dict[Tuple[int, ...], Dict[Tuple[float, ...], Tuple[float, ...]]] = {}
    for key, c, raw in zip(map(tuple, keys), map(tuple, canon), map(tuple, tuples)):
        classes.setdefault(key, {}).setdefault(c, raw)
    worst_key = max(classes, key=lambda k: (len(classes[k]), k))
    bound = math.factorial(curve.dim)
    probe = CollisionProbe(len(classes[worst_key]), bound)
    if probe.flagged:
        probe.witnesses = list(classes[worst_key].values())
    return probe


def preimage_collision_probe(piece: DecompInterval, curve: PolyCurve, eps: Sequence[int], samples: int,
                             quantum: float, seed: int = 0,
                             settings: Optional[ComparabilitySettings] = None) -> CollisionProbe:
    """Monte Carlo witness for the d! bound on preimages of the signed sum map"""
    d = curve.dim
    lo, hi = sampling_box(piece, settings)
    rng = sampling.stream(seed, f"collision:{piece.interval.lo!r}:{piece.interval.hi!r}")
    tuples = rng.uniform(lo, hi, size=(samples, d))
    # eps-preserving permutations of every sample map to the same image
    permuted = tuples.copy()
    for value in set(int(e) for e in eps):
        idx = [i for i, e in enumerate(eps) if int(e) == value]
        order = np.argsort(rng.random((samples, len(idx))), axis=1)
        permuted[:, idx] = np.take_along_axis(tuples[:, idx], order, axis=1)
    probe = collision_multiplicity(curve, np.vstack([tuples, permuted]), eps, quantum)
    if probe.flagged:
        logger.warning("collision probe on %s: multiplicity %d exceeds %d", piece.interval,
                       probe.max_multiplicity, probe.bound)
    return probe


@dataclass(frozen=True)
class NormalizedPiece:
    curve: PolyCurve
    interval: Interval
    K: int
    source: DecompInterval
    center: Fraction
    reflection: int
    scale: Fraction
    amplitude: Fraction
    truncated: bool

    def as_piece(self) -> DecompInterval:
        return DecompInterval(self.interval, 0.0, self.K, 1.0, self.source.comparability,
                              self.source.lineage, self.source.flags)


def normalize_piece(piece: DecompInterval, curve: PolyCurve,
                    settings: Optional[ComparabilitySettings] = None) -> NormalizedPiece:
    """Translate b to 0, reflect the piece into (0, inf), rescale to length 1 and
    multiply P so that |L_P'(s)| ~ s^K with constant 1."""
    settings = settings or ComparabilitySettings()
    d = curve.dim
    b = piece.b
    u_lo, u_hi = piece.interval.distance_range(b)
    truncated = math.isinf(u_hi)
    if truncated:
        u_hi = settings.probe_radius_factor * max(1.0, u_lo)
    sigma = piece.interval.side(b)
    a = u_hi - u_lo
    D = d * (d + 1) // 2
    lam = (piece.A * a ** (piece.K + D)) ** (-1.0 / d)

    shifted = reparametrize(curve, Fraction(sigma) * Fraction(a), Fraction(b))
    normalized = scale_curve(shifted, Fraction(lam))
    interval = Interval(u_lo / a, u_hi / a)
    if truncated:
        logger.debug("normalizing unbounded piece %s truncated at |s-b|=%g", piece.interval, u_hi)
    return NormalizedPiece(
        curve=normalized,
        interval=interval,
        K=piece.K,
        source=piece,
        center=Fraction(b),
        reflection=sigma,
        scale=Fraction(a),
        amplitude=Fraction(lam),
        truncated=truncated,
    )


def normalized_comparability(norm: NormalizedPiece, grid: int = 64,
                             settings: Optional[ComparabilitySettings] = None) -> Tuple[float, float]:
    return verify_torsion_comparability(norm.as_piece(), norm.curve, grid, settings)


def check_monotone_centers(piece: DecompInterval, points: int = 16) -> float:
    """Largest violation of |s - b_next| <= |s - b_prev| along the lineage at interior samples"""
    centers = lineage_centers(piece)
    lo, hi = sampling_box(piece)
    s = np.linspace(lo, hi, points + 2)[1:-1]
    worst = 0.0
    for prev, nxt in zip(centers[:-1], centers[1:]):
        worst = max(worst, float(np.max(np.abs(s - nxt) - np.abs(s - prev))))
    return worst


def all_sign_vectors(d: int) -> List[Tuple[int, ...]]:
    return list(product((1, -1), repeat=d))
