"""
Measures on parameter space and box unions in R^d

- MuMeasure: the normalized weight s^(2K/d(d+1)) ds with closed-form masses.
- ArclengthMeasure: |L_P(s)|^(2/d(d+1)) ds by adaptive quadrature.
- Box / GridSet: finite unions of disjoint axis-aligned boxes, optionally
  carried through an affine frame x = M y + v, with exact membership.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from arclength_lab.dw_decomp import find_roots
from arclength_lab.errors import MeasureError
from arclength_lab.exponents import n_exponent
from arclength_lab.poly_core import PolyCurve, arclength_density, torsion

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MuMeasure:
    """d mu(s) = s^(2K/d(d+1)) ds on [0, inf)"""
    K: int
    d: int

    def __post_init__(self):
        if self.K < 0 or self.d < 2:
            raise MeasureError(f"need K >= 0 and d >= 2, got K={self.K}, d={self.d}")

    @property
    def n(self) -> Fraction:
        return n_exponent(self.K, self.d)

    @property
    def weight_exponent(self) -> Fraction:
        return Fraction(2 * self.K, self.d * (self.d + 1))

    def density(self, s):
        return np.asarray(s, dtype=float) ** float(self.weight_exponent)

    def interval_mass(self, a: float, b: float) -> float:
        """mu([a, b]) = n (b^(1/n) - a^(1/n))"""
        if a < 0 or b < 0:
            raise MeasureError(f"mu is defined on [0, inf); got [{a}, {b}]")
        if b < a:
            raise MeasureError(f"empty interval [{a}, {b}]")
        n = float(self.n)
        return n * (b ** (1.0 / n) - a ** (1.0 / n))

    def masses(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        if np.any(a < 0) or np.any(b < a):
            raise MeasureError("intervals must satisfy 0 <= a <= b")
        n = float(self.n)
        return n * (b ** (1.0 / n) - a ** (1.0 / n))

    def radius(self, s):
        """r = s^(1/n), in which mu is uniform with density n"""
        return np.asarray(s, dtype=float) ** (1.0 / float(self.n))

    def point_at_radius(self, r):
        return np.asarray(r, dtype=float) ** float(self.n)

    def point_at_mass(self, mass: float, start: float = 0.0) -> float:
        """s with mu([start, s]) = mass"""
        if mass < 0 or start < 0:
            raise MeasureError("mass and start must be non-negative")
        n = float(self.n)
        return (start ** (1.0 / n) + mass / n) ** n

    def ball_mass(self, center: float, radius: float) -> float:
        """mu of (center - radius, center + radius) intersected with [0, inf)"""
        return self.interval_mass(max(center - radius, 0.0), center + radius)


@dataclass
class ArclengthMeasure:
    """Affine arclength |L_P(s)|^(2/d(d+1)) ds of a polynomial curve"""
    curve: PolyCurve
    epsabs: float = 1e-13
    epsrel: float = 1e-11
    _breaks: Optional[List[float]] = field(default=None, init=False, repr=False)

    def density(self, s):
        return arclength_density(self.curve, s)

    def _breakpoints(self) -> List[float]:
        if self._breaks is None:
            L = torsion(self.curve)
            self._breaks = sorted(find_roots(L).real_values()) if L.degree > 0 else []
        return self._breaks

    def interval_mass(self, a: float, b: float) -> float:
        if b < a:
            raise MeasureError(f"empty interval [{a}, {b}]")
        if a == b:
            return 0.0
        inner = [x for x in self._breakpoints() if a < x < b]
        value, abserr = integrate.quad(self.density, a, b, points=inner or None,
                                       epsabs=self.epsabs, epsrel=self.epsrel, limit=200)
        logger.debug("arclength mass on [%g, %g] = %.12g (+- %.1e)", a, b, value, abserr)
        return float(value)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box corner + [0, sides]"""
    corner: Tuple[float, ...]
    sides: Tuple[float, ...]

    def __post_init__(self):
        corner = tuple(float(x) for x in self.corner)
        sides = tuple(float(x) for x in self.sides)
        if len(corner) != len(sides):
            raise MeasureError("corner and sides differ in dimension")
        if any(not s > 0 or not math.isfinite(s) for s in sides):
            raise MeasureError(f"box sides must be positive and finite: {sides}")
        object.__setattr__(self, "corner", corner)
        object.__setattr__(self, "sides", sides)

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "Box":
        return cls(tuple(lo), tuple(h - l for l, h in zip(lo, hi)))

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.corner)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.corner) + np.array(self.sides)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, y: np.ndarray) -> np.ndarray:
        """Half-open membership corner <= y < corner + sides, row-wise"""
        y = np.atleast_2d(y)
        return np.all((y >= self.lower) & (y < self.upper), axis=1)

    def overlaps(self, other: "Box") -> bool:
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        return bool(np.all(hi > lo))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lower + rng.random((count, self.dim)) * np.array(self.sides)

    def to_dict(self) -> Dict[str, Any]:
        return {"corner": list(self.corner), "sides": list(self.sides)}


@dataclass
class GridSet:
    """{M y + v : y in union of boxes}; boxes pairwise disjoint"""
    boxes: List[Box]
    frame: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.boxes:
            raise MeasureError("a grid set needs at least one box")
        d = self.boxes[0].dim
        if any(b.dim != d for b in self.boxes):
            raise MeasureError("boxes of mixed dimension")
        self.frame = np.eye(d) if self.frame is None else np.asarray(self.frame, dtype=float)
        self.shift = np.zeros(d) if self.shift is None else np.asarray(self.shift, dtype=float)
        if self.frame.shape != (d, d) or self.shift.shape != (d,):
            raise MeasureError(f"frame must be {d} x {d} and shift length {d}")
        det = float(np.linalg.det(self.frame))
        if det == 0.0:
            raise MeasureError("singular frame")
        for a, b in combinations(self.boxes, 2):
            if a.overlaps(b):
                raise MeasureError(f"overlapping boxes {a} and {b}")

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "GridSet":
        return cls([Box.from_bounds(lo, hi)])

    @classmethod
    def ball(cls, center: Sequence[float], radius: float, cells: int = 8) -> "GridSet":
        """Union of the grid cells of [c - r, c + r]^d whose centers lie within the ball"""
        center = np.asarray(center, dtype=float)
        d = len(center)
        h = 2.0 * radius / cells
        boxes = []
        for index in product(range(cells), repeat=d):
            corner = center - radius + h * np.array(index)
            if np.linalg.norm(corner + h / 2 - center) <= radius:
                boxes.append(Box(tuple(corner), (h,) * d))
        return cls(boxes)

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    @property
    def jacobian(self) -> float:
        return abs(float(np.linalg.det(self.frame)))

    @property
    def frame_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.frame)

    @property
    def measure(self) -> float:
        return self.jacobian * sum(b.volume for b in self.boxes)

    def to_local(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.shift) @ self.frame_inverse.T

    def to_world(self, y: np.ndarray) -> np.ndarray:
        return np.atleast_2d(y) @ self.frame.T + self.shift

    def contains(self, x: np.ndarray) -> np.ndarray:
        y = self.to_local(x)
        inside = np.zeros(len(y), dtype=bool)
        for b in self.boxes:
            inside |= b.contains(y)
        return inside

    def transformed(self, matrix: np.ndarray, vector: Optional[Sequence[float]] = None) -> "GridSet":
        """Image under x -> A x + w"""
        matrix = np.asarray(matrix, dtype=float)
        vector = np.zeros(self.dim) if vector is None else np.asarray(vector, dtype=float)
        return GridSet(list(self.boxes), matrix @ self.frame, matrix @ self.shift + vector)

    def translated(self, vector: Sequence[float]) -> "GridSet":
        return GridSet(list(self.boxes), self.frame.copy(), self.shift + np.asarray(vector, dtype=float))

    def allocation(self, count: int) -> List[int]:
        """Samples per box, proportional to volume by largest remainder, each box at least 2.

        The total is `count` unless the floor of 2 lifts it, by at most 2 per box.
        """
        volumes = np.array([b.volume for b in self.boxes])
        raw = count * volumes / volumes.sum()
        alloc = np.floor(raw).astype(int)
        short = max(count - int(alloc.sum()), 0)
        alloc[np.argsort(alloc - raw, kind="stable")[:short]] += 1
        return np.maximum(alloc, 2).tolist()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "boxes": [b.to_dict() for b in self.boxes],
            "frame": self.frame.tolist(),
            "shift": self.shift.tolist(),
            "measure": self.measure,
        }
