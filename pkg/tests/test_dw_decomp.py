"""
Interval Decomposition Test Suite
Tests for root finding, D1/D2 procedures and the decomposition pipeline:
- Certified roots with multiplicity
- Nearest-root partitions and gap/dyadic splits
- Torsion comparability and geometric-inequality probes on corpus curves
- Normalization of pieces and collision probes
"""

import math
import sys
import os
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from arclength_lab.dw_decomp import (
    CaseTag,
    DecompInterval,
    Interval,
    PieceKind,
    all_sign_vectors,
    check_monotone_centers,
    collision_multiplicity,
    d1_decompose,
    d2_decompose,
    dw_decompose,
    find_roots,
    initial_decomposition,
    lineage_centers,
    normalize_piece,
    normalized_comparability,
    piece_count_bound,
    preimage_collision_probe,
    verify_geometric_inequality,
    verify_torsion_comparability,
)
from arclength_lab.errors import DecompositionError, DegenerateCurveError, RootFindingError
from arclength_lab.poly_core import PolyCurve, Polynomial
from config.corpus import resolve_curve


@pytest.fixture
def cusp():
    return resolve_curve("cusp")


@pytest.fixture
def cubic():
    return resolve_curve("cubic")


class TestFindRoots:
    """Certified complex roots"""

    def test_simple_real_roots(self):
        roots = find_roots(Polynomial((-1, 0, 1)))
        assert roots.real_values() == pytest.approx([-1.0, 1.0], abs=1e-12)
        assert all(r.multiplicity == 1 for r in roots)

    def test_repeated_root(self):
        roots = find_roots(Polynomial((0, 0, 1)))
        assert len(roots) == 1
        assert roots.roots[0].value == 0
        assert roots.roots[0].multiplicity == 2

    def test_radicals(self):
        roots = find_roots(Polynomial((0, -2, 0, 1)))
        assert roots.real_values() == pytest.approx([-math.sqrt(2), 0.0, math.sqrt(2)], abs=1e-10)
        assert roots.degree == 3

    def test_conjugate_pairs(self):
        roots = find_roots(Polynomial((1, 0, 1)))
        assert sorted(r.value.imag for r in roots) == pytest.approx([-1.0, 1.0])
        assert roots.real_values() == []

    def test_zero_polynomial_rejected(self):
        with pytest.raises(RootFindingError):
            find_roots(Polynomial(()))

    def test_constant_has_no_roots(self):
        assert len(find_roots(Polynomial((5,)))) == 0


class TestD1:
    """Nearest-root partition"""

    def test_single_root_line(self):
        pieces = d1_decompose(Interval(-math.inf, math.inf), [0])
        assert [(p.interval.lo, p.interval.hi) for p in pieces] == [(-math.inf, 0.0), (0.0, math.inf)]
        for piece in pieces:
            assert piece.b == 0.0
            assert piece.factors[0].delta == 1 and piece.factors[0].A == 1.0

    def test_two_roots_far_factor(self):
        pieces = d1_decompose(Interval(0.0, 10.0), [0, 10])
        left = [p for p in pieces if p.interval.hi <= 5.0]
        assert left and all(p.b == 0.0 for p in left)
        far = [f for f in left[0].factors if f.root == 10]
        assert far[0].delta == 0 and far[0].A == 10.0

    def test_imaginary_pair_centred_at_zero(self):
        pieces = d1_decompose(Interval(-math.inf, math.inf), [1j, -1j])
        assert all(p.b == 0.0 for p in pieces)
        for p in pieces:
            s = np.linspace(max(p.interval.lo, -50), min(p.interval.hi, 50), 9)[1:-1]
            f = p.factors[0]
            ratio = np.abs(s - 1j) / (f.A * np.abs(s) ** f.delta)
            assert np.all((ratio >= 0.5) & (ratio <= 2.0)), f"factor-2 comparability fails on {p.interval}"

    def test_empty_roots_flagged(self):
        pieces = d1_decompose(Interval(0.0, 1.0), [])
        assert pieces[0].b is None and "no-roots" in pieces[0].flags


class TestD2:
    """Gap and dyadic splitting"""

    def test_unit_offset(self):
        pieces = d2_decompose(Interval(0.0, 10.0), 0.0, [1])
        gaps = [p for p in pieces if p.kind is PieceKind.GAP]
        dyadic = [p for p in pieces if p.kind is PieceKind.DYADIC]
        assert [(g.interval.lo, g.interval.hi) for g in gaps] == [(0.0, 0.5), (2.0, 10.0)]
        assert min(p.interval.lo for p in dyadic) == 0.5 and max(p.interval.hi for p in dyadic) == 2.0
        assert gaps[0].exponents == (0,) and gaps[1].exponents == (1,)
        for p in dyadic:
            assert p.interval.hi <= 2 * p.level + 1e-12

    def test_gap_inequality(self):
        for beta in ([1], [-1], [3, 0.2]):
            for p in d2_decompose(Interval(0.0, 10.0), 0.0, beta):
                if p.kind is not PieceKind.GAP:
                    continue
                s = np.linspace(p.interval.lo, p.interval.hi, 33)[1:-1]
                for z in beta:
                    assert np.all(np.abs(s - z) >= 0.5 * np.abs(s) - 1e-12), f"gap {p.interval} vs beta {z}"

    def test_no_offsets_single_gap(self):
        pieces = d2_decompose(Interval(0.0, 1.0), 0.0, [])
        assert len(pieces) == 1 and pieces[0].kind is PieceKind.GAP


class TestPipeline:
    """dw_decompose on corpus curves"""

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_moment_curve_constant_torsion(self, d):
        leaves = dw_decompose(PolyCurve.moment(d))
        assert leaves, "no leaves"
        for leaf in leaves:
            assert leaf.K == 0
            assert leaf.b == 0.0
            assert leaf.comparability == pytest.approx((1.0, 1.0), rel=1e-12)
            assert leaf.lineage[0].case is CaseTag.INITIAL and leaf.lineage[-1].case is CaseTag.FINAL
        print(f"✓ moment-{d}: {len(leaves)} leaves, K=0")

    def test_cusp(self, cusp):
        leaves = dw_decompose(cusp)
        assert [(l.interval.lo, l.interval.hi) for l in leaves] == [(-math.inf, 0.0), (0.0, math.inf)]
        for leaf in leaves:
            assert leaf.b == 0.0 and leaf.K == 2
            assert leaf.A == pytest.approx(6.0)
            assert verify_torsion_comparability(leaf, cusp) == pytest.approx((1.0, 1.0), rel=1e-9)
            centers = lineage_centers(leaf)
            assert centers and centers[-1] == leaf.b

    def test_cubic(self, cubic):
        for leaf in dw_decompose(cubic):
            assert leaf.K == 1 and leaf.b == 0.0

    @pytest.mark.parametrize("name", ["moment-2", "moment-3", "cusp", "cubic", "skew"])
    def test_soundness_on_corpus(self, name):
        curve = resolve_curve(name)
        leaves = dw_decompose(curve)
        assert len(leaves) <= piece_count_bound(curve.degree, curve.dim)
        covered = sorted((l.interval.lo, l.interval.hi) for l in leaves)
        assert covered[0][0] == -math.inf and covered[-1][1] == math.inf
        for (a_lo, a_hi), (b_lo, b_hi) in zip(covered, covered[1:]):
            assert a_hi == b_lo, f"{name}: gap or overlap between {a_hi} and {b_lo}"
        for leaf in leaves:
            assert not leaf.interval.contains(leaf.b)
            assert leaf.K <= curve.degree
            c_lo, c_hi = leaf.comparability
            assert c_lo > 0 and c_hi / c_lo <= 1e4, f"{name}: comparability {c_lo}, {c_hi} on {leaf.interval}"
            assert check_monotone_centers(leaf) <= 1e-9

    def test_degenerate_rejected(self):
        line = PolyCurve.from_spec({"dim": 2, "coeffs": [["0", "1"], ["0", "1"]]})
        with pytest.raises(DegenerateCurveError):
            dw_decompose(line)

    def test_initial_decomposition_single_signed(self, cubic):
        pieces = initial_decomposition(cubic)
        assert [(p.lo, p.hi) for p in pieces] == [(-math.inf, 0.0), (0.0, math.inf)]

    def test_interval_rejects_interior_centre(self):
        with pytest.raises(DecompositionError):
            Interval(0.0, 1.0).distance_range(0.5)


class TestProbes:
    """Geometric inequality, collision and normalization probes"""

    def test_geometric_ratio_exact_for_parabola(self):
        curve = PolyCurve.moment(2)
        leaf = dw_decompose(curve)[-1]
        probe = verify_geometric_inequality(leaf, curve, samples=2000, seed=5)
        assert probe.min_ratio == pytest.approx(1.0, rel=1e-9)
        assert probe.max_ratio == pytest.approx(1.0, rel=1e-9)

    def test_geometric_ratio_positive_on_cusp(self, cusp):
        for leaf in dw_decompose(cusp):
            probe = verify_geometric_inequality(leaf, cusp, samples=5000, seed=1)
            assert probe.min_ratio > 0

    def test_geometric_ratio_reaches_truncation_radius(self):
        curve = PolyCurve((Polynomial((0, 1)), Polynomial((0, 0, 0, 1))))
        piece = DecompInterval(Interval(1.0, math.inf), 0.0, 1, 6.0)
        uniform = verify_geometric_inequality(piece, curve, samples=4000, seed=11)
        scaled = verify_geometric_inequality(piece, curve, samples=4000, seed=11, log_scale=True)
        assert uniform.box == scaled.box
        assert uniform.box[0] == 1.0
        assert uniform.box[1] == pytest.approx(2.0 ** 40)
        # ratio (t1 + t2) / (2 sqrt(t1 t2)) >= 1, large only for pairs many octaves apart
        for probe in (uniform, scaled):
            assert probe.min_ratio >= 1.0 - 1e-9
        assert scaled.max_ratio > 256.0
        print(f"✓ sampled (1, inf) out to {uniform.box[1]:.3e}, max ratio {scaled.max_ratio:.3e}")

    def test_geometric_probe_seed_reproducible_across_workers(self, cusp):
        leaf = dw_decompose(cusp)[-1]
        serial = verify_geometric_inequality(leaf, cusp, samples=6000, seed=42, chunk_size=1000, workers=1)
        with ThreadPoolExecutor(max_workers=3) as executor:
            futures = [executor.submit(verify_geometric_inequality, leaf, cusp, 6000, 42, None, 1000, w)
                       for w in (2, 4, 6)]
            for future in as_completed(futures):
                parallel = future.result()
                assert (parallel.min_ratio, parallel.max_ratio) == (serial.min_ratio, serial.max_ratio)

    def test_collision_permutation_counted_once(self):
        curve = PolyCurve.moment(2)
        tuples = np.array([[0.3, 0.7], [0.7, 0.3]])
        probe = collision_multiplicity(curve, tuples, (1, 1), quantum=1e-6)
        assert probe.max_multiplicity == 1 and not probe.flagged

    def test_collision_probe_within_factorial(self):
        curve = PolyCurve.moment(2)
        leaf = dw_decompose(curve)[-1]
        for eps in all_sign_vectors(2):
            probe = preimage_collision_probe(leaf, curve, eps, samples=500, quantum=1e-3, seed=3)
            assert probe.max_multiplicity <= probe.bound == 2

    def test_collision_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            collision_multiplicity(PolyCurve.moment(2), np.zeros((1, 2)), (1, 0), 1e-3)

    def test_normalization_of_cusp(self, cusp):
        leaf = [l for l in dw_decompose(cusp) if l.interval.lo == 0.0][0]
        norm = normalize_piece(leaf, cusp)
        assert norm.interval.lo == 0.0 and norm.interval.hi == pytest.approx(1.0)
        assert norm.truncated
        assert normalized_comparability(norm) == pytest.approx((1.0, 1.0), rel=1e-9)

    def test_reflected_piece(self, cusp):
        leaf = [l for l in dw_decompose(cusp) if l.interval.hi == 0.0][0]
        norm = normalize_piece(leaf, cusp)
        assert norm.reflection == -1
        assert norm.interval.lo >= 0.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
