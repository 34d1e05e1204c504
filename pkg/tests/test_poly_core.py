"""
Polynomial Curve Algebra Test Suite
Tests for exact curve arithmetic:
- Torsion and minor ladder of moment and corpus curves
- Exact Jacobian identities, antisymmetry and affine equivariance
- Rational parsing and curve spec validation
"""

import math
import random
import sys
import os
from fractions import Fraction

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from arclength_lab.errors import CurveSpecError, MinorIndexError
from arclength_lab.poly_core import (
    PolyCurve,
    Polynomial,
    affine_transform,
    arclength_density,
    derivative_matrix,
    eval_curve,
    format_rational,
    jacobian_J,
    jacobian_J_batch,
    log_abs_jacobian_batch,
    minor_ladder,
    minor_values,
    parse_rational,
    reparametrize,
    scale_curve,
    torsion,
    vandermonde,
)


def _random_rationals(rng: random.Random, count: int):
    return [Fraction(rng.randint(-50, 50), rng.randint(1, 12)) for _ in range(count)]


class TestRationals:
    """Exact coefficient parsing"""

    def test_parse_forms(self):
        assert parse_rational("3/4") == Fraction(3, 4)
        assert parse_rational(" -2 ") == Fraction(-2)
        assert parse_rational("0.25") == Fraction(1, 4)
        assert parse_rational(7) == Fraction(7)
        print("✓ rational forms parse")

    @pytest.mark.parametrize("bad", ["1/0", "abc", "1//2", float("nan"), True, None])
    def test_parse_rejects(self, bad):
        with pytest.raises(CurveSpecError):
            parse_rational(bad)

    def test_format(self):
        assert format_rational(Fraction(6, 4)) == "3/2"
        assert format_rational(Fraction(-5)) == "-5"


class TestTorsion:
    """Torsion determinant and minor ladder"""

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_moment_torsion_is_product_of_factorials(self, d):
        expected = math.prod(math.factorial(j) for j in range(1, d + 1))
        L = torsion(PolyCurve.moment(d))
        assert L.coeffs == (Fraction(expected),), f"moment-{d} torsion {L} != {expected}"
        print(f"✓ moment-{d} torsion = {expected}")

    def test_moment_minor_ladder(self):
        curve = PolyCurve.moment(3)
        assert [minor_ladder(curve, j).coeffs for j in (-1, 0, 1, 2, 3)] == [
            (Fraction(1),), (Fraction(1),), (Fraction(1),), (Fraction(2),), (Fraction(12),)]

    def test_minor_values_vectorized(self):
        cusp = PolyCurve.from_spec({"dim": 2, "coeffs": [["0", "0", "1"], ["0", "0", "0", "1"]]})
        s = np.array([0.0, 1.0, 2.0])
        assert np.allclose(minor_values(cusp, 1, s), [0.0, 2.0, 4.0])
        assert np.allclose(minor_values(cusp, 2, s), 6 * s ** 2)

    def test_minor_index_out_of_range(self):
        curve = PolyCurve.moment(3)
        for j in (-2, 4):
            with pytest.raises(MinorIndexError):
                minor_ladder(curve, j)

    def test_cusp_torsion(self):
        cusp = PolyCurve.from_spec({"dim": 2, "coeffs": [["0", "0", "1"], ["0", "0", "0", "1"]]})
        assert torsion(cusp).coeffs == (Fraction(0), Fraction(0), Fraction(6))

    def test_degenerate_curve_flagged(self):
        line = PolyCurve.from_spec({"dim": 2, "coeffs": [["0", "1"], ["0", "2"]]})
        assert not line.nondegenerate
        assert torsion(line).is_zero

    def test_derivative_matrix_det_matches_torsion(self):
        curve = PolyCurve.from_spec({"dim": 3, "coeffs": [["0", "1"], ["0", "0", "1"], ["0", "0", "0", "0", "1"]]})
        for s in (Fraction(1, 3), Fraction(-2), Fraction(5, 7)):
            assert derivative_matrix(curve, s).det() == torsion(curve)(s)

    def test_arclength_density_of_parabola(self):
        density = arclength_density(PolyCurve.moment(2), np.array([0.0, 1.0, 5.0]))
        assert np.allclose(density, 2.0 ** (1.0 / 3.0))


class TestJacobian:
    """J_P(t) = det(P'(t_1), ..., P'(t_d))"""

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_moment_jacobian_exact(self, d):
        rng = random.Random(d)
        curve = PolyCurve.moment(d)
        for _ in range(100):
            t = _random_rationals(rng, d)
            assert jacobian_J(curve, t) == math.factorial(d) * vandermonde(t), f"moment-{d} at {t}"
        print(f"✓ moment-{d}: J_P = d! V on 100 rational tuples")

    def test_adjacent_swap_flips_sign(self):
        rng = random.Random(7)
        curve = PolyCurve.from_spec({"dim": 3, "coeffs": [["0", "1"], ["0", "0", "1"], ["0", "0", "0", "0", "1"]]})
        for _ in range(100):
            t = _random_rationals(rng, 3)
            k = rng.randint(0, 1)
            swapped = list(t)
            swapped[k], swapped[k + 1] = swapped[k + 1], swapped[k]
            assert jacobian_J(curve, swapped) == -jacobian_J(curve, t)

    def test_affine_equivariance(self):
        rng = random.Random(11)
        curve = PolyCurve.from_spec({"dim": 2, "coeffs": [["0", "1"], ["0", "-3", "0", "1"]]})
        M = [[Fraction(2), Fraction(1, 3)], [Fraction(-1), Fraction(5, 2)]]
        det_M = M[0][0] * M[1][1] - M[0][1] * M[1][0]
        moved = affine_transform(curve, M, [Fraction(1), Fraction(-4)])
        for _ in range(20):
            s = _random_rationals(rng, 1)[0]
            assert torsion(moved)(s) == det_M * torsion(curve)(s)
            t = _random_rationals(rng, 2)
            assert jacobian_J(moved, t) == det_M * jacobian_J(curve, t)

    def test_batch_matches_exact(self):
        curve = PolyCurve.moment(3)
        T = np.array([[0.5, 1.0, 2.0], [-1.0, 0.25, 3.0]])
        expected = [float(jacobian_J(curve, [Fraction(x) for x in row])) for row in T]
        assert np.allclose(jacobian_J_batch(curve, T), expected, rtol=1e-12)
        assert np.allclose(np.exp(log_abs_jacobian_batch(curve, T)), np.abs(expected), rtol=1e-12)

    def test_wrong_arity(self):
        with pytest.raises(CurveSpecError):
            jacobian_J(PolyCurve.moment(3), [1, 2])


class TestTransforms:
    """Exact reparametrization and scaling"""

    def test_reparametrize(self):
        curve = PolyCurve.moment(2)
        shifted = reparametrize(curve, Fraction(2), Fraction(1))
        assert eval_curve(shifted, Fraction(3), exact=True) == eval_curve(curve, Fraction(7), exact=True)

    def test_scale_scales_torsion_by_power(self):
        curve = PolyCurve.moment(3)
        assert torsion(scale_curve(curve, Fraction(1, 2))).coeffs == (Fraction(12, 8),)

    def test_zero_slope_rejected(self):
        with pytest.raises(CurveSpecError):
            reparametrize(PolyCurve.moment(2), 0, 1)

    def test_spec_round_trip(self):
        spec = {"dim": 2, "coeffs": [["0", "1/2"], ["1", "0", "-3/4"]]}
        assert PolyCurve.from_spec(spec).to_spec() == spec

    def test_spec_dim_mismatch(self):
        with pytest.raises(CurveSpecError):
            PolyCurve.from_spec({"dim": 3, "coeffs": [["0", "1"], ["0", "0", "1"]]})

    def test_polynomial_arithmetic(self):
        p = Polynomial((1, 2))
        q = Polynomial((0, 0, 3))
        assert (p * q).coeffs == (Fraction(0), Fraction(0), Fraction(3), Fraction(6))
        assert (p - p).is_zero
        assert p.compose_affine(2, 1).coeffs == (Fraction(3), Fraction(4))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
