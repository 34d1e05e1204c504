"""
Exponent Bookkeeping Test Suite
Tests for endpoint exponents and the named exponent constraints:
- (p_d, q_d), n and r_d
- Parity-forced free indices for both variants
- Quadruple validation for the second restricted estimate
"""

import sys
import os
from fractions import Fraction

import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from arclength_lab.errors import ExponentConstraintError
from arclength_lab.exponents import (
    Variant,
    conjugate,
    endpoint_exponents,
    exponent_bookkeeping,
    initial_bound_exponents,
    minimum_free_indices,
    mlf_quadruples,
    n_exponent,
    r_d,
    validate_quadruple,
)


class TestEndpointExponents:
    """Closed forms in d and K"""

    @pytest.mark.parametrize("d,p,q", [(2, Fraction(3, 2), Fraction(3)), (3, Fraction(2), Fraction(3)),
                                       (4, Fraction(5, 2), Fraction(10, 3))])
    def test_endpoint_pair(self, d, p, q):
        assert endpoint_exponents(d) == (p, q)

    def test_conjugate(self):
        assert conjugate(3) == Fraction(3, 2)
        with pytest.raises(ExponentConstraintError):
            conjugate(1)

    def test_n_exponent(self):
        assert n_exponent(0, 3) == 1
        assert n_exponent(3, 2) == Fraction(1, 2)

    @pytest.mark.parametrize("d,expected", [(2, 1), (3, 2), (4, 4), (5, 6), (6, 9)])
    def test_r_d(self, d, expected):
        assert r_d(d) == expected
        assert r_d(d) >= d - 1

    def test_initial_bound_variants(self):
        mle = initial_bound_exponents(4, 0, Variant.MLE)
        mlf = initial_bound_exponents(4, 0, Variant.MLF)
        assert mle["alpha1"] == 10 and mle["beta_ratio"] == 4 and mlf["beta_ratio"] == 6
        assert mle["top_ratio"] == Fraction(4)

    def test_dimension_guard(self):
        with pytest.raises(ExponentConstraintError):
            endpoint_exponents(1)


class TestBookkeeping:
    """Named constraints raise on the first violation"""

    def test_parity_counts(self):
        assert minimum_free_indices(3, 3, Variant.MLE) == 2
        assert minimum_free_indices(3, 3, Variant.MLF) == 3

    def test_passing_record(self):
        record = exponent_bookkeeping(3, 3, 1, Variant.MLE)
        assert record.passed
        assert record.beta_exponent == 2
        assert record.to_dict()["variant"] == "mlE"

    def test_too_few_free_indices(self):
        with pytest.raises(ExponentConstraintError) as exc:
            exponent_bookkeeping(3, 3, 3, Variant.MLE)
        assert exc.value.constraint == "free indices"

    def test_k_out_of_range(self):
        with pytest.raises(ExponentConstraintError):
            minimum_free_indices(3, 6, Variant.MLE)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_large_top_quadruple(self, d):
        quadruple = mlf_quadruples(d, 0)["large-top"]
        assert validate_quadruple(d, quadruple) == quadruple

    def test_bad_quadruple_sum(self):
        with pytest.raises(ExponentConstraintError) as exc:
            validate_quadruple(3, (1, 1, 1, 2))
        assert exc.value.constraint == "r1 + r2 = d(d-1)/2"

    def test_quadruple_margin(self):
        with pytest.raises(ExponentConstraintError):
            validate_quadruple(3, (3, 0, 2, 1))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
