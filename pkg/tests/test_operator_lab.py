"""
Operator Functional Test Suite
Tests for the discretized averaging operator:
- Exact preimage masses of T and T* on box unions
- Functionals, duality and saturation
- Knapp family geometry and the endpoint sweep
- Sampled-hypothesis inequality checks and affine invariance
"""

import sys
import os

import numpy as np
import pytest
from scipy import integrate

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from arclength_lab.dw_decomp import Interval
from arclength_lab.errors import ExponentConstraintError, HypothesisError, PreconditionError
from arclength_lab.exponents import Variant, mlf_quadruples
from arclength_lab.measures import GridSet, MuMeasure
from arclength_lab.operator_lab import (
    apply_T,
    check_affine_invariance,
    check_initial_lower_bound,
    check_mlE_inequality,
    check_mlF_inequality,
    expected_trend,
    functionals,
    knapp_family,
    knapp_sweep,
    mu_interval,
    off_endpoint_sweep,
    rwt_ratio,
    sampled_infimum,
)
from arclength_lab.poly_core import PolyCurve

UNIT = Interval(0.0, 1.0)


@pytest.fixture
def parabola():
    return PolyCurve.moment(2)


@pytest.fixture
def flat():
    return MuMeasure(0, 2)


class TestMu:
    """Closed-form masses against quadrature"""

    def test_spot_value(self):
        mu = MuMeasure(3, 3)
        assert mu.n == pytest.approx(2.0 / 3.0)
        assert mu_interval(mu, 0.0, 0.25 ** (2.0 / 3.0)) == pytest.approx(0.25 * 2.0 / 3.0)
        assert mu_interval(mu, 0.0, 1.0) == pytest.approx(2.0 / 3.0)

    def test_matches_quadrature(self):
        rng = np.random.default_rng(0)
        mu = MuMeasure(2, 3)
        for _ in range(100):
            a, b = np.sort(rng.uniform(0.0, 1.0, size=2))
            exact, _ = integrate.quad(mu.density, a, b, epsabs=1e-14, epsrel=1e-13)
            assert mu_interval(mu, a, b) == pytest.approx(exact, abs=1e-12)


class TestApplyT:
    """T chi_E(x) by exact preimages"""

    def test_full_mass(self, parabola):
        huge = GridSet.box([-100.0, -100.0], [100.0, 100.0])
        assert apply_T(parabola, UNIT, MuMeasure(0, 2), huge, [0.0, 0.0]) == pytest.approx(1.0)
        assert apply_T(parabola, UNIT, MuMeasure(2, 2), huge, [0.0, 0.0]) == pytest.approx(0.6)

    def test_sign_of_preimage(self, parabola, flat):
        positive = GridSet.box([0.0, 0.0], [1.0, 1.0])
        negative = GridSet.box([-1.0, -1.0], [0.0, 0.0])
        assert apply_T(parabola, UNIT, flat, positive, [0.0, 0.0]) == 0.0
        assert apply_T(parabola, UNIT, flat, negative, [0.0, 0.0]) == pytest.approx(1.0)
        assert apply_T(parabola, UNIT, flat, positive, [0.0, 0.0], adjoint=True) == pytest.approx(1.0)

    def test_disjoint_target(self, parabola, flat):
        far = GridSet.box([50.0, 50.0], [51.0, 51.0])
        assert apply_T(parabola, UNIT, flat, far, [0.0, 0.0]) == 0.0

    def test_partial_preimage(self, parabola, flat):
        # (-s, -s^2) in [-1, 0) x [-1/4, 0) for s in (0, 1/2]
        box = GridSet.box([-1.0, -0.25], [0.0, 0.0])
        assert apply_T(parabola, UNIT, flat, box, [0.0, 0.0]) == pytest.approx(0.5)

    def test_truncation(self, parabola, flat):
        huge = GridSet.box([-100.0, -100.0], [100.0, 100.0])
        assert apply_T(parabola, UNIT, flat, huge, [0.0, 0.0], gamma=0.25) == pytest.approx(0.75)

    def test_monotone_in_set(self, parabola, flat):
        small = GridSet.box([-0.5, -0.5], [0.0, 0.0])
        large = GridSet.box([-1.0, -1.0], [0.5, 0.5])
        rng = np.random.default_rng(5)
        for x in rng.uniform(-1.0, 1.0, size=(30, 2)):
            assert apply_T(parabola, UNIT, flat, small, x) <= apply_T(parabola, UNIT, flat, large, x)

    def test_unbounded_interval_rejected(self, parabola, flat):
        with pytest.raises(PreconditionError):
            apply_T(parabola, Interval(0.0, np.inf), flat, GridSet.box([0.0, 0.0], [1.0, 1.0]), [0.0, 0.0])


class TestFunctionals:
    """T(E, F), alpha and beta"""

    def test_saturation(self, parabola, flat):
        E = GridSet.box([-10.0, -10.0], [10.0, 10.0])
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        result = functionals(parabola, UNIT, flat, E, F, x_samples=64, seed=1)
        assert result.alpha == pytest.approx(1.0)
        assert result.alpha <= result.mu_I + 1e-12 and result.beta <= result.mu_I
        assert result.error == pytest.approx(0.0, abs=1e-12)

    def test_duality(self, parabola, flat):
        E = GridSet.box([0.0, 0.0], [1.0, 1.0])
        F = GridSet.box([0.5, 0.0], [2.0, 1.5])
        result = functionals(parabola, UNIT, flat, E, F, x_samples=2000, seed=4, duality=True)
        assert result.duality_gap <= 3.0 * (result.error + result.adjoint_error)
        print(f"✓ duality gap {result.duality_gap:.4g} within error {result.error + result.adjoint_error:.4g}")

    def test_seed_reproducible(self, parabola, flat):
        E = GridSet.box([0.0, 0.0], [1.0, 1.0])
        F = GridSet.box([0.5, 0.0], [2.0, 1.5])
        a = functionals(parabola, UNIT, flat, E, F, x_samples=300, seed=8, chunk_size=64, workers=1)
        b = functionals(parabola, UNIT, flat, E, F, x_samples=300, seed=8, chunk_size=64, workers=4)
        assert a.T_value == b.T_value

    def test_sampled_infimum_saturated(self, parabola, flat):
        huge = GridSet.box([-10.0, -10.0], [10.0, 10.0])
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        assert sampled_infimum(parabola, UNIT, flat, huge, F, samples=50, seed=0) == pytest.approx(1.0)


class TestKnapp:
    """Knapp family and the endpoint sweep"""

    def test_box_volume(self, parabola):
        for delta in (0.25, 0.125):
            pair = knapp_family(parabola, UNIT, delta, t0=0.0)
            assert pair.E.measure == pytest.approx(delta ** 3)
            assert pair.F.measure == pytest.approx(8 * delta ** 3)

    def test_halving_scales_by_power(self):
        curve = PolyCurve.moment(3)
        big = knapp_family(curve, UNIT, 0.2, t0=0.0).E.measure
        small = knapp_family(curve, UNIT, 0.1, t0=0.0).E.measure
        assert small / big == pytest.approx(2.0 ** -6)

    def test_delta_too_large(self, parabola):
        with pytest.raises(PreconditionError):
            knapp_family(parabola, UNIT, 0.6, t0=0.0)

    def test_default_exponents(self, parabola, flat):
        E = GridSet.box([-1.0, -1.0], [0.0, 0.0])
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        result = rwt_ratio(parabola, UNIT, flat, E, F, x_samples=64)
        assert (result.p, result.q) == (1.5, 3.0)

    def test_saturated_ratio_decays_with_E(self, parabola, flat):
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        small = rwt_ratio(parabola, UNIT, flat, GridSet.box([-50.0, -50.0], [50.0, 50.0]), F, x_samples=64)
        large = rwt_ratio(parabola, UNIT, flat, GridSet.box([-100.0, -100.0], [100.0, 100.0]), F, x_samples=64)
        assert large.ratio == pytest.approx(small.ratio * 0.25 ** (2.0 / 3.0))

    def test_endpoint_flat(self, parabola, flat):
        deltas = [2.0 ** -k for k in range(1, 7)]
        sweep = knapp_sweep(parabola, UNIT, flat, deltas, x_samples=128, seed=3, t0=0.0)
        assert sweep.expected == 0
        assert sweep.flatness <= 8.0
        print(f"✓ Knapp flatness at the endpoint: {sweep.flatness:.4f}")

    def test_off_endpoint_trend(self, parabola, flat):
        deltas = [2.0 ** -k for k in range(1, 7)]
        sweep = knapp_sweep(parabola, UNIT, flat, deltas, q=3.1, x_samples=128, seed=3, t0=0.0)
        assert sweep.expected == 1
        assert sweep.observed == sweep.expected

    def test_off_endpoint_growth(self, parabola, flat):
        deltas = [2.0 ** -k for k in range(1, 6)]
        off = off_endpoint_sweep(parabola, UNIT, flat, deltas, [(0.0, 0.1)], x_samples=64, seed=3)
        growth = off.growth()
        assert list(growth) == ["+0,+0.1"]
        assert growth["+0,+0.1"] > 1.0

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_expected_trend_flat_at_endpoint(self, d):
        p = (d + 1) / 2
        q = d * (d + 1) / (2 * (d - 1))
        assert expected_trend(d, p, q) == 0


class TestInequalities:
    """Sampled hypotheses and both restricted estimates"""

    def test_mle_single_set(self, parabola, flat):
        E = GridSet.box([-10.0, -10.0], [10.0, 10.0])
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        check = check_mlE_inequality(parabola, UNIT, flat, E, E, F, x_samples=64, seed=0)
        h = check.hypotheses
        assert h["alpha1"] == pytest.approx(1.0) and h["alpha2"] == pytest.approx(1.0)
        assert check.rhs == pytest.approx(h["alpha1"] ** 3 * (h["beta1"] / h["alpha1"]))
        assert check.ratio > 1.0

    def test_initial_lower_bound(self, parabola, flat):
        huge = GridSet.box([-10.0, -10.0], [10.0, 10.0])
        sets = {"E1": huge, "E2": huge, "F": GridSet.box([0.0, 0.0], [1.0, 1.0])}
        check = check_initial_lower_bound(parabola, UNIT, flat, sets, Variant.MLE, x_samples=64)
        assert check.name == "initial-mlE"
        assert check.rhs == pytest.approx(check.hypotheses["beta1"])

    def test_mle_hypothesis_refusal(self, parabola, flat):
        E1 = GridSet.box([-10.0, -10.0], [10.0, 10.0])
        E2 = GridSet.box([50.0, 50.0], [51.0, 51.0])
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(HypothesisError) as exc:
            check_mlE_inequality(parabola, UNIT, flat, E1, E2, F, x_samples=32)
        assert exc.value.hypothesis == "alpha2 >= alpha1"

    def test_mlf_eta_bookkeeping(self, parabola, flat):
        E = GridSet.box([0.0, 0.0], [1.0, 1.0])
        F = GridSet.box([-1.0, -1.0], [3.0, 3.0])
        quadruple = mlf_quadruples(2, 0)["large-top"]
        full = check_mlF_inequality(parabola, UNIT, flat, E, F, F, 1.0, quadruple, C=2.0, x_samples=256, seed=6)
        half = check_mlF_inequality(parabola, UNIT, flat, E, F, F, 0.5, quadruple, C=2.0, x_samples=256, seed=6)
        assert half.rhs == pytest.approx(0.25 * full.rhs)
        assert half.ratio == pytest.approx(4.0 * full.ratio)

    def test_mlf_rejects_bad_quadruple(self, parabola, flat):
        E = GridSet.box([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ExponentConstraintError):
            check_mlF_inequality(parabola, UNIT, flat, E, E, E, 1.0, (1, 1, 1, 1))

    def test_affine_invariance(self, parabola):
        E = GridSet.box([-1.0, -1.0], [0.0, 0.0])
        F = GridSet.box([0.0, 0.0], [1.0, 1.0])
        result = check_affine_invariance(parabola, UNIT, E, F, trials=3, seed=2, x_samples=128)
        assert result.max_deviation <= 1e-6


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
