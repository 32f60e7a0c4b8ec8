import numpy as np
import pytest
from scipy.integrate import quad

from latla.core import (
    GroundTruth,
    HypothesisBatch,
    TestOutcome,
    compute_fdp,
    compute_power,
    p_from_t,
    std_normal,
    student_t,
)


def outcome_from(delta):
    rej = np.asarray(delta, dtype=bool)
    return TestOutcome(rej, int(rej.sum()), 0.0)


class TestMetrics:
    def test_fdp_mixed(self):
        out = outcome_from([1, 1, 0, 0])
        truth = GroundTruth([1, 0, 1, 0])
        assert compute_fdp(out, truth) == 0.5

    def test_fdp_empty_rejections(self):
        out = outcome_from([0, 0, 0, 0])
        assert compute_fdp(out, GroundTruth([1, 0, 1, 0])) == 0.0

    def test_fdp_no_false_positives(self):
        out = outcome_from([1, 1, 1])
        assert compute_fdp(out, GroundTruth([1, 1, 1])) == 0.0

    def test_power_partial(self):
        out = outcome_from([1, 0, 1])
        assert compute_power(out, GroundTruth([1, 1, 1])) == pytest.approx(2 / 3)

    def test_power_all_rejected(self):
        out = outcome_from([1, 1, 1, 1])
        assert compute_power(out, GroundTruth([0, 1, 0, 1])) == 1.0

    def test_power_zero_signals(self):
        out = outcome_from([1, 0])
        assert compute_power(out, GroundTruth([0, 0])) == 0.0

    def test_dimension_mismatch(self):
        out = outcome_from([1, 0])
        with pytest.raises(ValueError):
            compute_fdp(out, GroundTruth([1, 0, 0]))
        with pytest.raises(ValueError):
            compute_power(out, GroundTruth([1]))

    def test_scale_free_in_m(self, rng):
        # concatenating a problem with itself changes neither metric
        delta = rng.random(40) < 0.3
        theta = (rng.random(40) < 0.4).astype(int)
        single = (outcome_from(delta), GroundTruth(theta))
        double = (outcome_from(np.tile(delta, 2)), GroundTruth(np.tile(theta, 2)))
        assert compute_fdp(*single) == pytest.approx(compute_fdp(*double))
        assert compute_power(*single) == pytest.approx(compute_power(*double))


class TestPFromT:
    def test_center(self):
        assert p_from_t(np.array([0.0]), std_normal())[0] == pytest.approx(1.0)

    def test_quantile(self):
        p = p_from_t(np.array([1.959964]), std_normal())
        assert abs(p[0] - 0.05) < 1e-4

    def test_even_function(self, rng):
        t = rng.standard_normal(200) * 3
        null = std_normal()
        np.testing.assert_array_equal(p_from_t(t, null), p_from_t(-t, null))

    def test_huge_statistic_stays_positive(self):
        p = p_from_t(np.array([60.0]), std_normal())
        assert p[0] > 0.0


class TestNullDensity:
    @pytest.mark.parametrize("null", [std_normal(), student_t(5), student_t(199)])
    def test_quantile_roundtrip(self, null):
        # the upper tail saturates in float64 (F0(t) rounds into 1) past the
        # point where quantile spacing exceeds 1e-10, so test the direct
        # roundtrip where q is representable ...
        t = np.linspace(-8, 5, 27)
        np.testing.assert_allclose(null.F0_inv(null.F0(t)), t, atol=1e-10)
        # ... and close the full [-8, 8] range through the symmetric
        # reflection, which keeps q small and fully representable
        t = np.linspace(-8, 8, 33)
        np.testing.assert_allclose(
            -np.sign(t) * null.F0_inv(null.F0(-np.abs(t))), t, atol=1e-10
        )

    @pytest.mark.parametrize("null", [std_normal(), student_t(7)])
    def test_symmetry(self, null):
        t = np.linspace(0.0, 6.0, 25)
        np.testing.assert_allclose(null.f0(t), null.f0(-t), rtol=1e-14)

    def test_student_t_cdf_against_quadrature(self):
        # independent oracle: integrate the density directly
        null = student_t(199)
        for x in (-2.0, -0.3, 1.0, 2.5):
            target, err = quad(null.f0, -np.inf, x)
            assert abs(null.F0(x) - target) < 1e-9 + err

    def test_bad_families(self):
        with pytest.raises(ValueError):
            student_t(-1)
        from latla.core import NullDensity

        with pytest.raises(ValueError):
            NullDensity("cauchy")
        with pytest.raises(ValueError):
            NullDensity("standard-normal", df=3)


class TestHypothesisBatch:
    def test_from_t_recomputable(self, rng):
        t = rng.standard_normal(50)
        batch = HypothesisBatch.from_t(t, std_normal())
        np.testing.assert_array_equal(batch.p_values, p_from_t(t, std_normal()))
        assert batch.m == 50

    def test_from_p_signs_nonnegative(self):
        batch = HypothesisBatch.from_p([0.5, 0.01, 1.0], std_normal())
        assert np.all(batch.t_stats >= 0)
        np.testing.assert_allclose(batch.p_values, [0.5, 0.01, 1.0])
        # implied statistics reproduce the p-values
        np.testing.assert_allclose(
            p_from_t(batch.t_stats, std_normal()), [0.5, 0.01, 1.0], atol=1e-12
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            HypothesisBatch(np.array([np.nan]), np.array([0.5]), std_normal())
        with pytest.raises(ValueError):
            HypothesisBatch(np.array([1.0]), np.array([1.5]), std_normal())
        with pytest.raises(ValueError):
            HypothesisBatch(np.array([1.0, 2.0]), np.array([0.5]), std_normal())
        with pytest.raises(ValueError):
            HypothesisBatch(np.array([]), np.array([]), std_normal())


class TestOutcomeInvariants:
    def test_k_must_match(self):
        with pytest.raises(ValueError):
            TestOutcome(np.array([True, False]), 2, 0.1)
