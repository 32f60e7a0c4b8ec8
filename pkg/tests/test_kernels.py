import numpy as np
import pytest
from scipy.integrate import quad

from latla.core import DistanceMatrix
from latla.kernels import (
    KernelSpec,
    build_neighborhoods,
    kernel_eval,
    neighborhood_matrix,
    neighborhood_size,
    select_bandwidth,
    sheather_jones_bandwidth,
    silverman_bandwidth,
    v_weight,
)


class TestKernelEval:
    def test_peak_h1(self):
        assert kernel_eval(KernelSpec(1.0), 0.0) == pytest.approx(0.3989423, abs=1e-6)

    def test_peak_h2(self):
        assert kernel_eval(KernelSpec(2.0), 0.0) == pytest.approx(0.1994711, abs=1e-6)

    def test_symmetric(self, rng):
        spec = KernelSpec(0.7)
        x = rng.standard_normal(100)
        np.testing.assert_array_equal(kernel_eval(spec, x), kernel_eval(spec, -x))

    def test_quadrature_conditions(self):
        # mass 1, zero mean, unit second moment for the h=1 kernel
        spec = KernelSpec(1.0)
        lim = 10.0
        mass, _ = quad(lambda x: kernel_eval(spec, x), -lim, lim)
        mean, _ = quad(lambda x: x * kernel_eval(spec, x), -lim, lim)
        second, _ = quad(lambda x: x * x * kernel_eval(spec, x), -lim, lim)
        assert abs(mass - 1.0) < 1e-6
        assert abs(mean) < 1e-8
        assert abs(second - 1.0) < 1e-6

    def test_mass_one_other_bandwidths(self):
        for h in (0.25, 3.0):
            spec = KernelSpec(h)
            mass, _ = quad(lambda x: kernel_eval(spec, x), -10 * h, 10 * h)
            assert abs(mass - 1.0) < 1e-6

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            KernelSpec(0.0)
        with pytest.raises(ValueError):
            KernelSpec(1.0, family="epanechnikov")


class TestVWeight:
    def test_self_distance(self):
        for h in (0.1, 1.0, 5.0):
            assert v_weight(KernelSpec(h), 0.0) == 1.0

    def test_unit_distance(self):
        assert v_weight(KernelSpec(1.0), 1.0) == pytest.approx(0.6065307, abs=1e-6)

    def test_decreasing_to_zero(self):
        spec = KernelSpec(0.8)
        s = np.linspace(0, 50, 200)
        vals = v_weight(spec, s)
        assert np.all(np.diff(vals) <= 0)
        assert vals[-1] < 1e-12

    def test_infinite_distance(self):
        assert v_weight(KernelSpec(1.0), np.inf) == 0.0


class TestBandwidth:
    def test_manual_passthrough(self):
        assert select_bandwidth(None, rule="manual", manual=0.3) == 0.3

    def test_silverman_standard_normal(self, rng):
        x = rng.standard_normal(1000)
        h = select_bandwidth(x, rule="silverman")
        assert abs(h - 0.2259) / 0.2259 < 0.15

    def test_sheather_jones_near_silverman(self, rng):
        x = rng.standard_normal(1000)
        h_sj = select_bandwidth(x, rule="sheather-jones")
        h_silver = silverman_bandwidth(x)
        assert 0.5 * h_silver <= h_sj <= 2.0 * h_silver

    def test_sheather_jones_bimodal_smaller_than_silverman(self, rng):
        # the plug-in tracks curvature, so separated modes shrink it
        x = np.concatenate([rng.standard_normal(600) - 4, rng.standard_normal(600) + 4])
        assert sheather_jones_bandwidth(x) < silverman_bandwidth(x)

    def test_degenerate_sample(self):
        with pytest.raises(ValueError, match="zero-spread"):
            select_bandwidth(np.ones(100), rule="silverman")

    def test_too_few_values(self):
        with pytest.raises(ValueError):
            select_bandwidth(np.arange(5.0), rule="silverman")

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            select_bandwidth(np.arange(20.0), rule="plugin")


def random_distances(rng, m):
    x = rng.standard_normal(m)
    return DistanceMatrix(np.abs(x[:, None] - x[None, :]))


class TestNeighborhoods:
    def test_full_at_eps_zero(self, rng):
        S = random_distances(rng, 100)
        nbhds = build_neighborhoods(S, 0.0)
        assert all(nb.size == 99 for nb in nbhds)
        for nb in nbhds:
            assert nb.center not in nb.members

    def test_size_m1200_eps01(self):
        assert neighborhood_size(1200, 0.1) == 591

    def test_nearest_by_construction(self):
        # row 0 strictly increasing in j: members are the smallest indices
        m = 10
        S = np.abs(np.subtract.outer(np.arange(m, dtype=float), np.arange(m, dtype=float)))
        nbhds = build_neighborhoods(DistanceMatrix(S), 0.3)
        k = neighborhood_size(m, 0.3)
        assert sorted(nbhds[0].members.tolist()) == list(range(1, k + 1))

    def test_tie_break_by_index(self):
        S = np.ones((6, 6)) * 2.0  # all distances tie
        np.fill_diagonal(S, 0.0)
        nbhds = build_neighborhoods(DistanceMatrix(S), 0.5)
        k = neighborhood_size(6, 0.5)
        assert nbhds[0].members.tolist() == list(range(1, k + 1))
        assert nbhds[3].members.tolist() == [j for j in range(6) if j != 3][:k]

    def test_non_member_perturbation_invariance(self, rng):
        S = random_distances(rng, 40)
        eps = 0.4
        base = neighborhood_matrix(build_neighborhoods(S, eps))
        k = neighborhood_size(40, eps)
        # push a distance that is already outside row 0's neighborhood even higher
        row0 = S.values[0].copy()
        row0[0] = np.inf
        outside = np.argsort(row0, kind="stable")[k + 2]
        bumped = S.values.copy()
        bumped[0, outside] += 5.0
        bumped[outside, 0] += 5.0
        changed = neighborhood_matrix(build_neighborhoods(DistanceMatrix(bumped), eps))
        np.testing.assert_array_equal(base[0], changed[0])

    def test_rejects_bad_epsilon(self, rng):
        S = random_distances(rng, 10)
        with pytest.raises(ValueError):
            build_neighborhoods(S, 1.0)
        with pytest.raises(ValueError):
            build_neighborhoods(S, -0.1)
