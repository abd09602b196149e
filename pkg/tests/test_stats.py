import math

import numpy as np
import pytest
from scipy import stats as sps

from polymer_lab.sampling import Geometry, PolymerParams, SeedSpec, build_field, sample_log_inverse_gamma
from polymer_lab.polymer_core import Variant, log_partition
from polymer_lab.stats import (
    Moments,
    Sample,
    chernoff_bound_thin,
    chernoff_bound_thin_min,
    dominance_violation,
    empirical_tail,
    fit_exponent,
    ks_critical_value,
    ks_two_sample,
    logdiffexp,
    logsumexp,
    moment_agreement,
)


class TestLogArithmetic:
    def test_examples(self):
        assert logsumexp(1.3, 1.3) == pytest.approx(1.3 + math.log(2), abs=1e-15)
        assert logsumexp(0.0, -math.inf) == 0.0
        assert logsumexp(-math.inf, -math.inf) == -math.inf
        assert logdiffexp(math.log(3), math.log(1)) == pytest.approx(math.log(2), abs=1e-15)
        assert logdiffexp(2.0, 2.0) == -math.inf
        assert logdiffexp(2.0, -math.inf) == 2.0

    def test_no_overflow(self):
        assert logsumexp(1e4, 1e4 - 1) == pytest.approx(1e4 + math.log1p(math.exp(-1)))

    def test_logdiffexp_order(self):
        with pytest.raises(ValueError):
            logdiffexp(1.0, 2.0)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            b = rng.normal(0, 20)
            a = b + 1e-8 + rng.exponential(5)
            assert abs(logdiffexp(logsumexp(a, b), b) - a) <= 1e-12 * max(1.0, abs(a)) + 1e-12


class TestKS:
    def test_identical_and_disjoint(self):
        x = np.arange(10.0)
        assert ks_two_sample(x, x).D == 0.0
        assert ks_two_sample(x, x + 100).D == 1.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=300), rng.normal(0.2, size=500)
        d1, d2 = ks_two_sample(a, b), ks_two_sample(b, a)
        assert d1.D == d2.D and 0 <= d1.D <= 1

    def test_matches_scipy(self):
        rng = np.random.default_rng(2)
        a, b = rng.exponential(size=400), rng.exponential(1.1, size=700)
        assert ks_two_sample(a, b).D == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-15)

    def test_threshold(self):
        r = ks_two_sample(np.arange(4.0), np.arange(6.0))
        assert r.threshold_at(0.01) == pytest.approx(ks_critical_value(0.01) * math.sqrt(10 / 24))
        assert ks_critical_value(0.05) == pytest.approx(1.3581, abs=1e-4)
        with pytest.raises(ValueError):
            ks_critical_value(1.5)

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            ks_two_sample([], [1.0])
        with pytest.raises(ValueError):
            Sample([1.0, math.nan])

    def test_weighted(self):
        r = ks_two_sample(Sample([0.0, 1.0], [3, 1]), Sample([0.0, 0.0, 0.0, 1.0]))
        assert r.D == 0.0

    def test_calibration(self):
        # two seed-split draws of one distribution reject at 1% in at most a few of 100 meta-trials
        rejects = 0
        for t in range(100):
            a = sample_log_inverse_gamma(0.7, 10_000, SeedSpec(t, 0))
            b = sample_log_inverse_gamma(0.7, 10_000, SeedSpec(t, 1))
            rejects += ks_two_sample(a, b).rejects(0.01)
        assert rejects <= 4


class TestDominance:
    def test_shifted_sample_dominates(self):
        rng = np.random.default_rng(3)
        low = rng.normal(size=2000)
        assert dominance_violation(low, low + 1.0) <= 0.0
        assert dominance_violation(low + 1.0, low) > 0.3


class TestFitExponent:
    def test_square(self):
        x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
        slope, err = fit_exponent(x, x**2)
        assert slope == pytest.approx(2.0, abs=1e-12) and err < 1e-10

    def test_constant(self):
        slope, _ = fit_exponent([1, 2, 3, 4], [5, 5, 5, 5])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_exponent([1, 2], [1, 2])
        with pytest.raises(ValueError):
            fit_exponent([2, 2, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            fit_exponent([1, 2, 3], [1, -2, 3])


class TestChernoff:
    def test_monotone_in_u(self):
        us = np.linspace(0, 200, 80)
        b = [chernoff_bound_thin(0.5, 50, 5, 0.4, u) for u in us]
        assert all(y <= x for x, y in zip(b, b[1:]))
        assert b[-1] < 1e-10
        assert b[0] == 1.0

    def test_small_lambda_clamps_to_one(self):
        assert chernoff_bound_thin(0.5, 50, 5, 1e-9, 60.0) == 1.0

    def test_lambda_range(self):
        for lam in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                chernoff_bound_thin(0.5, 50, 5, lam, 60.0)
        with pytest.raises(ValueError):
            chernoff_bound_thin(0.2, 50, 5, 0.5, 60.0)  # 2 alpha = 0.4 < 0.5

    def test_explicit_value(self):
        lam, u, N, T, a = 0.4, 90.0, 50, 5, 0.5
        want = math.exp(-lam * u + math.log(math.comb(N + T - 2, N - 1)) + (N + T - 1) * (math.lgamma(2 * a - lam) - math.lgamma(2 * a)))
        assert want < 1
        assert chernoff_bound_thin(a, N, T, lam, u) == pytest.approx(want, rel=1e-12)

    def test_grid_min_improves_endpoints(self):
        lams = np.linspace(0.05, 0.95, 19)
        best, lam = chernoff_bound_thin_min(0.5, 50, 5, 80.0, lams)
        assert best <= chernoff_bound_thin(0.5, 50, 5, lams[0], 80.0)
        assert best <= chernoff_bound_thin(0.5, 50, 5, lams[-1], 80.0)
        assert lam in lams

    def test_dominates_empirical_tail(self):
        n = 20_000
        p = PolymerParams(0.5)
        z = np.array(
            [log_partition(build_field(p, Geometry.FULL_RECT, (1, 50, 1, 5), SeedSpec(6, r)), Variant.FULL, (1, 1), (50, 5)) for r in range(n)]
        )
        thr = np.linspace(np.median(z), z.max(), 20)
        tail = empirical_tail(z, thr)
        bound = np.array([chernoff_bound_thin_min(0.5, 50, 5, u)[0] for u in thr])
        assert np.all(tail.exceed_prob <= bound + 2 * tail.half_width)


class TestTail:
    def test_extremes(self):
        s = np.arange(1.0, 101.0)
        t = empirical_tail(s, [0.0, 50.5, 1000.0])
        assert t.exceed_prob.tolist() == [1.0, 0.5, 0.0]
        assert t.n == 100

    def test_median_of_fixture(self):
        s = sample_log_inverse_gamma(1.0, 4000, 9)
        t = empirical_tail(s, [float(np.median(s))])
        assert abs(t.exceed_prob[0] - 0.5) <= t.half_width[0] + 1e-3

    def test_nonincreasing(self):
        s = sample_log_inverse_gamma(1.0, 1000, 10)
        t = empirical_tail(s, np.linspace(-3, 5, 50))
        assert np.all(np.diff(t.exceed_prob) <= 0)

    def test_thresholds_must_increase(self):
        with pytest.raises(ValueError):
            empirical_tail([1.0, 2.0], [2.0, 1.0])


class TestMoments:
    def test_merge_is_order_free(self):
        rng = np.random.default_rng(4)
        chunks = [rng.normal(size=n) for n in (10, 33, 57)]
        a = Moments()
        for c in chunks:
            a.add(c)
        b = Moments().add(chunks[2]).merge(Moments().add(chunks[0])).merge(Moments().add(chunks[1]))
        allv = np.concatenate(chunks)
        assert a.n == b.n == allv.size
        assert a.mean == pytest.approx(allv.mean()) and b.mean == pytest.approx(allv.mean())
        assert a.variance == pytest.approx(allv.var(ddof=1))

    def test_agreement_z_scores(self):
        rng = np.random.default_rng(5)
        zm, zv = moment_agreement(rng.normal(size=5000), rng.normal(size=5000))
        assert abs(zm) < 4 and abs(zv) < 4
        zm, _ = moment_agreement(rng.normal(size=5000), rng.normal(1.0, size=5000))
        assert abs(zm) > 10
