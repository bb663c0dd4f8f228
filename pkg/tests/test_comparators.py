import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from hmchisq.comparators import (
    PowerSpec,
    conditional_power,
    conditional_power_curve,
    equal_p_boundary,
    fisher_combined,
    fisher_rule,
    fixed_effects_meta,
    harmonic_rule,
    liberal_harmonic_rule,
    monte_carlo_rate,
    project_power,
    project_power_table,
    rejection_boundary,
    standard_rules,
    stouffer_pooled,
    stouffer_rule,
    two_trials_decide,
    two_trials_rule,
    type_one_error,
)
from hmchisq.numerics import RngStream, normal_isf

pvals = st.lists(st.floats(1e-8, 1 - 1e-8), min_size=1, max_size=8)


class TestCombinationTests:
    @given(pvals)
    def test_fisher_matches_scipy(self, ps):
        ref = stats.combine_pvalues(ps, method="fisher")
        res = fisher_combined(ps)
        assert res.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert res.p_overall == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-300)

    @given(pvals)
    def test_stouffer_matches_scipy(self, ps):
        ref = stats.combine_pvalues(ps, method="stouffer")
        assert stouffer_pooled(ps).p_overall == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-300)

    @given(st.lists(st.tuples(st.floats(1e-6, 1 - 1e-6), st.floats(0.01, 100)), min_size=1, max_size=6))
    def test_weighted_stouffer_matches_scipy(self, rows):
        ps = [r[0] for r in rows]
        w = np.array([r[1] for r in rows])
        # scipy weights multiply z directly: pass sqrt(w)
        ref = stats.combine_pvalues(ps, method="stouffer", weights=np.sqrt(w))
        res = stouffer_pooled(ps, w)
        assert res.method == "stouffer_weighted"
        assert res.p_overall == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-300)

    def test_weighted_stouffer_equals_fixed_effects(self):
        se = np.array([0.41, 0.85, 0.29])
        ps = np.array([0.001, 0.03, 0.2])
        z = normal_isf(ps)
        meta = fixed_effects_meta(z * se, se)
        assert stouffer_pooled(ps, 1 / se**2).statistic == pytest.approx(meta.z, rel=1e-12)

    def test_invalid_pvalues(self):
        with pytest.raises(ValueError):
            fisher_combined([0.1, 0.0])
        with pytest.raises(ValueError):
            stouffer_pooled([0.1, 1.2])

    def test_two_trials(self):
        assert two_trials_decide(0.02, 0.025)
        assert not two_trials_decide(0.026, 0.001)


class TestFixedEffects:
    def test_hand_computation(self):
        theta = np.array([-1.0, -0.5])
        se = np.array([0.5, 1.0])
        w = np.array([4.0, 1.0])
        est = (w @ theta) / w.sum()
        s = 1 / math.sqrt(5)
        m = fixed_effects_meta(theta, se)
        assert m.estimate == pytest.approx(est)
        assert m.se == pytest.approx(s)
        assert m.ci == pytest.approx((est - 1.959964 * s, est + 1.959964 * s), rel=1e-6)
        assert m.p_two_sided == pytest.approx(2 * stats.norm.sf(abs(est) / s))
        hr, lo, hi = m.exponentiated()
        assert lo < hr < hi
        assert m.as_result().n == 2


class TestRules:
    def test_thresholds(self):
        assert harmonic_rule().params["critical_value"] == pytest.approx(9.1406, abs=1e-4)
        lib = liberal_harmonic_rule()
        assert lib.params["critical_value"] == pytest.approx(7.6829, abs=1e-4)
        assert lib.level == pytest.approx(0.0013936, abs=1e-7)
        assert lib.params["inflation"] == pytest.approx(2.2298, abs=1e-4)
        assert fisher_rule().params["product_threshold"] == pytest.approx(5.81e-5, rel=1e-2)
        assert two_trials_rule().level == pytest.approx(0.025**2)

    def test_fisher_rule_agrees_with_fisher_test(self):
        rule = fisher_rule()
        for ps in ([0.001, 0.05], [0.01, 0.01], [0.0001, 0.5], [0.2, 0.3]):
            assert rule.decide(ps) == fisher_combined(ps).decide(rule.level)

    def test_stouffer_rule_agrees_with_stouffer_test(self):
        rule = stouffer_rule(weights=[1.0, 4.0])
        for ps in ([0.001, 0.05], [0.01, 0.01], [0.0001, 0.5]):
            assert rule.decide(ps) == stouffer_pooled(ps, [1.0, 4.0]).decide(rule.level)

    def test_liberal_rule_contains_two_trials(self):
        lib, tt = liberal_harmonic_rule(), two_trials_rule()
        grid = np.linspace(1e-6, 0.025, 40)
        for p1 in grid:
            for p2 in grid:
                if tt.decide([p1, p2]):
                    assert lib.decide([p1, p2])

    def test_approves_shape(self):
        z = np.ones((5, 3, 2)) * 3
        assert harmonic_rule().approves(z).shape == (5, 3)
        with pytest.raises(ValueError):
            harmonic_rule().approves(np.ones((4, 3)))

    def test_bad_kind(self):
        from hmchisq.comparators import DecisionRule

        with pytest.raises(ValueError):
            DecisionRule("bogus", 0.1)
        with pytest.raises(ValueError):
            stouffer_rule(weights=[1.0])

    def test_standard_rules(self):
        assert [r.kind for r in standard_rules()] == ["two_trials", "harmonic_controlled", "fisher", "stouffer"]


def _quadrature_conditional_power(rule, p1):
    # integrate the approval indicator over z2 ~ Normal(z1, 1)
    z1 = normal_isf(p1)
    f = lambda z2: stats.norm.pdf(z2 - z1) * float(rule.approves(np.array([z1, z2])))  # noqa: E731
    lo, hi = z1 - 12, z1 + 12
    pts = np.linspace(lo, hi, 4001)
    vals = np.array([f(x) for x in pts])
    return integrate.trapezoid(vals, pts)


class TestConditionalPower:
    @pytest.mark.parametrize("p1", [0.0005, 0.001, 0.01, 0.03, 0.06])
    @pytest.mark.parametrize("make", [harmonic_rule, liberal_harmonic_rule, fisher_rule, stouffer_rule, two_trials_rule])
    def test_closed_form_against_quadrature(self, make, p1):
        rule = make()
        assert conditional_power(rule, p1) == pytest.approx(_quadrature_conditional_power(rule, p1), abs=2e-3)

    def test_harmonic_values(self):
        rule = harmonic_rule()
        got = [conditional_power(rule, p) for p in (0.001, 0.01, 0.03)]
        assert got == pytest.approx([0.913, 0.632, 0.255], abs=1e-3)

    def test_cutoffs(self):
        h, lib = harmonic_rule(), liberal_harmonic_rule()
        assert conditional_power(h, 0.066) == 0.0 and conditional_power(h, 0.064) > 0
        assert conditional_power(lib, 0.084) == 0.0 and conditional_power(lib, 0.082) > 0
        assert conditional_power(two_trials_rule(), 0.026) == 0.0

    def test_monotone_curve(self):
        grid = np.linspace(1e-4, 0.2, 200)
        for make in (harmonic_rule, fisher_rule, stouffer_rule):
            cp = conditional_power_curve(make(), grid)
            assert np.all(np.diff(cp) <= 1e-15)

    def test_two_study_only(self):
        with pytest.raises(ValueError):
            conditional_power(harmonic_rule(n_studies=3), 0.01)


class TestMonteCarlo:
    def test_type_one_error(self):
        rate, se = type_one_error(harmonic_rule(), 10**6, RngStream(1))
        assert abs(rate - 0.025**2) <= 4 * math.sqrt(0.025**2 / 10**6)
        assert se > 0

    def test_worker_count_invariance(self):
        rule = harmonic_rule()
        a = monte_carlo_rate(rule, 2.0, 600_000, RngStream(3), n_jobs=1)
        b = monte_carlo_rate(rule, 2.0, 600_000, RngStream(3), n_jobs=4)
        assert a == b

    def test_two_trials_power_analytic(self):
        spec = PowerSpec(per_trial_power=0.8, n_sims=400_000, rng=RngStream(5))
        assert project_power(two_trials_rule(), spec) == pytest.approx(0.64, abs=0.004)

    def test_power_table_ordering(self):
        table = project_power_table([0.8], n_sims=200_000, rng=RngStream(9))
        row = table[0.8]
        assert row["two_trials"] < row["harmonic_controlled"] < row["fisher"] < row["stouffer"]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PowerSpec(n_sims=0)
        assert PowerSpec(per_trial_power=0.5).mu_alt == pytest.approx(1.959964, abs=1e-6)


class TestBoundaries:
    @pytest.mark.parametrize("make", [harmonic_rule, fisher_rule, stouffer_rule, liberal_harmonic_rule])
    def test_boundary_is_boundary(self, make):
        rule = make()
        for pt in rejection_boundary(rule, [0.0005, 0.005, 0.02]):
            if pt.p2 is None or pt.p2 >= 1:
                continue
            assert rule.decide([pt.p1, pt.p2 * (1 - 1e-7)])
            assert not rule.decide([pt.p1, min(pt.p2 * (1 + 1e-5), 0.999)])

    def test_no_boundary_past_necessary(self):
        pts = rejection_boundary(harmonic_rule(), [0.07])
        assert pts[0].p2 is None

    def test_equal_p(self):
        assert equal_p_boundary(harmonic_rule()) == pytest.approx(0.01627, abs=1e-5)
        assert equal_p_boundary(fisher_rule()) == pytest.approx(0.00762, abs=1e-5)
        assert equal_p_boundary(stouffer_rule()) == pytest.approx(0.01125, abs=1e-5)
        assert equal_p_boundary(two_trials_rule()) == 0.025
