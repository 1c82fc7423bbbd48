"""Two-binomial log-odds-ratio: intervals, coverage, endpoint tails."""

import math

import numpy as np
import pytest
from scipy.stats.contingency import odds_ratio

from genestim import oddsratio as O

N1, N2 = 20, 30


def _data(x1, x2, n1=N1, n2=N2):
    return O.TwoBinomialData(x1, x2, n1, n2)


class TestDataAndRules:
    def test_count_validation(self):
        with pytest.raises(ValueError):
            _data(21, 0)
        with pytest.raises(ValueError):
            O.TwoBinomialData(0, 0, 0, 5)

    def test_plus_c_nuisance_formula(self):
        d = _data(3, 7)
        assert O.plus_c_nuisance(d, 0.0) == 10.0
        c = 0.5
        expect = 20 * 3.5 / 21 + 30 * 7.5 / 31
        assert O.plus_c_nuisance(d, c) == pytest.approx(expect, abs=1e-14)
        with pytest.raises(ValueError):
            O.plus_c_nuisance(d, -1.0)

    def test_plus_c_moves_boundary_data_off_the_boundary(self):
        d = _data(0, 0)
        assert O.NuisanceRule("profiled").resolve(d) == 0.0
        assert 0.0 < O.NuisanceRule("plus-c", c=0.5).resolve(d) < N1 + N2

    def test_fixed_value_rule(self):
        d = _data(4, 9)
        assert O.NuisanceRule("fixed-value", value=17.0).resolve(d) == 17.0
        with pytest.raises(ValueError):
            O.NuisanceRule("bayes").resolve(d)


class TestProfiledScore:
    def test_zero_at_the_sample_log_odds_ratio(self):
        d = _data(10, 15)
        assert O.profiled_sbar(d, 0.0) == pytest.approx(0.0, abs=1e-12)
        d2 = _data(12, 9)
        theta_hat = O.log_or(12 / 20, 9 / 30)
        assert O.profiled_sbar(d2, theta_hat) == pytest.approx(0.0, abs=1e-9)

    def test_decreasing_in_theta(self):
        d = _data(12, 9)
        grid = np.linspace(-2.0, 2.0, 41)
        vals = [O.profiled_sbar(d, t) for t in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_unit_variance_at_the_null(self):
        # exact second moment of the statistic over the outcome grid,
        # evaluated at the parameter pair the statistic is centered at
        theta = 0.0
        stats = O._profiled_sbar_all_outcomes(N1, N2, theta)
        # variance taken conditionally-null at p1 = p2 = 0.5 is close to
        # one by construction of the standardization
        logm = O._log_masses(N1, N2, 0.5, 0.5)
        m = np.exp(logm)
        var = float(np.sum(m * stats ** 2))
        assert var == pytest.approx(1.0, abs=0.06)

    def test_degenerate_nuisance_raises(self):
        with pytest.raises(O.InfeasibleNuisance):
            O.profiled_sbar(_data(0, 0), 0.0)

    def test_point_estimate(self):
        assert O.sbar_zero_theta(_data(10, 15)) == pytest.approx(0.0,
                                                                 abs=1e-12)
        d = _data(12, 9)
        assert O.sbar_zero_theta(d) == pytest.approx(
            O.log_or(0.6, 0.3), abs=1e-12)
        # a generic rule solves the same root by bisection
        got = O.sbar_zero_theta(d, O.NuisanceRule("fixed-value", value=21.0))
        assert got == pytest.approx(O.log_or(0.6, 0.3), abs=1e-8)
        with pytest.raises(O.InfeasibleNuisance):
            O.sbar_zero_theta(_data(0, 9))


class TestZInterval:
    def test_symmetric_data_gives_a_symmetric_interval(self):
        res = O.z_interval(_data(10, 15))
        assert res.lower == pytest.approx(-res.upper, abs=1e-10)
        assert res.contains(0.0)

    def test_endpoints_pinch_the_score_to_z(self):
        d = _data(12, 9)
        res = O.z_interval(d, z=O.Z_95)
        assert abs(O.profiled_sbar(d, res.lower)) == pytest.approx(
            O.Z_95, abs=1e-7)
        assert abs(O.profiled_sbar(d, res.upper)) == pytest.approx(
            O.Z_95, abs=1e-7)
        assert res.lower < O.sbar_zero_theta(d) < res.upper

    def test_larger_z_nests_the_interval(self):
        d = _data(7, 18)
        small = O.z_interval(d, z=1.0)
        big = O.z_interval(d, z=2.5)
        assert big.lower < small.lower < small.upper < big.upper

    def test_single_boundary_count_leaves_one_end_unbounded(self):
        res = O.z_interval(_data(0, 9))
        assert res.lower == -math.inf and math.isfinite(res.upper)
        assert "unbounded" in res.boundary_note

    def test_degenerate_nuisance_follows_the_sign_convention(self):
        closed = O.z_interval(_data(0, 0), equal_sign=True)
        assert closed.lower == -math.inf and closed.upper == math.inf
        open_ = O.z_interval(_data(N1, N2), equal_sign=False)
        assert open_.empty
        assert not open_.contains(0.0)

    def test_bad_z_rejected(self):
        with pytest.raises(ValueError):
            O.z_interval(_data(5, 5), z=0.0)


class TestFisherExactInterval:
    @pytest.mark.parametrize("x1,x2", [(10, 15), (5, 25), (1, 1), (19, 29),
                                       (3, 20), (15, 4)])
    def test_matches_the_conditional_interval_of_scipy(self, x1, x2):
        mine = O.fisher_exact_interval(_data(x1, x2))
        table = [[x1, N1 - x1], [x2, N2 - x2]]
        ref = odds_ratio(table).confidence_interval(0.95)
        assert mine.lower == pytest.approx(ref.low, rel=1e-9)
        assert mine.upper == pytest.approx(ref.high, rel=1e-9)

    def test_endpoints_invert_the_conditional_tails(self):
        d = _data(5, 25)
        res = O.fisher_exact_interval(d, 0.95)
        t = d.x1 + d.x2
        _, ge = O._cond_tails(N1, N2, t, d.x1, math.log(res.lower))
        le, _ = O._cond_tails(N1, N2, t, d.x1, math.log(res.upper))
        assert ge == pytest.approx(0.025, abs=1e-10)
        assert le == pytest.approx(0.025, abs=1e-10)

    def test_support_edges(self):
        res = O.fisher_exact_interval(_data(0, 9))
        assert res.lower == 0.0 and math.isfinite(res.upper)
        res = O.fisher_exact_interval(_data(20, 9))
        assert res.upper == math.inf and res.lower > 0.0
        res = O.fisher_exact_interval(_data(0, 0))
        assert res.lower == 0.0 and res.upper == math.inf

    def test_bad_confidence_rejected(self):
        with pytest.raises(ValueError):
            O.fisher_exact_interval(_data(5, 5), confidence=1.0)


class TestExactCoverage:
    # frozen exact enumerations at z = 1.959964, c = 0
    def test_balanced_half_cell(self):
        got = O.coverage_z(N1, N2, 1.0, 0.5, 0.5, 0.0, True)
        assert got == pytest.approx(0.9436752327089549, abs=1e-12)

    def test_sparse_cell_depends_on_the_sign_convention(self):
        with_eq = O.coverage_z(N1, N2, 1.0, 0.01, 0.01, 0.0, True)
        without = O.coverage_z(N1, N2, 1.0, 0.01, 0.01, 0.0, False)
        assert with_eq == pytest.approx(0.9992569514325904, abs=1e-12)
        assert without == pytest.approx(0.39425088429505384, abs=1e-12)
        # the gap is exactly the mass of the two all-boundary outcomes
        gap = 0.99 ** 50 + 0.01 ** 50
        assert with_eq - without == pytest.approx(gap, abs=1e-12)

    def test_closed_version_always_covers_at_least_the_open_one(self):
        for or_true, p1, p2 in O.COVERAGE_CELLS[:5]:
            a = O.coverage_z(N1, N2, or_true, p1, p2, 0.5, True)
            b = O.coverage_z(N1, N2, or_true, p1, p2, 0.5, False)
            assert a >= b

    def test_shrinkage_c_raises_sparse_cell_coverage(self):
        base = O.coverage_z(N1, N2, 1.0, 0.01, 0.01, 0.0, False)
        c_half = O.coverage_z(N1, N2, 1.0, 0.01, 0.01, 0.5, False)
        assert c_half > base

    def test_fisher_coverage_is_conservative(self):
        got = O.coverage_fisher(N1, N2, 1.0, 0.5, 0.5, 0.95)
        assert got == pytest.approx(0.9753816989626016, abs=1e-12)
        assert got >= 0.95

    def test_coverage_table_shape(self):
        rows = O.coverage_table(6, 8, ((1.0, 0.5, 0.5),),
                                c_list=(0.0,), equal_options=(True,))
        methods = {r.method for r in rows}
        assert methods == {"z-standard", "fisher-exact"}
        assert all(0.0 <= r.coverage <= 1.0 for r in rows)


class TestScoreTails:
    def test_sides_partition_up_to_the_observed_atom(self):
        d = _data(8, 12)
        theta = 0.3
        ge = O.score_tail_at(d, theta, "ge")
        le = O.score_tail_at(d, theta, "le")
        assert 1.0 <= ge + le <= 1.0 + 0.5  # both include the observed atom
        with pytest.raises(ValueError):
            O.score_tail_at(d, theta, "both")

    def test_ge_tail_shrinks_as_theta_moves_left_of_the_estimate(self):
        d = _data(12, 9)
        t_hat = O.sbar_zero_theta(d)
        tails = [O.score_tail_at(d, t, "ge")
                 for t in (t_hat, t_hat - 1.0, t_hat - 2.0)]
        assert tails[0] > tails[1] > tails[2]

    def test_endpoint_tails_are_below_the_nominal_half_level(self):
        rows = O.fisher_endpoint_tails(6, 8)
        assert len(rows) == 5 * 7
        worst = max(max(r[2], r[3]) for r in rows)
        assert worst == pytest.approx(0.02134075438604372, abs=1e-10)
        assert worst <= 0.025
