import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teamform.lowerbound import (CEParams, RegimeError, chernoff_bound, csv_row, largest_first,
                                 no_hit_probability, simulate_ce, tail_bound_check)

# (67/100)^20, computed with exact fractions
P_100_2_10 = 3.322737661703086e-4


class TestParams:
    def test_p(self):
        assert CEParams(100, 2, 10).p == pytest.approx(0.33)

    def test_f_zero(self):
        prm = CEParams(100, 2, 0)
        assert no_hit_probability(prm) == 1.0
        res = simulate_ce(prm, 100, np.random.default_rng(0))
        assert (res.hits == 0).all()

    @pytest.mark.parametrize("n,sigma,f", [(100, 1, 5), (100, 60, 5), (100, 2, 20), (30, 16, 2)])
    def test_rejected(self, n, sigma, f):
        with pytest.raises(RegimeError):
            CEParams(n, sigma, f).validate()

    def test_regime(self):
        assert CEParams(1320, 24, 10).mu == pytest.approx(1.0)
        assert CEParams(1320, 24, 10).in_tail_regime()
        assert CEParams(440, 24, 10).mu == pytest.approx(3.0)
        assert CEParams(440, 24, 10).in_tail_regime()
        assert not CEParams(100, 2, 10).in_tail_regime()


class TestClosedForm:
    def test_example(self):
        assert no_hit_probability(CEParams(100, 2, 10)) == pytest.approx(P_100_2_10, rel=1e-12)

    def test_half(self):
        # p = 0.5 and one round pair
        prm = CEParams(12, 2, 1)
        assert prm.p == 0.5
        assert no_hit_probability(prm) == 0.25

    def test_chernoff(self):
        assert chernoff_bound(CEParams(1320, 24, 10)) == pytest.approx(math.exp(-1))


class TestMonteCarlo:
    def test_bernoulli_matches_closed_form(self):
        prm = CEParams(100, 2, 10)
        res = simulate_ce(prm, 200_000, np.random.default_rng(1))
        se = math.sqrt(P_100_2_10 * (1 - P_100_2_10) / res.trials)
        assert abs(res.p_no_hit - P_100_2_10) <= 4 * se

    def test_mechanistic_hits_less(self):
        prm = CEParams(100, 2, 10)
        mech = simulate_ce(prm, 2000, np.random.default_rng(2), "mechanistic")
        assert mech.hit_rate <= prm.p
        assert mech.p_no_hit >= no_hit_probability(prm)

    def test_tail_in_regime(self):
        out = tail_bound_check(CEParams(1320, 24, 10), 20_000, np.random.default_rng(3))
        assert out["holds"] and out["tail_emp"] < 1e-3
        assert out["tail_bound"] == pytest.approx(math.exp(-1))

    def test_tail_boundary(self):
        out = tail_bound_check(CEParams(440, 24, 10), 20_000, np.random.default_rng(4))
        assert out["holds"]

    def test_tail_out_of_regime(self):
        with pytest.raises(RegimeError):
            tail_bound_check(CEParams(100, 2, 10), 10, np.random.default_rng(0))

    def test_histogram_and_csv(self):
        res = simulate_ce(CEParams(100, 2, 10), 500, np.random.default_rng(5))
        assert res.histogram().sum() == 500 and len(res.histogram()) == 21
        row = csv_row(res)
        assert row["tail_bound"] == "" and row["p_no_hit_exact"] == pytest.approx(P_100_2_10)

    def test_seeded(self):
        prm = CEParams(1000, 16, 50)
        a = simulate_ce(prm, 50, np.random.default_rng(9), "mechanistic")
        b = simulate_ce(prm, 50, np.random.default_rng(9), "mechanistic")
        assert (a.hits == b.hits).all()

    @settings(max_examples=15, deadline=None)
    @given(st.integers(60, 400), st.integers(2, 6), st.integers(0, 8), st.integers(0, 99))
    def test_mechanistic_hits_bounded(self, n, sigma, f, seed):
        prm = CEParams(n, sigma, f)
        try:
            prm.validate()
        except RegimeError:
            return
        res = simulate_ce(prm, 5, np.random.default_rng(seed), "mechanistic")
        assert (res.hits <= prm.rounds).all() and (res.hits <= sigma - 1).all()


def test_largest_first_tie_break():
    assert largest_first({3: 2, 1: 2, 2: 1}) == 1
