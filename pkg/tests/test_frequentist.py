import math

import numpy as np
import pytest

from seqtrial.engine import DesignSchedule, crossing_prob
from seqtrial.frequentist import (
    SpendingFunction,
    UnequalGroupsError,
    conditional_power,
    curtailment_boundary,
    curtailment_design,
    obrien_fleming,
    pocock,
    spend,
    spending_boundaries,
)
from seqtrial.numerics import find_root, norm_cdf, norm_quantile

from oracles import crossing_prob_mvn

FIVE_LOOK = DesignSchedule.equal(5, 1000)


class TestPocock:
    def test_single_look(self):
        b = pocock(DesignSchedule(n=(100,)), 0.05)
        assert b[0] == pytest.approx(norm_quantile(0.95), abs=1e-6)
        assert b[0] == pytest.approx(1.645, abs=1e-3)

    def test_five_looks_constant(self):
        b = pocock(FIVE_LOOK, 0.05)
        assert len(set(b.c)) == 1
        assert b[0] == pytest.approx(2.12, abs=0.01)
        assert b.source == "pocock"

    def test_two_looks_vs_mvn_oracle(self):
        schedule = DesignSchedule.equal(2, 1000)
        b = pocock(schedule, 0.05)
        alpha = crossing_prob_mvn(schedule.n, 1.0, b.c, 0.0)
        assert alpha == pytest.approx(0.05, abs=1e-5)

    def test_alpha_reproduced(self):
        b = pocock(FIVE_LOOK, 0.05)
        assert crossing_prob(FIVE_LOOK, b, 0.0) == pytest.approx(0.05, abs=1e-4)

    def test_unequal_groups_rejected(self):
        with pytest.raises(UnequalGroupsError):
            pocock(DesignSchedule(n=(100, 500, 1000)), 0.05)


class TestObrienFleming:
    def test_single_look(self):
        b = obrien_fleming(DesignSchedule(n=(100,)), 0.05)
        assert b[0] == pytest.approx(norm_quantile(0.95), abs=1e-6)
        assert b[0] == pytest.approx(1.645, abs=1e-3)

    def test_five_look_row(self):
        b = obrien_fleming(FIVE_LOOK, 0.05)
        expected = (3.92, 2.77, 2.26, 1.96, 1.75)
        for got, want in zip(b.c, expected):
            assert got == pytest.approx(want, abs=0.01)

    def test_scaled_statistic_constant(self):
        b = obrien_fleming(FIVE_LOOK, 0.05)
        scaled = [cj * math.sqrt(nj) for cj, nj in zip(b.c, FIVE_LOOK.n)]
        assert max(scaled) - min(scaled) < 1e-9

    def test_strictly_decreasing(self):
        b = obrien_fleming(FIVE_LOOK, 0.05)
        assert all(x > y for x, y in zip(b.c, b.c[1:]))

    def test_alpha_reproduced(self):
        b = obrien_fleming(FIVE_LOOK, 0.05)
        assert crossing_prob(FIVE_LOOK, b, 0.0) == pytest.approx(0.05, abs=1e-4)


class TestSpendingFunctions:
    def test_linear_midpoint(self):
        sf = SpendingFunction(kind="power", alpha=0.05, b=1.0)
        assert spend(sf, 0.5) == pytest.approx(0.025)

    def test_log_endpoint(self):
        sf = SpendingFunction(kind="log", alpha=0.05)
        assert spend(sf, 1.0) == 0.05
        assert spend(sf, 0.0) == 0.0

    def test_conservative_kind_direct_formula(self):
        sf = SpendingFunction(kind="obf-like", alpha=0.05)
        expected = 2.0 - 2.0 * norm_cdf(norm_quantile(0.975) / math.sqrt(0.2))
        assert spend(sf, 0.2) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("u", [-0.1, 1.2])
    def test_domain_error(self, u):
        with pytest.raises(ValueError):
            spend(SpendingFunction(kind="power", alpha=0.05), u)

    def test_nondecreasing(self):
        for kind in ("log", "obf-like", "power"):
            sf = SpendingFunction(kind=kind, alpha=0.05, b=2.0)
            vals = [spend(sf, u) for u in np.linspace(0, 1, 41)]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
            assert vals[-1] == pytest.approx(0.05)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            SpendingFunction(kind="power", alpha=0.05, b=0.0)
        with pytest.raises(ValueError):
            SpendingFunction(kind="nope", alpha=0.05)


class TestSpendingBoundaries:
    def test_linear_five_look_row(self):
        sf = SpendingFunction(kind="power", alpha=0.05, b=1.0)
        b = spending_boundaries(FIVE_LOOK, sf)
        expected = (2.33, 2.22, 2.12, 2.03, 1.96)
        for got, want in zip(b.c, expected):
            assert got == pytest.approx(want, abs=0.01)

    @pytest.mark.parametrize("kind", ["log", "obf-like", "power"])
    def test_single_look_all_kinds(self, kind):
        schedule = DesignSchedule(n=(100,))
        b = spending_boundaries(schedule, SpendingFunction(kind=kind, alpha=0.05))
        assert b[0] == pytest.approx(norm_quantile(0.95), abs=1e-6)

    def test_log_kind_tracks_constant_boundary(self):
        sf = SpendingFunction(kind="log", alpha=0.05)
        b = spending_boundaries(FIVE_LOOK, sf)
        constant = pocock(FIVE_LOOK, 0.05)
        for got, want in zip(b.c, constant.c):
            assert abs(got - want) < 0.1

    def test_conservative_kind_tracks_decreasing_boundary(self):
        # the early-look gap to the exact decreasing family is large by
        # construction (0.31 at the first of five looks); agreement tightens
        # from the third look on
        sf = SpendingFunction(kind="obf-like", alpha=0.05)
        b = spending_boundaries(FIVE_LOOK, sf)
        reference = obrien_fleming(FIVE_LOOK, 0.05)
        gaps = [abs(got - want) for got, want in zip(b.c, reference.c)]
        assert all(g < 0.35 for g in gaps)
        assert all(g < 0.1 for g in gaps[2:])
        assert all(x > y for x, y in zip(b.c, b.c[1:]))

    def test_alpha_reproduced(self):
        for kind in ("log", "obf-like", "power"):
            sf = SpendingFunction(kind=kind, alpha=0.05)
            b = spending_boundaries(FIVE_LOOK, sf)
            assert crossing_prob(FIVE_LOOK, b, 0.0) == pytest.approx(0.05, abs=1e-4)


class TestConditionalPower:
    def test_limits_in_theta(self):
        schedule = DesignSchedule.equal(2, 400)
        cp_hi = conditional_power(5.0, 0.1, schedule, 1, eta=0.05)
        cp_lo = conditional_power(-5.0, 0.1, schedule, 1, eta=0.05)
        assert cp_hi > 1.0 - 1e-9
        assert cp_lo < 1e-9

    def test_halfway_symmetry(self):
        # with half the data in hand and the interim z at q_eta * sqrt(2),
        # the remaining increment is a coin flip at zero effect
        schedule = DesignSchedule.equal(2, 400)
        eta = 0.05
        z_j = norm_quantile(1.0 - eta) * math.sqrt(2.0)
        ybar = z_j / math.sqrt(schedule.n[0])
        assert conditional_power(0.0, ybar, schedule, 1, eta) == pytest.approx(0.5)

    def test_monotone_in_theta_and_data(self):
        schedule = DesignSchedule.equal(4, 1000)
        cps = [conditional_power(th, 0.05, schedule, 2, 0.05) for th in (-0.1, 0.0, 0.1)]
        assert cps[0] < cps[1] < cps[2]
        cps2 = [conditional_power(0.0, y, schedule, 2, 0.05) for y in (0.0, 0.05, 0.1)]
        assert cps2[0] < cps2[1] < cps2[2]

    def test_matches_future_completion_simulation(self):
        schedule = DesignSchedule.equal(5, 1000)
        j, theta, ybar, eta = 2, 0.04, 0.06, 0.05
        exact = conditional_power(theta, ybar, schedule, j, eta)
        rng = np.random.default_rng(7)
        reps = 100_000
        n_j, n_K = schedule.n[j - 1], schedule.n[-1]
        remaining = n_K - n_j
        future = rng.normal(theta * remaining, math.sqrt(remaining), reps)
        z_final = (n_j * ybar + future) / math.sqrt(n_K)
        hit = np.mean(z_final > norm_quantile(1.0 - eta))
        se = math.sqrt(hit * (1 - hit) / reps)
        assert abs(exact - hit) < 3.0 * se

    def test_final_analysis_rejected(self):
        with pytest.raises(ValueError):
            conditional_power(0.0, 0.1, DesignSchedule.equal(2, 400), 2, 0.05)


class TestCurtailment:
    def test_degenerate_no_remaining_data(self):
        schedule = DesignSchedule(n=(500, 1000))
        assert curtailment_boundary(schedule, 2, eta=0.05, gamma=0.8) == pytest.approx(
            norm_quantile(0.95)
        )

    def test_closed_form_value(self):
        schedule = DesignSchedule.equal(5, 1000)
        got = curtailment_boundary(schedule, 1, eta=0.05, gamma=0.8)
        expected = norm_quantile(0.95) * math.sqrt(5.0) + norm_quantile(0.8) * 2.0
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(5.36, abs=0.01)

    def test_inverts_conditional_power(self):
        schedule = DesignSchedule.equal(5, 1000)
        j, eta, gamma = 2, 0.05, 0.8
        boundary = curtailment_boundary(schedule, j, eta, gamma)
        scale = schedule.sigma / math.sqrt(schedule.n[j - 1])
        implied = find_root(
            lambda z: conditional_power(0.0, z * scale, schedule, j, eta) - gamma,
            0.0,
            10.0,
            tol=1e-10,
        )
        assert boundary == pytest.approx(implied, abs=1e-8)

    @pytest.mark.parametrize(
        "eta,gamma,n",
        [
            (0.05, 0.8, (200, 400, 600, 800, 1000)),
            (0.025, 0.9, (100, 300, 1000)),
            (0.1, 0.6, (50, 100, 150, 200)),
        ],
    )
    def test_type_one_error_bounded(self, eta, gamma, n):
        schedule = DesignSchedule(n=n)
        design = curtailment_design(schedule, eta, gamma)
        alpha = crossing_prob(schedule, design, 0.0)
        assert alpha <= eta / gamma + 1e-10
