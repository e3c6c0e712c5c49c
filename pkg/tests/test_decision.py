import math

import numpy as np
import pytest

from seqtrial.bayes import GaussianPrior, posterior, pp_boundary
from seqtrial.decision import (
    LossSpec,
    backward_induction,
    expected_loss_curves,
    subjective_threshold,
    terminal_risk,
)
from seqtrial.engine import DesignSchedule, crossing_prob

UNIT_PRIOR = GaussianPrior(mu=0.0, nu=1.0)

# two monitoring plans sharing data and losses: one with an extra look
# planned between the interim and the maximum sample size
TWO_STAGE = DesignSchedule(n=(200, 400))
THREE_STAGE = DesignSchedule(n=(200, 300, 400))
SHARED_LOSS_2 = LossSpec.constant(7600.0, 400.0, 2)
SHARED_LOSS_3 = LossSpec.constant(7600.0, 400.0, 3)


class TestSubjectiveThreshold:
    def test_nineteen_to_one(self):
        assert subjective_threshold(19.0, 1.0) == pytest.approx(0.95)

    def test_equal_losses(self):
        assert subjective_threshold(3.0, 3.0) == pytest.approx(0.5)

    def test_dominant_false_rejection_loss(self):
        assert subjective_threshold(1e12, 1.0) == pytest.approx(1.0, abs=1e-11)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            subjective_threshold(0.0, 1.0)


class TestTerminalRisk:
    def test_tie_goes_to_acceptance(self):
        schedule = DesignSchedule(n=(400,))
        loss = LossSpec.constant(500.0, 500.0, 1)
        # symmetric losses tie exactly at the z-value with centered posterior
        z_tie = pp_boundary(0.5, UNIT_PRIOR, 400, 1.0)
        risk = terminal_risk(np.array([z_tie]), schedule, UNIT_PRIOR, loss)
        assert risk.stop_risk[0] == pytest.approx(risk.continue_risk[0], abs=1e-9)
        assert not risk.reject[0]
        assert risk.bayes_risk[0] == pytest.approx(250.0, abs=1e-6)

    def test_large_z_rejects_at_no_cost(self):
        schedule = DesignSchedule(n=(400,))
        loss = LossSpec.constant(1000.0, 400.0, 1)
        risk = terminal_risk(np.array([9.0]), schedule, UNIT_PRIOR, loss)
        assert risk.reject[0]
        assert risk.bayes_risk[0] < 1e-10

    def test_boundary_is_posterior_threshold_at_loss_ratio(self):
        schedule = DesignSchedule(n=(1000,))
        loss = LossSpec.constant(34890.0, 1000.0, 1)
        risk = terminal_risk(np.linspace(-3, 3, 11), schedule, UNIT_PRIOR, loss)
        gamma = 34890.0 / 35890.0
        assert risk.boundary == pytest.approx(
            pp_boundary(gamma, UNIT_PRIOR, 1000, 1.0), abs=1e-12
        )

    def test_decision_matches_posterior_side(self):
        schedule = DesignSchedule(n=(600,))
        loss = LossSpec.constant(9000.0, 700.0, 1)
        z = np.linspace(-4, 4, 101)
        risk = terminal_risk(z, schedule, UNIT_PRIOR, loss)
        gamma = subjective_threshold(9000.0, 700.0)
        for zi, rejected in zip(z, risk.reject):
            prob = posterior(UNIT_PRIOR, zi / math.sqrt(600), 600, 1.0).prob_positive
            assert rejected == (prob > gamma)


class TestBackwardInduction:
    def test_single_analysis_reduces_to_threshold_rule(self):
        schedule = DesignSchedule(n=(400,))
        loss = LossSpec.constant(7600.0, 400.0, 1)
        table = backward_induction(schedule, UNIT_PRIOR, loss)
        expected = pp_boundary(0.95, UNIT_PRIOR, 400, 1.0)
        assert table.boundaries[0] == pytest.approx(expected, abs=1e-9)

    def test_five_look_calibrated_loss_row(self):
        schedule = DesignSchedule.equal(5, 1000)
        loss = LossSpec.constant(34890.0, 1000.0, 5)
        table = backward_induction(schedule, UNIT_PRIOR, loss)
        expected = (2.33, 2.22, 2.15, 2.09, 1.91)
        for got, want in zip(table.boundaries.c, expected):
            assert got == pytest.approx(want, abs=0.02)
        alpha = crossing_prob(schedule, table.boundaries, 0.0)
        assert alpha == pytest.approx(0.05, abs=0.001)

    def test_extra_planned_look_flips_decision_at_interim(self):
        with_extra = backward_induction(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_3)
        without = backward_induction(TWO_STAGE, UNIT_PRIOR, SHARED_LOSS_2)
        z_obs = 1.75
        assert without.analyses[0].boundary < z_obs  # stop and reject
        assert with_extra.analyses[0].boundary > z_obs  # keep enrolling

    def test_extra_look_lowers_continuation_risk(self):
        with_extra = backward_induction(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_3)
        without = backward_induction(TWO_STAGE, UNIT_PRIOR, SHARED_LOSS_2)
        z = with_extra.analyses[0].z
        idx = int(np.argmin(np.abs(z - 1.75)))
        assert (
            with_extra.analyses[0].continue_risk[idx]
            < without.analyses[0].continue_risk[idx]
        )

    def test_bayes_risk_is_pointwise_minimum(self):
        table = backward_induction(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_3)
        for a in table.analyses:
            assert np.all(a.bayes_risk <= a.stop_risk + 1e-12)
            assert np.all(a.bayes_risk <= a.continue_risk + 1e-12)
            assert np.all(
                a.bayes_risk == np.minimum(a.stop_risk, a.continue_risk)
            )

    def test_rejection_region_is_upper_set(self):
        table = backward_induction(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_3)
        for a in table.analyses:
            flags = a.reject.astype(int)
            assert np.all(np.diff(flags) >= 0)
            crossing = a.z[np.argmax(flags)] if flags.any() else math.inf
            assert crossing == pytest.approx(a.boundary, abs=0.03)

    def test_boundaries_invariant_to_loss_rescale(self):
        schedule = DesignSchedule.equal(3, 600)
        base = LossSpec.constant(5000.0, 600.0, 3, patient_cost=1.0)
        scaled = LossSpec.constant(50000.0, 6000.0, 3, patient_cost=10.0)
        b1 = backward_induction(schedule, UNIT_PRIOR, base).boundaries
        b2 = backward_induction(schedule, UNIT_PRIOR, scaled).boundaries
        for x, y in zip(b1.c, b2.c):
            assert x == pytest.approx(y, abs=1e-7)

    def test_loss_count_must_match_analyses(self):
        with pytest.raises(ValueError):
            backward_induction(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_2)


class TestExpectedLossCurves:
    def test_stop_risk_vanishes_with_certain_positive_effect(self):
        curves = expected_loss_curves(TWO_STAGE, UNIT_PRIOR, SHARED_LOSS_2, j=1)
        top = curves.z >= 8.0
        assert np.all(curves.stop_risk[top] < 1e-8)

    def test_crossing_points_bracket_shared_observation(self):
        z_obs = 1.75
        with_extra = expected_loss_curves(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_3, j=1)
        without = expected_loss_curves(TWO_STAGE, UNIT_PRIOR, SHARED_LOSS_2, j=1)
        assert without.boundary < z_obs < with_extra.boundary

    def test_continuation_covers_enrollment_cost(self):
        curves = expected_loss_curves(THREE_STAGE, UNIT_PRIOR, SHARED_LOSS_3, j=1)
        increment = THREE_STAGE.n[1] - THREE_STAGE.n[0]
        assert np.all(curves.continue_risk >= increment - 1e-12)

    def test_curve_crossing_matches_boundary(self):
        curves = expected_loss_curves(TWO_STAGE, UNIT_PRIOR, SHARED_LOSS_2, j=1)
        gap = curves.stop_risk - curves.continue_risk
        sign_flip = np.nonzero((gap[:-1] > 0) & (gap[1:] <= 0))[0]
        z_flip = curves.z[sign_flip[-1]]
        assert abs(z_flip - curves.boundary) < 0.03

    def test_out_of_range_analysis(self):
        with pytest.raises(ValueError):
            expected_loss_curves(TWO_STAGE, UNIT_PRIOR, SHARED_LOSS_2, j=3)
