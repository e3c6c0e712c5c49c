"""Decision-theoretic sequential design solved by backward induction.

At each interim the available actions are to reject and stop (paying a
false-rejection loss when the effect is nonpositive) or to continue
(paying one unit per newly enrolled patient plus the expected optimal loss
at the next analysis). The final analysis chooses between rejecting and
accepting, the latter paying a type II loss when the effect is positive.

The state is the current z-statistic: under a conjugate Gaussian model it
carries all the information in the accumulated data. Risks are tabulated
on a fixed z-grid per analysis; boundaries are the switch points of the
optimal action, refined by root finding on the continuous risk difference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .bayes import GaussianPrior, pp_boundary
from .engine import BoundarySet, DesignSchedule
from .numerics import find_root, make_grid

__all__ = [
    "AnalysisRisk",
    "GridCoverageWarning",
    "LossSpec",
    "RiskTable",
    "backward_induction",
    "expected_loss_curves",
    "subjective_threshold",
    "terminal_risk",
]

RISK_GRID_POINTS = 1025
RISK_GRID_HALF_WIDTH = 10.0


class GridCoverageWarning(UserWarning):
    """A decision boundary landed within one spacing of the grid edge."""


@dataclass(frozen=True)
class LossSpec:
    """Losses driving the sequential decision problem.

    ``xi1[j-1]`` is the loss of falsely rejecting at analysis ``j``,
    ``xi0`` the loss of failing to reject a positive effect at the final
    analysis, and ``patient_cost`` the per-patient enrollment loss.
    """

    xi1: tuple[float, ...]
    xi0: float
    patient_cost: float = 1.0

    def __post_init__(self):
        if len(self.xi1) < 1 or any(not v > 0.0 for v in self.xi1):
            raise ValueError(f"false-rejection losses must be positive: {self.xi1}")
        if not self.xi0 > 0.0:
            raise ValueError(f"type II loss must be positive, got {self.xi0}")
        if not self.patient_cost > 0.0:
            raise ValueError(f"patient cost must be positive, got {self.patient_cost}")
        object.__setattr__(self, "xi1", tuple(float(v) for v in self.xi1))

    @classmethod
    def constant(cls, xi1: float, xi0: float, K: int, patient_cost: float = 1.0) -> "LossSpec":
        return cls(xi1=(float(xi1),) * K, xi0=xi0, patient_cost=patient_cost)


def subjective_threshold(xi1j: float, xi0j: float) -> float:
    """Posterior-probability threshold implied by a loss pair: rejecting is
    optimal when the positive-effect probability exceeds it."""
    if not xi1j > 0.0 or not xi0j > 0.0:
        raise ValueError(f"losses must be positive, got {xi1j}, {xi0j}")
    return xi1j / (xi0j + xi1j)


@dataclass(frozen=True)
class AnalysisRisk:
    """Risk curves at one analysis on the z-grid.

    ``stop_risk`` is the expected loss of rejecting now. ``continue_risk``
    is the expected loss of the alternative: enrollment plus expected
    future optimal loss at interims, acceptance at the final analysis.
    ``reject`` flags grid points where rejecting is optimal; ``boundary``
    is the refined switch point (``+inf`` when rejecting is never optimal).
    """

    j: int
    z: np.ndarray
    stop_risk: np.ndarray
    continue_risk: np.ndarray
    bayes_risk: np.ndarray
    reject: np.ndarray
    boundary: float


@dataclass(frozen=True)
class RiskTable:
    """Backward-induction solution: per-analysis risks and boundaries."""

    schedule: DesignSchedule
    prior: GaussianPrior
    loss: LossSpec
    analyses: tuple[AnalysisRisk, ...]

    @property
    def boundaries(self) -> BoundarySet:
        return BoundarySet(
            c=tuple(a.boundary for a in self.analyses), source="decision"
        )


def _posterior_given_z(
    z: np.ndarray, n: int, prior: GaussianPrior, sigma: float
) -> tuple[np.ndarray, float]:
    """Posterior mean (per z) and variance (shared) given the z-statistic."""
    data_precision = n / sigma**2
    ybar = z * sigma / math.sqrt(n)
    if prior.flat:
        return ybar, 1.0 / data_precision
    total = prior.precision + data_precision
    mean = (prior.mu * prior.precision + ybar * data_precision) / total
    return mean, 1.0 / total


def _terminal_arrays(
    z: np.ndarray, schedule: DesignSchedule, prior: GaussianPrior, loss: LossSpec
) -> tuple[np.ndarray, np.ndarray]:
    mean, var = _posterior_given_z(z, schedule.n[-1], prior, schedule.sigma)
    sd = math.sqrt(var)
    p_nonpositive = ndtr(-mean / sd)
    reject_risk = loss.xi1[-1] * p_nonpositive
    accept_risk = loss.xi0 * (1.0 - p_nonpositive)
    return reject_risk, accept_risk


def terminal_risk(
    z_grid: Sequence[float] | np.ndarray,
    schedule: DesignSchedule,
    prior: GaussianPrior,
    loss: LossSpec,
) -> AnalysisRisk:
    """Final-analysis risks: reject versus accept, with ties kept as
    acceptances. The optimal boundary has a closed form: the posterior
    threshold at the loss ratio."""
    z = np.asarray(z_grid, dtype=float)
    reject_risk, accept_risk = _terminal_arrays(z, schedule, prior, loss)
    gamma = subjective_threshold(loss.xi1[-1], loss.xi0)
    boundary = pp_boundary(gamma, prior, schedule.n[-1], schedule.sigma)
    return AnalysisRisk(
        j=schedule.K,
        z=z,
        stop_risk=reject_risk,
        continue_risk=accept_risk,
        bayes_risk=np.minimum(reject_risk, accept_risk),
        reject=reject_risk < accept_risk,
        boundary=boundary,
    )


def _predictive_params(
    z: np.ndarray,
    schedule: DesignSchedule,
    prior: GaussianPrior,
    j: int,
) -> tuple[np.ndarray, float]:
    """Gaussian law of the next z-statistic given the current one, with the
    effect integrated out of its posterior."""
    n_j, n_next = schedule.n[j - 1], schedule.n[j]
    sigma = schedule.sigma
    dn = n_next - n_j
    mean, var = _posterior_given_z(z, n_j, prior, sigma)
    pred_mean = (z * math.sqrt(n_j) + dn * mean / sigma) / math.sqrt(n_next)
    pred_var = (dn + dn**2 * var / sigma**2) / n_next
    return pred_mean, math.sqrt(pred_var)


def _continue_risk(
    z: np.ndarray,
    schedule: DesignSchedule,
    prior: GaussianPrior,
    loss: LossSpec,
    j: int,
    next_risk: AnalysisRisk,
    weights: np.ndarray,
) -> np.ndarray:
    """Enrollment cost to the next analysis plus the expected optimal loss
    there, integrated against the predictive law of the next z-statistic.
    Mass beyond the grid is attributed to the edge risk values."""
    dn = schedule.n[j] - schedule.n[j - 1]
    pred_mean, pred_sd = _predictive_params(z, schedule, prior, j)
    zg = next_risk.z
    arg = (zg[None, :] - pred_mean[:, None]) / pred_sd
    kernel = np.exp(-0.5 * arg * arg) / (pred_sd * math.sqrt(2.0 * math.pi))
    expected = kernel @ (weights * next_risk.bayes_risk)
    lo_tail = ndtr((zg[0] - pred_mean) / pred_sd)
    hi_tail = ndtr(-(zg[-1] - pred_mean) / pred_sd)
    expected += next_risk.bayes_risk[0] * lo_tail + next_risk.bayes_risk[-1] * hi_tail
    return loss.patient_cost * dn + expected


def _switch_point(
    z: np.ndarray,
    diff: np.ndarray,
    refine,
) -> float:
    """Largest crossing of the stop-continue risk difference from positive
    to nonpositive; rejecting is optimal above it."""
    sign_change = (diff[:-1] > 0.0) & (diff[1:] <= 0.0)
    idx = np.nonzero(sign_change)[0]
    if len(idx) == 0:
        if diff[-1] > 0.0:
            return math.inf
        warnings.warn(
            "rejecting is optimal across the whole risk grid",
            GridCoverageWarning,
            stacklevel=3,
        )
        return float(z[0])
    i = int(idx[-1])
    if i == 0 or i >= len(z) - 2:
        warnings.warn(
            f"decision boundary near the risk-grid edge at z={z[i]:.3f}",
            GridCoverageWarning,
            stacklevel=3,
        )
    return refine(z[i], z[i + 1])


def backward_induction(
    schedule: DesignSchedule,
    prior: GaussianPrior,
    loss: LossSpec,
    n_points: int = RISK_GRID_POINTS,
    half_width: float = RISK_GRID_HALF_WIDTH,
) -> RiskTable:
    """Solve the optimal stopping problem from the final analysis backward.

    Returns the per-analysis risk curves and the z-boundaries above which
    rejecting beats continuing; ties resolve to continuing.
    """
    if len(loss.xi1) != schedule.K:
        raise ValueError(
            f"need one false-rejection loss per analysis: got {len(loss.xi1)} "
            f"for K={schedule.K}"
        )
    grid = make_grid(0.0, half_width, n_points)
    z = grid.points
    analyses: list[AnalysisRisk] = [terminal_risk(z, schedule, prior, loss)]
    for j in range(schedule.K - 1, 0, -1):
        mean, var = _posterior_given_z(z, schedule.n[j - 1], prior, schedule.sigma)
        sd = math.sqrt(var)
        stop_risk = loss.xi1[j - 1] * ndtr(-mean / sd)
        next_risk = analyses[-1]
        cont_risk = _continue_risk(z, schedule, prior, loss, j, next_risk, grid.weights)
        diff = stop_risk - cont_risk

        def risk_gap(zv: float, _j=j, _next=next_risk) -> float:
            zz = np.array([zv])
            m, v = _posterior_given_z(zz, schedule.n[_j - 1], prior, schedule.sigma)
            srisk = loss.xi1[_j - 1] * float(ndtr(-m / math.sqrt(v))[0])
            crisk = float(
                _continue_risk(zz, schedule, prior, loss, _j, _next, grid.weights)[0]
            )
            return srisk - crisk

        boundary = _switch_point(
            z, diff, lambda a, b: find_root(risk_gap, a, b, tol=1e-9)
        )
        analyses.append(
            AnalysisRisk(
                j=j,
                z=z,
                stop_risk=stop_risk,
                continue_risk=cont_risk,
                bayes_risk=np.minimum(stop_risk, cont_risk),
                reject=stop_risk < cont_risk,
                boundary=boundary,
            )
        )
    analyses.reverse()
    return RiskTable(schedule=schedule, prior=prior, loss=loss, analyses=tuple(analyses))


def expected_loss_curves(
    schedule: DesignSchedule,
    prior: GaussianPrior,
    loss: LossSpec,
    j: int,
    n_points: int = RISK_GRID_POINTS,
    half_width: float = RISK_GRID_HALF_WIDTH,
) -> AnalysisRisk:
    """Risk curves at analysis ``j``, suitable for plotting or CSV export.

    At interims the curves are (reject now) versus (continue); at the
    final analysis they are (reject) versus (accept). Their crossing point
    is the backward-induction boundary.
    """
    if not 1 <= j <= schedule.K:
        raise ValueError(f"analysis {j} outside 1..{schedule.K}")
    table = backward_induction(schedule, prior, loss, n_points, half_width)
    return table.analyses[j - 1]
