"""Frequentist-oriented tuning of Bayesian designs: solve for the prior
SD, constant threshold, or loss weight under which the design's type I
error at zero effect hits a target, and map arbitrary boundaries back to
per-analysis posterior thresholds.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

from .bayes import GaussianPrior, pp_boundary, ppos_boundary
from .decision import GridCoverageWarning, LossSpec, backward_induction
from .engine import BoundarySet, DesignSchedule, GridUnderflowWarning, crossing_prob
from .numerics import find_root, norm_cdf

__all__ = [
    "InfeasibleTargetError",
    "calibrate_loss",
    "calibrate_ppos",
    "calibrate_prior_sd",
    "calibrate_threshold",
    "pp_boundaries",
    "ppos_boundaries",
    "thresholds_from_boundaries",
]


class InfeasibleTargetError(ValueError):
    """No parameter value in the search range attains the target error."""


# a design already on target at the diffuse end of the search calibrates
# to the flat-prior limit rather than failing
FLAT_LIMIT_TOL = 1e-5


def pp_boundaries(
    schedule: DesignSchedule,
    prior: GaussianPrior,
    gamma: float | Sequence[float],
    n_points: int | None = None,
) -> BoundarySet:
    """Boundary set of the posterior-probability stopping rule."""
    gammas = (
        (float(gamma),) * schedule.K
        if isinstance(gamma, (int, float))
        else tuple(float(g) for g in gamma)
    )
    if len(gammas) != schedule.K:
        raise ValueError(f"expected {schedule.K} thresholds, got {len(gammas)}")
    c = tuple(
        pp_boundary(g, prior, nj, schedule.sigma) for g, nj in zip(gammas, schedule.n)
    )
    return BoundarySet(c=c, source="bayes-pp")


def ppos_boundaries(
    schedule: DesignSchedule,
    prior: GaussianPrior,
    gamma: float,
    eta: float,
) -> BoundarySet:
    """Boundary set of the predictive-probability stopping rule; the final
    analysis tests the posterior at level ``1 - eta``."""
    c = tuple(
        ppos_boundary(gamma, eta, j, schedule, prior) for j in range(1, schedule.K + 1)
    )
    return BoundarySet(c=c, source="bayes-ppos")


def _assert_monotone(
    objective: Callable[[float], float], lo: float, hi: float, label: str
) -> tuple[float, float]:
    """Check the objective decreases over the bracket and actually straddles
    zero; the calibrations below all search monotone-decreasing error curves."""
    f_lo, f_hi = objective(lo), objective(hi)
    mid = 0.5 * (lo + hi)
    f_mid = objective(mid)
    if not (f_lo >= f_mid >= f_hi):
        raise InfeasibleTargetError(
            f"{label}: objective not monotone over the search range "
            f"({f_lo:.4g}, {f_mid:.4g}, {f_hi:.4g})"
        )
    if not (f_lo >= 0.0 >= f_hi):
        raise InfeasibleTargetError(
            f"{label}: target outside the attainable range "
            f"[{f_hi:.4g}, {f_lo:.4g}] relative to it"
        )
    return f_lo, f_hi


def calibrate_prior_sd(
    schedule: DesignSchedule,
    gamma: float,
    target_alpha: float,
    n_points: int | None = None,
    nu_range: tuple[float, float] = (1e-3, 1e3),
) -> float:
    """Zero-mean prior SD at which the posterior-probability design with a
    constant threshold has type I error ``target_alpha``.

    Shrinking the prior raises every boundary, so the error is monotone in
    the SD; the search runs on its logarithm.
    """

    def alpha_of_lognu(lognu: float) -> float:
        prior = GaussianPrior(mu=0.0, nu=math.exp(lognu))
        c = pp_boundaries(schedule, prior, gamma, n_points)
        return crossing_prob(schedule, c, 0.0, n_points)

    lo, hi = math.log(nu_range[0]), math.log(nu_range[1])
    objective = lambda x: target_alpha - alpha_of_lognu(x)
    if abs(objective(hi)) <= FLAT_LIMIT_TOL:
        # already on target with an (effectively) flat prior
        return math.inf
    _assert_monotone(objective, lo, hi, "prior-sd calibration")
    return math.exp(find_root(objective, lo, hi, tol=1e-9))


def calibrate_threshold(
    schedule: DesignSchedule,
    prior: GaussianPrior,
    target_alpha: float,
    n_points: int | None = None,
    gamma_range: tuple[float, float] = (0.5, 1.0 - 1e-9),
) -> float:
    """Constant posterior threshold at which the design's type I error hits
    ``target_alpha`` for the given prior."""

    def alpha_of_gamma(g: float) -> float:
        c = pp_boundaries(schedule, prior, g, n_points)
        return crossing_prob(schedule, c, 0.0, n_points)

    lo, hi = gamma_range
    objective = lambda g: alpha_of_gamma(g) - target_alpha
    f_lo, f_hi = objective(lo), objective(hi)
    if not (f_lo >= 0.0 >= f_hi):
        raise InfeasibleTargetError(
            f"threshold calibration: target {target_alpha} outside attainable "
            f"range [{f_hi + target_alpha:.4g}, {f_lo + target_alpha:.4g}]"
        )
    return find_root(objective, lo, hi, tol=1e-10)


def calibrate_ppos(
    schedule: DesignSchedule,
    gamma: float,
    eta: float,
    target_alpha: float,
    n_points: int | None = None,
    nu_range: tuple[float, float] = (1e-3, 1e3),
) -> float:
    """Zero-mean prior SD at which the predictive-probability design has
    type I error ``target_alpha``."""

    def alpha_of_lognu(lognu: float) -> float:
        prior = GaussianPrior(mu=0.0, nu=math.exp(lognu))
        c = ppos_boundaries(schedule, prior, gamma, eta)
        return crossing_prob(schedule, c, 0.0, n_points)

    lo, hi = math.log(nu_range[0]), math.log(nu_range[1])
    objective = lambda x: target_alpha - alpha_of_lognu(x)
    if abs(objective(hi)) <= FLAT_LIMIT_TOL:
        return math.inf
    _assert_monotone(objective, lo, hi, "predictive calibration")
    return math.exp(find_root(objective, lo, hi, tol=1e-9))


def calibrate_loss(
    schedule: DesignSchedule,
    prior: GaussianPrior,
    xi0: float,
    target_alpha: float,
    n_points: int | None = None,
    xi1_range: tuple[float, float] = (1.0, 1e8),
) -> float:
    """Constant false-rejection loss at which the decision-theoretic design
    has type I error ``target_alpha``.

    Larger losses push every boundary up, so the error is monotone in the
    loss; the search runs on its logarithm.
    """

    def alpha_of_logxi(logxi: float) -> float:
        loss = LossSpec.constant(math.exp(logxi), xi0, schedule.K)
        # bracket extremes probe degenerate always/never-stop designs
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridCoverageWarning)
            warnings.simplefilter("ignore", GridUnderflowWarning)
            table = backward_induction(schedule, prior, loss)
            return crossing_prob(schedule, table.boundaries, 0.0, n_points)

    lo, hi = math.log(xi1_range[0]), math.log(xi1_range[1])
    objective = lambda x: alpha_of_logxi(x) - target_alpha
    _assert_monotone(objective, lo, hi, "loss calibration")
    return math.exp(find_root(objective, lo, hi, tol=1e-7))


def thresholds_from_boundaries(
    c: BoundarySet | Sequence[float],
    prior: GaussianPrior,
    schedule: DesignSchedule,
) -> list[float]:
    """Per-analysis posterior thresholds equivalent to the given z-scale
    boundaries; feeding the result back through the posterior-probability
    boundary map reproduces the input."""
    vals = c.c if isinstance(c, BoundarySet) else tuple(float(v) for v in c)
    if len(vals) != schedule.K:
        raise ValueError(f"expected {schedule.K} boundaries, got {len(vals)}")
    out = []
    for cj, nj in zip(vals, schedule.n):
        if prior.flat:
            out.append(norm_cdf(cj))
            continue
        prec = prior.precision
        data_precision = nj / schedule.sigma**2
        out.append(
            norm_cdf(
                (cj + prior.mu * prec / math.sqrt(data_precision))
                / math.sqrt(1.0 + prec / data_precision)
            )
        )
    return out
