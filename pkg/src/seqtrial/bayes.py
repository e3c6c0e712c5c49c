"""Conjugate-normal Bayesian machinery: posterior updates, posterior
probability and posterior-predictive stopping thresholds, mixture-prior
hypothesis testing, the two-arm extension, and end-of-trial reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .engine import DesignSchedule
from .numerics import find_root, norm_cdf, norm_quantile

if TYPE_CHECKING:
    from .simulate import TrialRecord

__all__ = [
    "GaussianPrior",
    "MixturePrior",
    "PosteriorSummary",
    "mixture_posterior_prob",
    "posterior",
    "posterior_report",
    "pp_boundary",
    "ppos",
    "ppos_boundary",
    "two_arm_posterior",
]


@dataclass(frozen=True)
class GaussianPrior:
    """Normal prior on the treatment effect.

    ``flat=True`` is the improper infinite-variance limit; ``mu`` is then
    ignored. ``nu=0`` denotes a degenerate point mass at ``mu`` and is only
    meaningful as a data-generating distribution, never for inference.
    """

    mu: float = 0.0
    nu: float = 1.0
    flat: bool = False

    def __post_init__(self):
        if not self.flat and self.nu < 0.0:
            raise ValueError(f"prior sd must be nonnegative, got {self.nu}")

    @property
    def precision(self) -> float:
        if self.flat:
            return 0.0
        if self.nu == 0.0:
            raise ValueError("point-mass prior has no finite precision")
        return self.nu**-2

    def prob_positive(self) -> float:
        """Prior mass of the positive half-line."""
        if self.flat:
            return 0.5
        if self.nu == 0.0:
            return 1.0 if self.mu > 0 else 0.0
        return 1.0 - norm_cdf(-self.mu / self.nu)


@dataclass(frozen=True)
class PosteriorSummary:
    """Gaussian posterior report: moments, tail probability of a positive
    effect, and an equal-tailed credible interval."""

    mean: float
    sd: float
    prob_positive: float
    ci: tuple[float, float]
    ci_level: float = 0.95


def _posterior_moments(
    prior: GaussianPrior, ybar: float, n: int, sigma: float
) -> tuple[float, float]:
    data_precision = n / sigma**2
    if prior.flat:
        if n == 0:
            raise ValueError("flat prior with no data has no proper posterior")
        return ybar, 1.0 / data_precision
    if prior.nu == 0.0:
        raise ValueError("cannot update a point-mass prior")
    total = prior.precision + data_precision
    mean = (prior.mu * prior.precision + ybar * data_precision) / total
    return mean, 1.0 / total


def _summarize(mean: float, var: float, ci_level: float) -> PosteriorSummary:
    sd = math.sqrt(var)
    q = norm_quantile(0.5 + ci_level / 2.0)
    return PosteriorSummary(
        mean=mean,
        sd=sd,
        prob_positive=norm_cdf(mean / sd),
        ci=(mean - q * sd, mean + q * sd),
        ci_level=ci_level,
    )


def posterior(
    prior: GaussianPrior,
    ybar: float,
    n: int,
    sigma: float,
    ci_level: float = 0.95,
) -> PosteriorSummary:
    """Precision-weighted conjugate update from ``n`` outcomes with sample
    mean ``ybar``. With ``n=0`` the prior is returned unchanged."""
    if n < 0:
        raise ValueError(f"sample size must be nonnegative, got {n}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    mean, var = _posterior_moments(prior, ybar, n, sigma)
    return _summarize(mean, var, ci_level)


def pp_boundary(gamma: float, prior: GaussianPrior, n_j: int, sigma: float) -> float:
    """z-scale threshold equivalent to the posterior probability of a
    positive effect exceeding ``gamma``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    q = norm_quantile(gamma)
    if prior.flat:
        return q
    prec = prior.precision
    data_precision = n_j / sigma**2
    return q * math.sqrt(1.0 + prec / data_precision) - prior.mu * prec / math.sqrt(
        data_precision
    )


def _final_success_threshold(
    prior: GaussianPrior, schedule: DesignSchedule, eta: float
) -> float:
    """Smallest final sample mean for which the trial declares success,
    i.e. the posterior positive-effect probability exceeds ``1 - eta``."""
    n_K = schedule.n[-1]
    data_precision = n_K / schedule.sigma**2
    q = norm_quantile(1.0 - eta)
    if prior.flat:
        return q / math.sqrt(data_precision)
    prec = prior.precision
    return (q * math.sqrt(prec + data_precision) - prior.mu * prec) / data_precision


def ppos(
    ybar_j: float,
    j: int,
    schedule: DesignSchedule,
    prior: GaussianPrior,
    eta: float,
) -> float:
    """Predictive probability that the final analysis declares success.

    Averages the final success indicator over the Gaussian posterior
    predictive of the unobserved future sample mean.
    """
    if not 1 <= j < schedule.K:
        raise ValueError(f"interim analysis required: j={j} with K={schedule.K}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    n_j, n_K = schedule.n[j - 1], schedule.n[-1]
    sigma = schedule.sigma
    mean, var = _posterior_moments(prior, ybar_j, n_j, sigma)
    remaining = n_K - n_j
    pred_sd = math.sqrt(var + sigma**2 / remaining)
    threshold = _final_success_threshold(prior, schedule, eta)
    future_needed = (n_K * threshold - n_j * ybar_j) / remaining
    return 1.0 - norm_cdf((future_needed - mean) / pred_sd)


def ppos_boundary(
    gamma: float,
    eta: float,
    j: int,
    schedule: DesignSchedule,
    prior: GaussianPrior,
) -> float:
    """z-scale threshold at analysis ``j`` equivalent to the predictive
    success probability exceeding ``gamma``.

    At the final analysis this is the plain posterior threshold at level
    ``1 - eta``. Returns ``+inf`` (never stop) or ``-inf`` (always stop)
    when the predictive probability cannot reach ``gamma`` either way.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if not 1 <= j <= schedule.K:
        raise ValueError(f"analysis {j} outside 1..{schedule.K}")
    if j == schedule.K:
        return pp_boundary(1.0 - eta, prior, schedule.n[-1], schedule.sigma)
    n_j = schedule.n[j - 1]
    scale = schedule.sigma / math.sqrt(n_j)

    def excess(z: float) -> float:
        return ppos(z * scale, j, schedule, prior, eta) - gamma

    span = 12.0
    if excess(span) < 0.0:
        return math.inf
    if excess(-span) > 0.0:
        return -math.inf
    return find_root(excess, -span, span, tol=1e-10)


@dataclass(frozen=True)
class MixturePrior:
    """Two-component prior for one-sided hypothesis testing: a component
    supported on the nonpositive half-line with prior weight ``1 - omega``
    and a positive-half-line component with weight ``omega``. Components
    are Gaussians truncated to their half-lines."""

    omega: float
    pi0: GaussianPrior
    pi1: GaussianPrior

    def __post_init__(self):
        if not 0.0 < self.omega < 1.0:
            raise ValueError(f"omega must be in (0, 1), got {self.omega}")
        for p in (self.pi0, self.pi1):
            if p.flat or p.nu == 0.0:
                raise ValueError("mixture components must be proper Gaussians")

    @classmethod
    def from_single(cls, prior: GaussianPrior) -> "MixturePrior":
        """Split one Gaussian prior into its half-line truncations, weighted
        by the prior mass of each hypothesis."""
        return cls(omega=prior.prob_positive(), pi0=prior, pi1=prior)


def _log_norm_cdf(x: float) -> float:
    if x > -20.0:
        return math.log(norm_cdf(x))
    # asymptotic tail expansion, avoids log(0) underflow
    return -0.5 * x * x - math.log(-x) - 0.5 * math.log(2.0 * math.pi) + math.log1p(
        -1.0 / (x * x)
    )


def _log_truncated_marginal(
    prior: GaussianPrior, positive: bool, ybar: float, n: int, sigma: float
) -> float:
    """Log marginal likelihood of the sample mean under the prior truncated
    to one half-line."""
    if n == 0:
        return 0.0
    mean, var = _posterior_moments(prior, ybar, n, sigma)
    marg_sd = math.sqrt(prior.nu**2 + sigma**2 / n)
    log_marginal = (
        -0.5 * ((ybar - prior.mu) / marg_sd) ** 2
        - math.log(marg_sd)
        - 0.5 * math.log(2.0 * math.pi)
    )
    post_sd = math.sqrt(var)
    if positive:
        log_kept = _log_norm_cdf(mean / post_sd)
        log_prior_mass = _log_norm_cdf(prior.mu / prior.nu)
    else:
        log_kept = _log_norm_cdf(-mean / post_sd)
        log_prior_mass = _log_norm_cdf(-prior.mu / prior.nu)
    return log_marginal + log_kept - log_prior_mass


def mixture_posterior_prob(
    mix: MixturePrior, ybar: float, n: int, sigma: float
) -> float:
    """Posterior probability of a positive effect under the mixture prior.

    With ``n=0`` this is the prior weight ``omega``.
    """
    if n < 0:
        raise ValueError(f"sample size must be nonnegative, got {n}")
    if n == 0:
        return mix.omega
    log1 = math.log(mix.omega) + _log_truncated_marginal(mix.pi1, True, ybar, n, sigma)
    log0 = math.log1p(-mix.omega) + _log_truncated_marginal(
        mix.pi0, False, ybar, n, sigma
    )
    # overflow-safe logistic of the log odds
    d = log0 - log1
    if d <= 0.0:
        return 1.0 / (1.0 + math.exp(d))
    e = math.exp(-d)
    return e / (1.0 + e)


def two_arm_posterior(
    prior: GaussianPrior,
    ybar1: float,
    n1: int,
    sigma1: float,
    ybar0: float,
    n0: int,
    sigma0: float,
    ci_level: float = 0.95,
) -> PosteriorSummary:
    """Posterior of the between-arm mean difference under a Gaussian prior
    on the difference itself."""
    if n1 < 1 or n0 < 1:
        raise ValueError(f"both arms need data, got n1={n1}, n0={n0}")
    data_precision = 1.0 / (sigma1**2 / n1 + sigma0**2 / n0)
    if prior.flat:
        return _summarize(ybar1 - ybar0, 1.0 / data_precision, ci_level)
    total = prior.precision + data_precision
    mean = (prior.mu * prior.precision + (ybar1 - ybar0) * data_precision) / total
    return _summarize(mean, 1.0 / total, ci_level)


def posterior_report(
    trial: "TrialRecord",
    prior: GaussianPrior,
    schedule: DesignSchedule,
    alpha: float = 0.05,
) -> PosteriorSummary:
    """End-of-trial posterior given the accumulated data at the stop.

    Conditions only on the observed sample mean and size; the stopping rule
    that produced them plays no role.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return posterior(
        prior,
        trial.ybar_at_stop,
        trial.n_at_stop,
        schedule.sigma,
        ci_level=1.0 - alpha,
    )
