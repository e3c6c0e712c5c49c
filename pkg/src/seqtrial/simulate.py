"""Seeded Monte Carlo engine for operating characteristics of Bayesian
sequential designs: false discovery rate, false positive rate, and
credible-interval coverage over a population of simulated trials.

Each trial draws its own counter-based random substream keyed by the
scenario seed and the trial index, so results are bit-identical for a
given seed no matter how many workers execute the trials. Outcomes are
simulated through the per-group sufficient statistics, keeping the cost
per trial linear in the number of analyses rather than patients.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .bayes import GaussianPrior, PosteriorSummary, posterior
from .calibrate import pp_boundaries
from .engine import DesignSchedule
from .numerics import norm_quantile

__all__ = [
    "OCReport",
    "Scenario",
    "TrialRecord",
    "estimate_oc",
    "run_scenario",
    "scenario_grid",
    "universal_bound_check",
]


@dataclass(frozen=True)
class Scenario:
    """One simulation configuration.

    ``gen_prior`` generates the true effects (its SD may be zero for a
    fixed-effect scenario); ``analysis_prior`` is what the design uses for
    inference. ``gamma`` is the constant posterior threshold, or one value
    per analysis.
    """

    gen_prior: GaussianPrior
    analysis_prior: GaussianPrior
    schedule: DesignSchedule
    gamma: float | tuple[float, ...]
    n_trials: int
    seed: int
    ci_level: float = 0.95

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError(f"need at least one trial, got {self.n_trials}")
        if self.analysis_prior.nu == 0.0 and not self.analysis_prior.flat:
            raise ValueError("analysis prior must have positive variance")

    def thresholds(self) -> tuple[float, ...]:
        if isinstance(self.gamma, tuple):
            if len(self.gamma) != self.schedule.K:
                raise ValueError(
                    f"expected {self.schedule.K} thresholds, got {len(self.gamma)}"
                )
            return self.gamma
        return (float(self.gamma),) * self.schedule.K


@dataclass(frozen=True)
class TrialRecord:
    """Endpoint data of one simulated trial."""

    theta_true: float
    stop_analysis: int
    z_at_stop: float
    rejected: bool
    n_at_stop: int
    ybar_at_stop: float
    posterior: PosteriorSummary
    ci_covers: bool


@dataclass(frozen=True)
class OCReport:
    """Aggregated operating characteristics with Monte Carlo errors.

    ``fdr`` is None when no trial rejected, ``fpr`` is None when no trial
    had a nonpositive effect; both are proportions in [0, 1].
    """

    n_trials: int
    rejection_count: int
    null_count: int
    false_rejection_count: int
    fdr: float | None
    fpr: float | None
    coverage: float
    fdr_se: float | None
    fpr_se: float | None
    coverage_se: float


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based substream for one trial, independent of worker layout."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def _draw_effect(gen: GaussianPrior, rng: np.random.Generator) -> float:
    if gen.flat:
        raise ValueError("cannot generate effects from a flat prior")
    if gen.nu == 0.0:
        return gen.mu
    return rng.normal(gen.mu, gen.nu)


def _simulate_trial(sc: Scenario, boundaries: tuple[float, ...], index: int) -> TrialRecord:
    rng = _trial_rng(sc.seed, index)
    theta = _draw_effect(sc.gen_prior, rng)
    schedule = sc.schedule
    n = np.asarray(schedule.n, dtype=float)
    dn = np.diff(n, prepend=0.0)
    shocks = rng.standard_normal(schedule.K)
    sums = np.cumsum(dn * theta + schedule.sigma * np.sqrt(dn) * shocks)
    z = sums / (schedule.sigma * np.sqrt(n))

    crossed = np.nonzero(z > np.asarray(boundaries))[0]
    if len(crossed):
        t = int(crossed[0]) + 1
        rejected = True
    else:
        t = schedule.K
        rejected = False
    n_stop = schedule.n[t - 1]
    ybar = float(sums[t - 1]) / n_stop
    summary = posterior(sc.analysis_prior, ybar, n_stop, schedule.sigma, sc.ci_level)
    covers = summary.ci[0] < theta < summary.ci[1]
    return TrialRecord(
        theta_true=theta,
        stop_analysis=t,
        z_at_stop=float(z[t - 1]),
        rejected=rejected,
        n_at_stop=n_stop,
        ybar_at_stop=ybar,
        posterior=summary,
        ci_covers=covers,
    )


def _run_chunk(sc: Scenario, boundaries: tuple[float, ...], indices: Sequence[int]) -> list[TrialRecord]:
    return [_simulate_trial(sc, boundaries, i) for i in indices]


def run_scenario(sc: Scenario, workers: int = 1) -> list[TrialRecord]:
    """Simulate all trials of a scenario; deterministic in the seed and
    independent of ``workers``."""
    boundaries = pp_boundaries(sc.schedule, sc.analysis_prior, sc.thresholds()).c
    if workers <= 1:
        return _run_chunk(sc, boundaries, range(sc.n_trials))
    chunks = [
        list(c)
        for c in np.array_split(np.arange(sc.n_trials), workers * 4)
        if len(c)
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(
            _run_chunk, [sc] * len(chunks), [boundaries] * len(chunks), chunks
        )
        out: list[TrialRecord] = []
        for part in parts:
            out.extend(part)
    return out


def _proportion_se(p: float, denom: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / denom)


def estimate_oc(records: Sequence[TrialRecord]) -> OCReport:
    """False discovery rate, false positive rate, and coverage from a batch
    of trial records. Empty denominators yield None, not an error."""
    if not records:
        raise ValueError("no trial records to aggregate")
    S = len(records)
    rejections = sum(r.rejected for r in records)
    nulls = sum(r.theta_true <= 0.0 for r in records)
    false_rej = sum(r.rejected and r.theta_true <= 0.0 for r in records)
    covered = sum(r.ci_covers for r in records)

    fdr = false_rej / rejections if rejections else None
    fpr = false_rej / nulls if nulls else None
    coverage = covered / S
    return OCReport(
        n_trials=S,
        rejection_count=rejections,
        null_count=nulls,
        false_rejection_count=false_rej,
        fdr=fdr,
        fpr=fpr,
        coverage=coverage,
        fdr_se=_proportion_se(fdr, rejections) if fdr is not None else None,
        fpr_se=_proportion_se(fpr, nulls) if fpr is not None else None,
        coverage_se=_proportion_se(coverage, S),
    )


def scenario_grid(
    base: Scenario,
    nu0_list: Iterable[float],
    nu_list: Iterable[float],
    K_list: Iterable[int],
    workers: int = 1,
) -> list[tuple[float, float, int, OCReport]]:
    """Cross the generating SD, the analysis SD, and the analysis count,
    rerunning the base scenario in each cell. Rows come out grouped by
    generating SD, then analysis SD, then analysis count."""
    n_max = base.schedule.n[-1]
    rows = []
    for nu0 in nu0_list:
        for nu in nu_list:
            for K in K_list:
                sc = replace(
                    base,
                    gen_prior=GaussianPrior(mu=base.gen_prior.mu, nu=nu0),
                    analysis_prior=GaussianPrior(mu=base.analysis_prior.mu, nu=nu),
                    schedule=DesignSchedule.equal(K, n_max, base.schedule.sigma),
                )
                rows.append((nu0, nu, K, estimate_oc(run_scenario(sc, workers))))
    return rows


def universal_bound_check(
    prior: GaussianPrior,
    gamma: float | tuple[float, ...],
    schedule: DesignSchedule,
    n_trials: int,
    seed: int,
) -> tuple[bool, float, float, float]:
    """Empirical check of the false-positive bound under a matched model.

    Effects are drawn from the prior conditioned on the nonpositive
    half-line; the fraction of trials ever crossing a threshold must stay
    below ``(1 - gamma_min) P(effect > 0) / (gamma_min P(effect <= 0))``
    plus three Monte Carlo standard errors.

    Returns (within_bound, margin, empirical_rate, bound).
    """
    if prior.flat or prior.nu == 0.0:
        raise ValueError("the bound needs a proper generating prior")
    gammas = (gamma,) * schedule.K if isinstance(gamma, (int, float)) else gamma
    gamma_min = min(gammas)
    p_pos = prior.prob_positive()
    bound = (1.0 - gamma_min) * p_pos / (gamma_min * (1.0 - p_pos))

    boundaries = pp_boundaries(schedule, prior, gammas).c
    null_mass = 1.0 - p_pos

    def null_scenario_trial(index: int) -> bool:
        rng = _trial_rng(seed, index)
        # inverse-CDF draw from the prior truncated to the nonpositive line
        u = max(rng.uniform(), 1e-15)
        theta = prior.mu + prior.nu * norm_quantile(u * null_mass)
        schedule_n = np.asarray(schedule.n, dtype=float)
        dn = np.diff(schedule_n, prepend=0.0)
        shocks = rng.standard_normal(schedule.K)
        sums = np.cumsum(dn * theta + schedule.sigma * np.sqrt(dn) * shocks)
        z = sums / (schedule.sigma * np.sqrt(schedule_n))
        return bool(np.any(z > np.asarray(boundaries)))

    hits = sum(null_scenario_trial(i) for i in range(n_trials))
    rate = hits / n_trials
    se = _proportion_se(rate, n_trials)
    margin = bound + 3.0 * se - rate
    return margin >= 0.0, margin, rate, bound
