"""Frequentist boundary families: Pocock, O'Brien-Fleming, error-spending
functions, and stochastic curtailment via conditional power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import (
    BoundarySet,
    DesignSchedule,
    crossing_prob,
    solve_spending_boundaries,
)
from .numerics import find_root, norm_cdf, norm_quantile

__all__ = [
    "SpendingFunction",
    "UnequalGroupsError",
    "conditional_power",
    "curtailment_boundary",
    "curtailment_design",
    "obrien_fleming",
    "pocock",
    "spend",
    "spending_boundaries",
    "spending_increments",
]


class UnequalGroupsError(ValueError):
    """The boundary family requires equal group sizes."""


def _require_equal_groups(schedule: DesignSchedule, family: str) -> None:
    if not schedule.equal_groups:
        raise UnequalGroupsError(
            f"{family} boundaries require equal group sizes, got n={schedule.n}; "
            f"use an error-spending design for unequal spacing"
        )


def pocock(
    schedule: DesignSchedule, alpha: float, n_points: int | None = None
) -> BoundarySet:
    """Constant boundary whose overall crossing probability at zero effect
    equals ``alpha``. Requires equal group sizes."""
    _require_equal_groups(schedule, "pocock")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    K = schedule.K

    def excess(c: float) -> float:
        return crossing_prob(schedule, (c,) * K, 0.0, n_points) - alpha

    c = find_root(excess, 0.0, 8.0, tol=1e-8)
    return BoundarySet(c=(c,) * K, source="pocock")


def obrien_fleming(
    schedule: DesignSchedule, alpha: float, n_points: int | None = None
) -> BoundarySet:
    """Decreasing boundaries proportional to ``sqrt(K / j)``, scaled so the
    overall crossing probability at zero effect equals ``alpha``."""
    _require_equal_groups(schedule, "obrien-fleming")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    K = schedule.K
    shape = tuple(math.sqrt(K / j) for j in range(1, K + 1))

    def excess(c: float) -> float:
        return crossing_prob(schedule, tuple(c * s for s in shape), 0.0, n_points) - alpha

    c = find_root(excess, 0.0, 8.0, tol=1e-8)
    return BoundarySet(c=tuple(c * s for s in shape), source="obf")


SPENDING_KINDS = ("log", "obf-like", "power")


@dataclass(frozen=True)
class SpendingFunction:
    """Cumulative type I error allocated by information fraction.

    Kinds: ``log`` spends like a Pocock design, ``obf-like`` spends like an
    O'Brien-Fleming design, ``power`` spends ``alpha * u**b``.
    """

    kind: str
    alpha: float
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in SPENDING_KINDS:
            raise ValueError(f"kind must be one of {SPENDING_KINDS}, got {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.kind == "power" and not self.b > 0.0:
            raise ValueError(f"power exponent must be positive, got {self.b}")


def spend(kind: SpendingFunction, u: float) -> float:
    """Cumulative error spent at information fraction ``u`` in [0, 1]."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"information fraction must be in [0, 1], got {u}")
    alpha = kind.alpha
    if u == 0.0:
        return 0.0
    if u == 1.0:
        return alpha
    if kind.kind == "log":
        return alpha * math.log(1.0 + (math.e - 1.0) * u)
    if kind.kind == "obf-like":
        q = norm_quantile(1.0 - alpha / 2.0)
        return 2.0 - 2.0 * norm_cdf(q / math.sqrt(u))
    return alpha * u**kind.b


def spending_increments(kind: SpendingFunction, schedule: DesignSchedule) -> tuple[float, ...]:
    """Per-analysis error increments at the schedule's information fractions."""
    n_max = schedule.n[-1]
    cum = [spend(kind, nj / n_max) for nj in schedule.n]
    return tuple(cum[0:1] + [b - a for a, b in zip(cum, cum[1:])])


def spending_boundaries(
    schedule: DesignSchedule, kind: SpendingFunction, n_points: int | None = None
) -> BoundarySet:
    """Boundaries realising the spending function on the given schedule."""
    return solve_spending_boundaries(schedule, spending_increments(kind, schedule), n_points)


def conditional_power(
    theta: float,
    ybar_j: float,
    schedule: DesignSchedule,
    j: int,
    eta: float,
) -> float:
    """Probability of rejection at the final analysis given interim data.

    The final test rejects when the last z-statistic exceeds the upper
    ``eta`` normal quantile; the probability is over the unobserved future
    outcomes at the assumed effect ``theta``.
    """
    if not 1 <= j < schedule.K:
        raise ValueError(f"interim analysis required: j={j} with K={schedule.K}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    n_j, n_K = schedule.n[j - 1], schedule.n[-1]
    sigma = schedule.sigma
    q = norm_quantile(1.0 - eta)
    remaining = n_K - n_j
    needed = (q * sigma * math.sqrt(n_K) - n_j * ybar_j) / remaining
    return 1.0 - norm_cdf((needed - theta) * math.sqrt(remaining) / sigma)


def curtailment_boundary(
    schedule: DesignSchedule, j: int, eta: float, gamma: float
) -> float:
    """z-threshold at analysis ``j`` equivalent to conditional power (at
    zero effect) exceeding ``gamma``."""
    if not 1 <= j <= schedule.K:
        raise ValueError(f"analysis {j} outside 1..{schedule.K}")
    if not 0.0 < eta < 1.0 or not 0.0 < gamma < 1.0:
        raise ValueError(f"eta and gamma must be in (0, 1), got {eta}, {gamma}")
    n_j, n_K = schedule.n[j - 1], schedule.n[-1]
    q_eta = norm_quantile(1.0 - eta)
    if n_j == n_K:
        return q_eta
    q_gamma = norm_quantile(gamma)
    return q_eta * math.sqrt(n_K / n_j) + q_gamma * math.sqrt((n_K - n_j) / n_j)


def curtailment_design(
    schedule: DesignSchedule, eta: float, gamma: float
) -> BoundarySet:
    """Early stopping when conditional power at zero effect exceeds
    ``gamma``, with the final analysis tested at level ``eta``. The overall
    type I error is bounded by ``eta / gamma`` whatever the schedule."""
    c = [curtailment_boundary(schedule, j, eta, gamma) for j in range(1, schedule.K)]
    c.append(norm_quantile(1.0 - eta))
    return BoundarySet(c=tuple(c), source="custom")
