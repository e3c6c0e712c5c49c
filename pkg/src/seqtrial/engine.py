"""Markov recursion over interim z-statistics of a group-sequential trial.

A trial observing Gaussian outcomes is monitored at cumulative sample sizes
``n_1 < ... < n_K``; at analysis ``j`` the trial stops when the z-statistic
exceeds the boundary ``c_j``. The joint law of the stopping analysis and the
z-value at the stop is computed by propagating the sub-density of the
z-statistic restricted to the continuation regions:

    f(1, z) = phi(z - theta * sqrt(n_1) / sigma)
    f(t, z) = integral over u <= c_{t-1} of f(t-1, u) * k_t(z, u) du

where ``k_t`` is the Gaussian transition kernel of consecutive z-statistics.
Crossing probabilities, error-spending boundaries, the stopping-time
density, and stage-wise confidence intervals all derive from it.

Sub-densities store their grid values together with the quadrature source
terms of the previous analysis, so they can be evaluated exactly at
arbitrary points; truncation cutoffs never need to sit on a grid node.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .numerics import Grid, find_root, make_grid, norm_cdf, norm_quantile, simpson_grid

__all__ = [
    "BoundarySet",
    "DesignSchedule",
    "GridUnderflowWarning",
    "InfeasibleSpendError",
    "StagewiseExceedance",
    "StoppingDensity",
    "SubDensity",
    "UnattainableOutcomeError",
    "crossing_prob",
    "default_grid_points",
    "exceedance_prob",
    "initial_subdensity",
    "mle_at_stop",
    "propagate",
    "solve_spending_boundaries",
    "stagewise_ci",
    "stopping_density",
]

GRID_HALF_WIDTH = 8.0
DEFAULT_GRID_POINTS = 513
MAX_GRID_POINTS = 4097
MASS_FLOOR = 1e-12


class GridUnderflowWarning(UserWarning):
    """Truncation left less mass than the numerical floor; downstream
    quantities are reported as zero."""


class InfeasibleSpendError(ValueError):
    """A requested error increment exceeds the available continuation mass."""


class UnattainableOutcomeError(ValueError):
    """The observed (analysis, z) pair cannot occur under the design."""


@dataclass(frozen=True)
class DesignSchedule:
    """Analysis schedule: cumulative sample sizes and the outcome SD.

    ``n`` must be strictly increasing positive integers; the number of
    analyses is ``len(n)``.
    """

    n: tuple[int, ...]
    sigma: float = 1.0

    def __post_init__(self):
        if len(self.n) < 1:
            raise ValueError("schedule needs at least one analysis")
        if any(int(v) != v or v <= 0 for v in self.n):
            raise ValueError(f"sample sizes must be positive integers: {self.n}")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ValueError(f"sample sizes must be strictly increasing: {self.n}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))

    @property
    def K(self) -> int:
        return len(self.n)

    @property
    def equal_groups(self) -> bool:
        g = self.n[0]
        return all(v == g * (j + 1) for j, v in enumerate(self.n))

    @classmethod
    def equal(cls, K: int, n_max: int, sigma: float = 1.0) -> "DesignSchedule":
        """Equal group sizes: ``n_j = j * n_max / K`` (must divide evenly)."""
        if n_max % K != 0:
            raise ValueError(f"n_max={n_max} not divisible by K={K}")
        g = n_max // K
        return cls(n=tuple(g * (j + 1) for j in range(K)), sigma=sigma)

    def drift(self, theta: float, j: int) -> float:
        """Mean of the z-statistic at analysis ``j`` (1-based) under ``theta``."""
        return theta * math.sqrt(self.n[j - 1]) / self.sigma


BOUNDARY_SOURCES = ("pocock", "obf", "spending", "bayes-pp", "bayes-ppos", "decision", "custom")


@dataclass(frozen=True)
class BoundarySet:
    """Per-analysis z-scale efficacy thresholds with a provenance label.

    ``+inf`` entries disable efficacy stopping at that analysis.
    """

    c: tuple[float, ...]
    source: str = "custom"

    def __post_init__(self):
        if self.source not in BOUNDARY_SOURCES:
            raise ValueError(f"unknown boundary source {self.source!r}")
        for v in self.c:
            if math.isnan(v) or v == -math.inf:
                raise ValueError(f"boundaries must be finite or +inf: {self.c}")
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))

    def __len__(self) -> int:
        return len(self.c)

    def __getitem__(self, i: int) -> float:
        return self.c[i]


def _as_boundaries(c: "BoundarySet | Sequence[float]", K: int) -> tuple[float, ...]:
    vals = c.c if isinstance(c, BoundarySet) else tuple(float(v) for v in c)
    if len(vals) != K:
        raise ValueError(f"expected {K} boundaries, got {len(vals)}")
    return vals


def default_grid_points(schedule: DesignSchedule) -> int:
    """Grid size policy: 513 points unless the increment kernels are too
    narrow for the spacing, in which case the grid doubles (up to a cap).

    The Simpson sum of a Gaussian kernel of width ``s`` sampled at spacing
    ``h`` is spectrally accurate for ``h <= s / 2``; the narrowest kernel
    across transitions sets the requirement.
    """
    n = schedule.n
    if len(n) == 1:
        return DEFAULT_GRID_POINTS
    s_min = min(
        math.sqrt(n[j] - n[j - 1]) / math.sqrt(n[j - 1]) for j in range(1, len(n))
    )
    points = DEFAULT_GRID_POINTS
    while (2.0 * GRID_HALF_WIDTH) / (points - 1) > s_min / 2.0:
        if points >= MAX_GRID_POINTS:
            warnings.warn(
                f"grid capped at {MAX_GRID_POINTS} points; increment kernels "
                f"narrower than the spacing may lose accuracy",
                GridUnderflowWarning,
                stacklevel=2,
            )
            break
        points = 2 * (points - 1) + 1
    return points


@dataclass(frozen=True)
class SubDensity:
    """Sub-density of the z-statistic at one analysis, joint with the event
    that no earlier boundary was crossed.

    ``values`` hold the density on ``grid``; ``density_at`` and
    ``tail_mass`` evaluate it exactly anywhere via the stored quadrature
    source of the previous analysis.
    """

    j: int
    grid: Grid
    values: np.ndarray
    theta: float
    _eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _tail: Callable[[float], float] = field(repr=False)

    def mass(self) -> float:
        """Probability of reaching analysis ``j`` without stopping."""
        return self.grid.integrate(self.values)

    def density_at(self, z: np.ndarray) -> np.ndarray:
        """Pointwise sub-density at arbitrary z-values."""
        return self._eval(np.asarray(z, dtype=float))

    def tail_mass(self, c: float) -> float:
        """Probability of reaching analysis ``j`` and observing z > ``c``."""
        if c == math.inf:
            return 0.0
        return max(self._tail(c), 0.0)


def _zero_subdensity(j: int, schedule: DesignSchedule, theta: float, n_points: int) -> SubDensity:
    grid = make_grid(schedule.drift(theta, j), GRID_HALF_WIDTH, n_points)
    zero = np.zeros(n_points)
    return SubDensity(
        j=j,
        grid=grid,
        values=zero,
        theta=theta,
        _eval=lambda z: np.zeros_like(z),
        _tail=lambda c: 0.0,
    )


def initial_subdensity(
    schedule: DesignSchedule, theta: float, n_points: int | None = None
) -> SubDensity:
    """Density of the first-analysis z-statistic: standard normal around
    the drift ``theta * sqrt(n_1) / sigma``."""
    if n_points is None:
        n_points = default_grid_points(schedule)
    center = schedule.drift(theta, 1)
    grid = make_grid(center, GRID_HALF_WIDTH, n_points)

    def evaluate(z: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * (z - center) ** 2) / math.sqrt(2.0 * math.pi)

    return SubDensity(
        j=1,
        grid=grid,
        values=evaluate(grid.points),
        theta=theta,
        _eval=evaluate,
        _tail=lambda c: 1.0 - norm_cdf(c - center),
    )


def propagate(
    sub: SubDensity,
    schedule: DesignSchedule,
    c_prev: float,
    theta: float | None = None,
) -> SubDensity:
    """Advance the sub-density one analysis: truncate at the continuation
    cutoff ``c_prev`` and convolve with the Gaussian increment kernel.

    The returned mass equals the input mass minus the stopping probability
    at the input analysis. Emits ``GridUnderflowWarning`` and returns a
    zero density when truncation leaves mass below the numerical floor.
    """
    if theta is None:
        theta = sub.theta
    elif theta != sub.theta:
        raise ValueError(f"theta mismatch: sub-density built at {sub.theta}, got {theta}")
    j = sub.j + 1
    if j > schedule.K:
        raise ValueError(f"cannot propagate beyond the final analysis {schedule.K}")
    n_prev, n_j = schedule.n[j - 2], schedule.n[j - 1]
    n_points = len(sub.grid.points)

    hi = min(c_prev, sub.grid.hi)
    if hi <= sub.grid.lo or sub.mass() < MASS_FLOOR:
        warnings.warn(
            f"continuation mass vanished before analysis {j}",
            GridUnderflowWarning,
            stacklevel=2,
        )
        return _zero_subdensity(j, schedule, theta, n_points)
    cont = simpson_grid(sub.grid.lo, hi, n_points)
    source = cont.weights * sub.density_at(cont.points)
    if float(np.sum(source)) < MASS_FLOOR:
        warnings.warn(
            f"continuation mass below {MASS_FLOOR} at analysis {j}",
            GridUnderflowWarning,
            stacklevel=2,
        )
        return _zero_subdensity(j, schedule, theta, n_points)

    dn = n_j - n_prev
    sq_nj, sq_np, sq_dn = math.sqrt(n_j), math.sqrt(n_prev), math.sqrt(dn)
    shift = dn * theta / schedule.sigma
    u_scaled = cont.points * sq_np + shift

    def evaluate(z: np.ndarray) -> np.ndarray:
        arg = (np.atleast_1d(z)[:, None] * sq_nj - u_scaled[None, :]) / sq_dn
        kern = np.exp(-0.5 * arg * arg) * (sq_nj / (sq_dn * math.sqrt(2.0 * math.pi)))
        out = kern @ source
        return out if np.ndim(z) else out[0]

    def tail(c: float) -> float:
        arg = (c * sq_nj - u_scaled) / sq_dn
        return float(np.dot(source, ndtr(-arg)))

    grid = make_grid(schedule.drift(theta, j), GRID_HALF_WIDTH, n_points)
    return SubDensity(
        j=j,
        grid=grid,
        values=evaluate(grid.points),
        theta=theta,
        _eval=evaluate,
        _tail=tail,
    )


def _sweep(
    schedule: DesignSchedule,
    c: tuple[float, ...],
    theta: float,
    n_points: int | None,
) -> tuple[list[float], list[SubDensity]]:
    """Stop masses and sub-densities at every analysis for fixed boundaries."""
    sub = initial_subdensity(schedule, theta, n_points)
    masses, subs = [], []
    for j in range(1, schedule.K + 1):
        if j > 1:
            sub = propagate(sub, schedule, c[j - 2])
        subs.append(sub)
        masses.append(sub.tail_mass(c[j - 1]))
    return masses, subs


def crossing_prob(
    schedule: DesignSchedule,
    c: BoundarySet | Sequence[float],
    theta: float,
    n_points: int | None = None,
) -> float:
    """Probability that the z-statistic exceeds its boundary at any analysis."""
    bounds = _as_boundaries(c, schedule.K)
    masses, _ = _sweep(schedule, bounds, theta, n_points)
    return min(sum(masses), 1.0)


def solve_spending_boundaries(
    schedule: DesignSchedule,
    kappa: Sequence[float],
    n_points: int | None = None,
) -> BoundarySet:
    """Boundaries that spend exactly ``kappa_j`` type I error at analysis j.

    Solved successively: at each analysis the boundary is the root making
    the incremental stopping mass under ``theta = 0`` equal ``kappa_j``.

    Raises:
        InfeasibleSpendError: if an increment exceeds the remaining
            continuation mass.
    """
    kappas = [float(k) for k in kappa]
    if len(kappas) != schedule.K:
        raise ValueError(f"expected {schedule.K} increments, got {len(kappas)}")
    if any(k <= 0.0 for k in kappas):
        raise ValueError(f"spending increments must be positive: {kappas}")
    if sum(kappas) >= 1.0:
        raise InfeasibleSpendError(
            f"total spend {sum(kappas)} exceeds the unit probability mass"
        )

    bounds: list[float] = []
    sub = initial_subdensity(schedule, 0.0, n_points)
    for j in range(1, schedule.K + 1):
        if j > 1:
            sub = propagate(sub, schedule, bounds[-1])
        available = sub.mass()
        if kappas[j - 1] >= available:
            raise InfeasibleSpendError(
                f"increment {kappas[j - 1]} at analysis {j} exceeds remaining "
                f"continuation mass {available:.6g}"
            )
        if j == 1:
            cj = norm_quantile(1.0 - kappas[0]) + schedule.drift(0.0, 1)
        else:
            lo, hi = sub.grid.lo, sub.grid.hi
            cj = find_root(lambda x: sub.tail_mass(x) - kappas[j - 1], lo, hi, tol=1e-10)
        bounds.append(cj)
    return BoundarySet(c=tuple(bounds), source="spending")


@dataclass(frozen=True)
class StoppingDensity:
    """Joint law of (stopping analysis, z at stop) under one design.

    ``stop_prob[j-1]`` is the rejection mass at analysis j; ``tail_grid``
    and ``tail_values`` restrict the density to the rejection region. The
    final analysis also carries the full (unrestricted) density, since the
    trial terminates there either way.
    """

    schedule: DesignSchedule
    boundaries: tuple[float, ...]
    theta: float
    stop_prob: tuple[float, ...]
    tail_grid: tuple[Grid | None, ...]
    tail_values: tuple[np.ndarray | None, ...]
    final_grid: Grid
    final_values: np.ndarray

    def total_mass(self) -> float:
        """Mass over all outcomes; equals 1 up to quadrature error."""
        reject_before_final = sum(self.stop_prob[:-1])
        return reject_before_final + self.final_grid.integrate(self.final_values)


def stopping_density(
    schedule: DesignSchedule,
    c: BoundarySet | Sequence[float],
    theta: float,
    n_points: int | None = None,
) -> StoppingDensity:
    """Per-analysis stopping probabilities and restricted z-densities."""
    bounds = _as_boundaries(c, schedule.K)
    masses, subs = _sweep(schedule, bounds, theta, n_points)
    points = len(subs[0].grid.points)

    grids: list[Grid | None] = []
    vals: list[np.ndarray | None] = []
    for j, sub in enumerate(subs, start=1):
        cj = bounds[j - 1]
        if cj >= sub.grid.hi or masses[j - 1] <= 0.0:
            grids.append(None)
            vals.append(None)
            continue
        tail = simpson_grid(max(cj, sub.grid.lo), sub.grid.hi, points)
        grids.append(tail)
        vals.append(sub.density_at(tail.points))
    final = subs[-1]
    return StoppingDensity(
        schedule=schedule,
        boundaries=bounds,
        theta=theta,
        stop_prob=tuple(masses),
        tail_grid=tuple(grids),
        tail_values=tuple(vals),
        final_grid=final.grid,
        final_values=final.values.copy(),
    )


def _check_attainable(
    schedule: DesignSchedule, bounds: tuple[float, ...], t: int, z_t: float
) -> None:
    if not 1 <= t <= schedule.K:
        raise UnattainableOutcomeError(f"analysis {t} outside 1..{schedule.K}")
    if t < schedule.K and z_t <= bounds[t - 1]:
        raise UnattainableOutcomeError(
            f"z={z_t} at analysis {t} does not cross the boundary {bounds[t - 1]}"
        )


class StagewiseExceedance:
    """Stage-wise 'outcome above' probabilities at one fixed effect.

    Runs the recursion once; each query then costs a single quadrature
    pass, which matters when scoring many observed outcomes (for example
    coverage studies)."""

    def __init__(
        self,
        schedule: DesignSchedule,
        c: BoundarySet | Sequence[float],
        theta: float,
        n_points: int | None = None,
    ):
        self.schedule = schedule
        self.bounds = _as_boundaries(c, schedule.K)
        self.theta = theta
        masses, subs = _sweep(schedule, self.bounds, theta, n_points)
        self._subs = subs
        self._stopped_before = [0.0]
        for m in masses[:-1]:
            self._stopped_before.append(self._stopped_before[-1] + m)

    def prob(self, t: int, z_t: float) -> float:
        """P(stop earlier than ``t``, or at ``t`` with a larger z)."""
        _check_attainable(self.schedule, self.bounds, t, z_t)
        total = self._stopped_before[t - 1] + self._subs[t - 1].tail_mass(z_t)
        return min(total, 1.0)


def exceedance_prob(
    schedule: DesignSchedule,
    c: BoundarySet | Sequence[float],
    observed: tuple[int, float],
    theta: float,
    n_points: int | None = None,
) -> float:
    """Probability of an outcome above ``observed`` in the stage-wise order.

    An outcome ranks above ``(t, z_t)`` when it stops at an earlier
    analysis, or at the same analysis with a larger z-value. The result is
    continuous and increasing in ``theta``.
    """
    t, z_t = observed
    bounds = _as_boundaries(c, schedule.K)
    _check_attainable(schedule, bounds, t, z_t)
    sub = initial_subdensity(schedule, theta, n_points)
    total = 0.0
    for j in range(1, t + 1):
        if j > 1:
            sub = propagate(sub, schedule, bounds[j - 2])
        if j < t:
            total += sub.tail_mass(bounds[j - 1])
        else:
            total += sub.tail_mass(z_t)
    return min(total, 1.0)


def stagewise_ci(
    schedule: DesignSchedule,
    c: BoundarySet | Sequence[float],
    observed: tuple[int, float],
    alpha: float = 0.05,
    n_points: int | None = None,
) -> tuple[float, float]:
    """Confidence interval for the effect after a sequential stop, based on
    the stage-wise ordering of the sample space.

    The endpoints solve, in ``theta``, for exceedance probabilities
    ``alpha/2`` and ``1 - alpha/2``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    t, z_t = observed
    bounds = _as_boundaries(c, schedule.K)
    _check_attainable(schedule, bounds, t, z_t)

    def prob(theta: float) -> float:
        # extreme probes during bracketing can drain the continuation mass
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridUnderflowWarning)
            return exceedance_prob(schedule, bounds, observed, theta, n_points)

    # p(theta) climbs from 0 to 1; the scale of theta is sigma/sqrt(n_1)
    scale = schedule.sigma / math.sqrt(schedule.n[0])
    center = mle_at_stop(observed, schedule)
    span = (abs(z_t) + 10.0) * scale

    def solve(target: float) -> float:
        lo, hi = center - span, center + span
        while prob(lo) > target:
            lo -= span
        while prob(hi) < target:
            hi += span
        return find_root(lambda th: prob(th) - target, lo, hi, tol=1e-8 * scale)

    lower = solve(alpha / 2.0)
    upper = solve(1.0 - alpha / 2.0)
    return lower, upper


def mle_at_stop(observed: tuple[int, float], schedule: DesignSchedule) -> float:
    """Sample-mean estimate of the effect at the stopping analysis."""
    t, z_t = observed
    if not 1 <= t <= schedule.K:
        raise UnattainableOutcomeError(f"analysis {t} outside 1..{schedule.K}")
    return z_t * schedule.sigma / math.sqrt(schedule.n[t - 1])
