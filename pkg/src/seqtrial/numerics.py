"""Scalar numerical primitives: normal distribution functions, fixed-grid
composite-Simpson quadrature, and bracketed root finding.

Everything here is pure and deterministic; all other modules build on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

__all__ = [
    "Grid",
    "NoSignChangeError",
    "RootConvergenceError",
    "find_root",
    "make_grid",
    "norm_cdf",
    "norm_pdf",
    "norm_quantile",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_cdf(x: float) -> float:
    """Standard normal CDF, accurate to better than 1e-14 over the real line."""
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x: float) -> float:
    """Standard normal density."""
    return _INV_SQRT2PI * math.exp(-0.5 * x * x)


def norm_quantile(p: float) -> float:
    """Inverse of ``norm_cdf``.

    Raises:
        ValueError: if ``p`` is not strictly inside (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must be in (0, 1), got {p}")
    return float(ndtri(p))


class NoSignChangeError(ValueError):
    """The supplied bracket does not straddle a sign change."""


class RootConvergenceError(RuntimeError):
    """Root finding hit the iteration cap before the bracket shrank to tol.

    Attributes:
        bracket: best (lo, hi) bracket found so far.
    """

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Find a root of ``f`` inside ``[lo, hi]`` by Brent's method.

    ``f(lo)`` and ``f(hi)`` must have opposite signs (zero endpoint values
    are returned directly). The result carries a bracket narrower than
    ``tol``.

    Raises:
        NoSignChangeError: if the endpoint values share a sign.
        RootConvergenceError: if ``max_iter`` iterations do not shrink the
            bracket below ``tol``; the best bracket is attached.
    """
    if not lo < hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    fa, fb = f(lo), f(hi)
    if fa == 0.0:
        return lo
    if fb == 0.0:
        return hi
    if math.copysign(1.0, fa) == math.copysign(1.0, fb):
        raise NoSignChangeError(
            f"f({lo}) = {fa} and f({hi}) = {fb} have the same sign"
        )

    a, b, fc = lo, hi, fa
    c = a
    d = e = b - a
    eps = math.ulp(1.0)
    for _ in range(max_iter):
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * eps * abs(b) + 0.5 * tol
        m = 0.5 * (c - b)
        if abs(m) <= tol1 or fb == 0.0:
            return b
        if abs(e) < tol1 or abs(fa) <= abs(fb):
            d = e = m
        else:
            s = fb / fa
            if a == c:
                # secant step
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                # inverse quadratic interpolation
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, m)
        fb = f(b)
        if (fb > 0.0) == (fc > 0.0):
            c, fc = a, fa
            d = e = b - a
    best = (min(b, c), max(b, c))
    raise RootConvergenceError(
        f"no convergence after {max_iter} iterations; best bracket {best}", best
    )


@dataclass(frozen=True)
class Grid:
    """Fixed quadrature grid with composite-Simpson weights.

    Invariants: ``points`` strictly increasing, ``weights`` positive, and
    the weights sum to ``hi - lo``.
    """

    points: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature of function values sampled on ``points``."""
        return float(np.dot(self.weights, values))


def make_grid(center: float, half_width: float, n_points: int) -> Grid:
    """Build a composite-Simpson grid over ``center +- half_width``.

    ``n_points`` must be odd and at least 3 so the panels pair up.
    """
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError(f"n_points must be odd and >= 3, got {n_points}")
    if not half_width > 0.0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    lo = center - half_width
    hi = center + half_width
    points = np.linspace(lo, hi, n_points)
    h = (hi - lo) / (n_points - 1)
    weights = np.ones(n_points)
    weights[1:-1:2] = 4.0
    weights[2:-2:2] = 2.0
    weights *= h / 3.0
    return Grid(points=points, weights=weights, lo=lo, hi=hi)


def simpson_grid(lo: float, hi: float, n_points: int) -> Grid:
    """Simpson grid over an explicit ``[lo, hi]`` interval."""
    if not hi > lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return make_grid(0.5 * (lo + hi), 0.5 * (hi - lo), n_points)
