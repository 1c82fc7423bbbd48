"""Score-inversion confidence sets for the binomial-count family.

Curve grids of the standardized score and of twice the log-likelihood
ratio, z-standard intervals by bracketed bisection, vertical-slice
distributions, and exact tail-based endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import bisect
from scipy.stats import binom

from .families import ModelFamily

DEFAULT_GRID = np.linspace(1e-4, 1.0 - 1e-4, 512)
BISECT_TOL = 1e-12


@dataclass(frozen=True)
class CurveGrid:
    """Per-outcome curves of a statistic over a parameter grid."""

    parameter_grid: np.ndarray  # strictly increasing, interior
    values: np.ndarray  # (outcomes, grid)
    realized_row: Optional[int] = None
    kind: str = "score"

    def __post_init__(self):
        if np.any(np.diff(self.parameter_grid) <= 0):
            raise ValueError("parameter grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")


@dataclass(frozen=True)
class IntervalResult:
    """Confidence set endpoints with open/closed and boundary markers."""

    lower: float
    upper: float
    closed_lower: bool = True
    closed_upper: bool = True
    z: float = float("nan")
    side: str = "two-sided"
    boundary_note: Optional[str] = None
    empty: bool = False

    def __post_init__(self):
        if not self.empty and self.lower > self.upper:
            raise ValueError("interval endpoints out of order")

    def contains(self, value: float) -> bool:
        if self.empty:
            return False
        lo_ok = value >= self.lower if self.closed_lower else value > self.lower
        hi_ok = value <= self.upper if self.closed_upper else value < self.upper
        return lo_ok and hi_ok


def _n_of(family: ModelFamily) -> int:
    n = family.meta.get("n")
    if n is None or family.dim != 1:
        raise ValueError("this operation expects a binomial-count family")
    return n


def sbar_binom(n: int, y, p):
    """Standardized binomial score (y - n p) / sqrt(n p (1-p))."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    return (y - n * p) / np.sqrt(n * p * (1.0 - p))


def score_curves(family: ModelFamily, grid=None) -> CurveGrid:
    """One standardized-score curve per outcome y in {0..n}."""
    n = _n_of(family)
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.min() <= 0.0 or grid.max() >= 1.0:
        raise ValueError("grid must stay strictly inside (0, 1)")
    ys = np.arange(n + 1)
    return CurveGrid(parameter_grid=grid,
                     values=sbar_binom(n, ys[:, None], grid[None, :]),
                     kind="score")


def llr_curves(family: ModelFamily, grid=None) -> CurveGrid:
    """Twice the log-likelihood ratio, per outcome, over the grid.

    Rows y = 0 and y = n use the supremum of the likelihood at the
    closure boundary (log-mass limit 0 there for the binomial).
    """
    n = _n_of(family)
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.min() <= 0.0 or grid.max() >= 1.0:
        raise ValueError("grid must stay strictly inside (0, 1)")
    ys = np.arange(n + 1)

    def loglik(y, p):
        # binomial coefficient cancels in the ratio; keep the kernel only
        y = np.asarray(y, dtype=float)
        return y * np.log(p) + (n - y) * np.log1p(-p)

    sup = np.where((ys == 0) | (ys == n), 0.0,
                   loglik(ys, np.clip(ys / n, 1e-300, 1.0 - 1e-16)))
    vals = 2.0 * (sup[:, None] - loglik(ys[:, None], grid[None, :]))
    return CurveGrid(parameter_grid=grid, values=vals, kind="llr")


def ci_z(family: ModelFamily, y: int, z: float,
         side: str = "two-sided") -> IntervalResult:
    """Parameter set where the standardized score stays within the z band.

    Endpoints solve sbar_y(p) = -z (upper) and sbar_y(p) = +z (lower) by
    bracketed bisection; the curve is monotone decreasing in p.  y = 0
    and y = n give half-infinite sets flagged at the domain boundary.
    """
    if z < 0.0:
        raise ValueError("z must be nonnegative")
    n = _n_of(family)
    if side not in ("two-sided", "lower-only", "upper-only"):
        raise ValueError(f"unknown side {side!r}")
    eps = 1e-13

    def crossing(level):
        # root of sbar_y(p) - level in (0,1); None if no sign change
        f = lambda p: float(sbar_binom(n, y, p)) - level  # noqa: E731
        a, b = eps, 1.0 - eps
        fa, fb = f(a), f(b)
        if fa == 0.0:
            return a
        if fa * fb > 0.0:
            return None
        return bisect(f, a, b, xtol=BISECT_TOL)

    # sbar_y is monotone decreasing in p, so {sbar <= z} is bounded below
    # by the root of sbar = +z and {sbar >= -z} bounded above by sbar = -z
    lower, upper = 0.0, 1.0
    closed_lower = closed_upper = True
    notes = []
    if side in ("two-sided", "upper-only"):
        root = crossing(z)
        if root is None:
            closed_lower = False
            notes.append("lower endpoint at domain boundary")
        else:
            lower = root
    else:
        closed_lower = False
        notes.append("one-sided set: lower endpoint at domain boundary")
    if side in ("two-sided", "lower-only"):
        root = crossing(-z)
        if root is None:
            closed_upper = False
            notes.append("upper endpoint at domain boundary")
        else:
            upper = root
    else:
        closed_upper = False
        notes.append("one-sided set: upper endpoint at domain boundary")
    return IntervalResult(lower=lower, upper=upper,
                          closed_lower=closed_lower,
                          closed_upper=closed_upper,
                          z=z, side=side,
                          boundary_note="; ".join(notes) or None)


def vertical_slice(curves: CurveGrid, family: ModelFamily, p: float):
    """Distribution of the curve values at abscissa p.

    Returns a list of (value, probability, slope_sign) triples, one per
    outcome; slope signs come from the adjacent grid columns.
    """
    n = _n_of(family)
    grid = curves.parameter_grid
    if not (grid[0] <= p <= grid[-1]):
        raise ValueError("p outside the curve grid range")
    j = int(np.clip(np.searchsorted(grid, p), 1, len(grid) - 1))
    frac = (p - grid[j - 1]) / (grid[j] - grid[j - 1])
    vals = curves.values[:, j - 1] * (1.0 - frac) + curves.values[:, j] * frac
    slopes = (curves.values[:, j] - curves.values[:, j - 1]) \
        / (grid[j] - grid[j - 1])
    mass = binom.pmf(np.arange(n + 1), n, p)
    return [(float(v), float(m), int(np.sign(s)))
            for v, m, s in zip(vals, mass, slopes)]


def tail_z_adjusted_ci(family: ModelFamily, y: int, alpha: float,
                       side: str) -> IntervalResult:
    """Exact one-sided binomial endpoint: root in p of a tail identity.

    side="upper": p with Pr_p(Y <= y) = alpha (exact upper bound);
    side="lower": p with Pr_p(Y >= y) = alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0,1)")
    n = _n_of(family)
    eps = 1e-13
    if side == "upper":
        if y == n:
            return IntervalResult(lower=0.0, upper=1.0, side="upper-only",
                                  boundary_note="y = n: upper endpoint at "
                                  "domain boundary")
        f = lambda p: float(binom.cdf(y, n, p)) - alpha  # noqa: E731
        root = bisect(f, eps, 1.0 - eps, xtol=BISECT_TOL)
        return IntervalResult(lower=0.0, upper=root, side="upper-only",
                              closed_lower=False)
    if side == "lower":
        if y == 0:
            return IntervalResult(lower=0.0, upper=1.0, side="lower-only",
                                  boundary_note="y = 0: lower endpoint at "
                                  "domain boundary")
        f = lambda p: float(binom.sf(y - 1, n, p)) - alpha  # noqa: E731
        root = bisect(f, eps, 1.0 - eps, xtol=BISECT_TOL)
        return IntervalResult(lower=root, upper=1.0, side="lower-only",
                              closed_upper=False)
    raise ValueError(f"unknown side {side!r}")


def curves_to_rows(curves: CurveGrid, realized_y: Optional[int] = None):
    """Flatten a curve grid to (y, p, value, realized, slope_sign) rows."""
    rows = []
    grid = curves.parameter_grid
    slopes = np.gradient(curves.values, grid, axis=1)
    for y in range(curves.values.shape[0]):
        realized = 1 if realized_y is not None and y == realized_y else 0
        for j, p in enumerate(grid):
            rows.append((y, float(p), float(curves.values[y, j]), realized,
                         int(math.copysign(1.0, slopes[y, j]))
                         if slopes[y, j] != 0 else 0))
    return rows
