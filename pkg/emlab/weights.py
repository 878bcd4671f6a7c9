"""
emlab — Weight Constants
Reverse Hölder RH_q, A_∞ and L log L constants of sampled weights over dyadic families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from emlab.errors import InvalidArgument, ResourceLimitError, ZeroAverageError
from emlab.riesz import QUADRATURE_CELL_BUDGET, RieszProduct, check_grid_resolution, default_grid_size, grid_values

LUXEMBURG_RTOL = 1e-10


@dataclass(frozen=True)
class WeightSample:
    """Piecewise-constant density: `values` are cell averages on `interval`."""

    interval: tuple[float, float]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        n = len(values)
        if values.ndim != 1 or n == 0 or n & (n - 1):
            raise InvalidArgument(f"weight grid length must be a power of two; got {n}.")
        if np.any(values < 0):
            raise InvalidArgument("weight values must be nonnegative.")
        if not np.any(values > 0):
            raise InvalidArgument("weight must be positive on at least one cell.")
        left, right = self.interval
        if not left < right:
            raise InvalidArgument(f"interval must satisfy left < right; got {self.interval}.")

    @property
    def depth_limit(self) -> int:
        return int(math.log2(len(self.values)))


@dataclass(frozen=True)
class IntervalFamily:
    """All dyadic subintervals of the base interval down to `max_depth`."""

    max_depth: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise InvalidArgument(f"max_depth must be ≥ 0; got {self.max_depth}.")

    @property
    def member_count(self) -> int:
        return 2 ** (self.max_depth + 1) - 1

    def blocks(self, w: WeightSample):
        """Yield (level, 2^level × cells array) with one row per member."""
        if self.max_depth > w.depth_limit:
            raise InvalidArgument(
                f"depth {self.max_depth} is finer than the {len(w.values)}-cell grid allows."
            )
        for level in range(self.max_depth + 1):
            yield level, w.values.reshape(2**level, -1)

    def members(self, w: WeightSample) -> list[tuple[float, float]]:
        left, right = w.interval
        out = []
        for level in range(self.max_depth + 1):
            width = (right - left) / 2**level
            out.extend((left + i * width, left + (i + 1) * width) for i in range(2**level))
        return out


@dataclass(frozen=True)
class WeightConstants:
    rh_q: dict[float, float] = field(default_factory=dict)
    a_inf: float = 1.0
    llogl: float = 1.0


def _member(w: WeightSample, level: int, index: int) -> tuple[float, float]:
    left, right = w.interval
    width = (right - left) / 2**level
    return left + index * width, left + (index + 1) * width


def _averages(w: WeightSample, level: int, block: np.ndarray) -> np.ndarray:
    avg = block.mean(axis=1)
    zero = np.flatnonzero(avg <= 0)
    if len(zero):
        member = _member(w, level, int(zero[0]))
        raise ZeroAverageError(f"weight has zero average on member {member}.", member)
    return avg


def rh_constant(w: WeightSample, q: float, fam: IntervalFamily) -> float:
    """max over members of (avg w^q)^{1/q} / avg w."""
    if q <= 1:
        raise InvalidArgument(f"q must exceed 1; got {q}.")
    best = 0.0
    for level, block in fam.blocks(w):
        avg = _averages(w, level, block)
        # normalising by the member average keeps w^q in range
        ratio = np.mean((block / avg[:, None]) ** q, axis=1) ** (1.0 / q)
        best = max(best, float(ratio.max()))
    return best


def a_inf_constant(w: WeightSample, fam: IntervalFamily) -> float:
    """max over members of (avg w)·exp(avg log(1/w))."""
    if np.any(w.values <= 0):
        raise InvalidArgument("A∞ constant needs a strictly positive weight (log of a zero cell).")
    logs = np.log(w.values)
    best = 0.0
    for level, block in fam.blocks(w):
        avg = block.mean(axis=1)
        log_block = logs.reshape(2**level, -1)
        ratio = np.exp(np.log(avg) - log_block.mean(axis=1))
        best = max(best, float(ratio.max()))
    return best


def young(t):
    """Φ(t) = t·log(e + t)."""
    return t * np.log(math.e + t)


T_STAR = bisect(lambda t: young(t) - 1.0, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def luxemburg_norm(values: np.ndarray) -> float:
    """inf{λ > 0 : avg Φ(w/λ) ≤ 1}, by bisection on λ."""
    lo, peak = float(values.mean()), float(values.max())
    # Φ(w/λ) ≤ Φ(t*/2) < 1 everywhere at this λ; avg Φ(w/lo) > 1 since Φ(t) > t for t > 0
    hi = 2.0 * peak / T_STAR
    return bisect(lambda lam: float(np.mean(young(values / lam))) - 1.0, lo, hi, rtol=LUXEMBURG_RTOL)


def llogl_constant(w: WeightSample, fam: IntervalFamily) -> float:
    best = 0.0
    for level, block in fam.blocks(w):
        avg = _averages(w, level, block)
        for row, mean in zip(block, avg):
            best = max(best, luxemburg_norm(row) / float(mean))
    return best


def weight_constants(w: WeightSample, qs: list[float], fam: IntervalFamily) -> WeightConstants:
    positive = bool(np.all(w.values > 0))
    return WeightConstants(
        rh_q={q: rh_constant(w, q, fam) for q in qs},
        a_inf=a_inf_constant(w, fam) if positive else math.inf,
        llogl=llogl_constant(w, fam),
    )


def riesz_weight(
    rp: RieszProduct, grid_size: int | None = None, cell_budget: int = QUADRATURE_CELL_BUDGET
) -> WeightSample:
    """ℛ_j at cell midpoints of a power-of-two grid on [0, 1]."""
    grid_size = grid_size or default_grid_size(rp)
    check_grid_resolution(rp, grid_size)
    if grid_size > cell_budget:
        raise ResourceLimitError(
            f"weight of order {rp.order} needs {grid_size} cells; budget is {cell_budget}."
        )
    values = grid_values(rp, grid_size, np.arange(grid_size))
    return WeightSample((0.0, 1.0), values)
