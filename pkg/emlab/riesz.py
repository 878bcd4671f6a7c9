"""
emlab — Riesz Products
ℛ_j = ∏_{i≤j} φ_i: pointwise values, exact sparse Fourier expansions, L^p norms,
the distribution function F_j and mass-concentration diagnostics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from emlab.construction import AmplitudeSchedule, LacunaryPair, ScheduleKind, _phase
from emlab.errors import InvalidArgument, ResolutionError, ResourceLimitError

logger = logging.getLogger(__name__)

EXPANSION_MAX_ORDER = 16
QUADRATURE_CELL_BUDGET = 2**24
RESOLUTION_FACTOR = 16
CHUNK = 2**20


@dataclass(frozen=True)
class RieszProduct:
    pair: LacunaryPair
    schedule: AmplitudeSchedule
    order: int

    def __post_init__(self):
        if not 1 <= self.order <= len(self.pair):
            raise InvalidArgument(
                f"Riesz order must lie in [1, {len(self.pair)}]; got {self.order}."
            )

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.pair.h[: self.order], dtype=np.int64)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.schedule.amplitudes(self.order)

    @property
    def min_grid_size(self) -> int:
        """Cells needed for Δx ≤ 1/(16·h_j)."""
        return RESOLUTION_FACTOR * self.pair.h[self.order - 1]


@dataclass(frozen=True)
class FourierExpansion:
    """Sparse cosine-symmetric expansion, frequencies sorted ascending."""

    frequencies: np.ndarray
    coefficients: np.ndarray

    def __len__(self) -> int:
        return len(self.frequencies)

    def coefficient(self, n: int) -> float:
        pos = np.searchsorted(self.frequencies, n)
        if pos < len(self.frequencies) and self.frequencies[pos] == n:
            return float(self.coefficients[pos])
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return {int(n): float(c) for n, c in zip(self.frequencies, self.coefficients)}


@dataclass(frozen=True)
class SingularityDiagnostics:
    order: int
    mean: float
    median: float
    mass_support_fraction: dict[float, float] = field(default_factory=dict)
    sampled: bool = False
    sample_mean: float | None = None
    mean_standard_error: float = 0.0


# ─────────────────────────────────────────────
#  POINTWISE
# ─────────────────────────────────────────────

def riesz_eval(rp: RieszProduct, x):
    x = np.asarray(x, dtype=float)
    value = np.ones_like(x)
    for h, a in zip(rp.frequencies, rp.amplitudes):
        value = value * (1.0 + a * np.cos(_phase(float(h), x)))
    return float(value) if value.ndim == 0 else value


def grid_values(rp: RieszProduct, grid_size: int, cells: np.ndarray) -> np.ndarray:
    """ℛ_j at the midpoints (n + 1/2)/N of the given cell indices."""
    n = cells.astype(float) + 0.5
    value = np.ones_like(n)
    for h, a in zip(rp.frequencies, rp.amplitudes):
        # (n + 1/2)·(h/N) is exact whenever h/N is a power of two
        value *= 1.0 + a * np.cos(2.0 * np.pi * np.mod(n * (float(h) / grid_size), 1.0))
    return value


def check_grid_resolution(rp: RieszProduct, grid_size: int) -> None:
    if grid_size < rp.min_grid_size:
        raise ResolutionError(
            f"grid of {grid_size} cells violates Δx ≤ 1/(16·h_{rp.order}); need ≥ {rp.min_grid_size}."
        )


def _midpoint_mean(rp: RieszProduct, grid_size: int, power: float = 1.0) -> float:
    """Composite midpoint rule for ∫₀¹ ℛ_j^p, streamed in chunks."""
    check_grid_resolution(rp, grid_size)
    total = 0.0
    for start in range(0, grid_size, CHUNK):
        cells = np.arange(start, min(start + CHUNK, grid_size))
        values = grid_values(rp, grid_size, cells)
        total += float(np.sum(values if power == 1.0 else values**power))
    return total / grid_size


def default_grid_size(rp: RieszProduct) -> int:
    """Smallest power of two meeting the resolution rule."""
    return 1 << math.ceil(math.log2(rp.min_grid_size))


# ─────────────────────────────────────────────
#  FOURIER EXPANSION
# ─────────────────────────────────────────────

def riesz_fourier(rp: RieszProduct, max_order: int = EXPANSION_MAX_ORDER) -> FourierExpansion:
    """
    Distribute ∏(1 + (a_i/2)(e^{+} + e^{-})) term by term; 3^j terms.
    """
    if rp.order > max_order:
        raise ResourceLimitError(
            f"expansion of order {rp.order} needs 3^{rp.order} terms; budget is order {max_order}."
        )
    return _expand(rp.frequencies, rp.amplitudes)


def _expand(frequencies: np.ndarray, amplitudes: np.ndarray) -> FourierExpansion:
    freqs = np.zeros(1, dtype=np.int64)
    coefs = np.ones(1, dtype=float)
    for h, a in zip(frequencies, amplitudes):
        half = a / 2.0
        freqs = np.concatenate([freqs, freqs + h, freqs - h])
        coefs = np.concatenate([coefs, coefs * half, coefs * half])

    order = np.argsort(freqs, kind="stable")
    freqs, coefs = freqs[order], coefs[order]
    unique, start = np.unique(freqs, return_index=True)
    if len(unique) != len(freqs):
        # only reachable for pairs that break ratio-4 lacunarity
        coefs = np.add.reduceat(coefs, start)
        freqs = unique
    return FourierExpansion(freqs, coefs)


def riesz_mean(rp: RieszProduct, max_order: int = 2 * EXPANSION_MAX_ORDER) -> float:
    """
    ∫₀¹ ℛ_j as the frequency-0 coefficient. The factors are split in two halves and
    c_0 = Σ_n L_n·R_{-n} over their expansions, so 2·3^{j/2} terms stand in for 3^j.
    """
    if rp.order > max_order:
        raise ResourceLimitError(f"mean of order {rp.order} exceeds the split-expansion budget of order {max_order}.")
    mid = rp.order // 2
    left = _expand(rp.frequencies[:mid], rp.amplitudes[:mid])
    right = _expand(rp.frequencies[mid:], rp.amplitudes[mid:])
    _, li, ri = np.intersect1d(left.frequencies, -right.frequencies, assume_unique=True, return_indices=True)
    return float(np.sum(left.coefficients[li] * right.coefficients[ri]))


# ─────────────────────────────────────────────
#  NORMS
# ─────────────────────────────────────────────

def riesz_l1(rp: RieszProduct, cell_budget: int = QUADRATURE_CELL_BUDGET) -> float:
    """
    ∫₀¹ ℛ_j = frequency-0 coefficient, cross-checked by midpoint quadrature
    when the resolution grid fits in `cell_budget`.
    """
    grid_size = default_grid_size(rp)
    if rp.order > EXPANSION_MAX_ORDER:
        if grid_size > cell_budget:
            raise ResourceLimitError(
                f"order {rp.order} exceeds the expansion budget and its {grid_size}-cell grid exceeds {cell_budget}."
            )
        return _midpoint_mean(rp, grid_size)

    mass = riesz_fourier(rp).coefficient(0)
    if grid_size <= cell_budget:
        quad = _midpoint_mean(rp, grid_size)
        if abs(quad - mass) > 1e-9:
            logger.warning("L1 quadrature %.17g disagrees with Fourier mass %.17g (j=%d)", quad, mass, rp.order)
    else:
        logger.warning("L1 quadrature cross-check skipped: %d cells exceeds budget %d", grid_size, cell_budget)
    return mass


def riesz_l1_quadrature(rp: RieszProduct, grid_size: int | None = None) -> float:
    return _midpoint_mean(rp, grid_size or default_grid_size(rp))


def riesz_l2(rp: RieszProduct) -> float:
    """√(Σ c_n²) over the expansion (Parseval)."""
    expansion = riesz_fourier(rp)
    return math.sqrt(float(np.sum(expansion.coefficients**2)))


def riesz_l2_closed_form(rp: RieszProduct) -> float:
    """√∏(1 + a_i²/2)."""
    return math.sqrt(float(np.prod(1.0 + rp.amplitudes**2 / 2.0)))


def riesz_lp(rp: RieszProduct, p: float, grid_size: int | None = None) -> float:
    if p <= 1:
        raise InvalidArgument(f"p must exceed 1; got {p}.")
    return _midpoint_mean(rp, grid_size or default_grid_size(rp), power=p) ** (1.0 / p)


def l2_limit_closed_form(schedule: AmplitudeSchedule) -> float | None:
    """
    lim_j ∏(1 + a_i²/2). For the linear schedule a_i²/2 = x²/i² with x = 1/(4√2·π),
    and ∏(1 + x²/i²) = sinh(πx)/(πx). Divergent schedules return None.
    """
    if schedule.kind is ScheduleKind.FLAT:
        return 1.0
    if schedule.kind is ScheduleKind.LINEAR:
        z = 1.0 / (4.0 * math.sqrt(2.0))
        return math.sinh(z) / z
    return None


# ─────────────────────────────────────────────
#  DISTRIBUTION FUNCTION
# ─────────────────────────────────────────────

def riesz_cdf(rp: RieszProduct, x):
    """
    F_j(x) = c_0·x + Σ_{n>0} c_n sin(2πnx)/(πn), integrated term-wise.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any((x_arr < 0.0) | (x_arr > 1.0)):
        raise InvalidArgument("riesz_cdf is defined for x in [0, 1].")

    expansion = riesz_fourier(rp)
    positive = expansion.frequencies > 0
    n = expansion.frequencies[positive].astype(float)
    c = expansion.coefficients[positive]
    weights = c / (np.pi * n)

    flat = x_arr.ravel()
    out = expansion.coefficient(0) * flat
    rows = max(1, CHUNK // max(len(n), 1))
    for start in range(0, len(flat), rows):
        block = flat[start:start + rows]
        out[start:start + rows] += np.sin(2.0 * np.pi * np.mod(np.outer(block, n), 1.0)) @ weights
    out = out.reshape(x_arr.shape)
    return float(out) if out.ndim == 0 else out


# ─────────────────────────────────────────────
#  SINGULARITY DIAGNOSTICS
# ─────────────────────────────────────────────

def _support_fraction(values: np.ndarray, p: float) -> float:
    ordered = np.sort(values)[::-1]
    cumulative = np.cumsum(ordered)
    count = int(np.searchsorted(cumulative, p * cumulative[-1], side="left")) + 1
    return min(count, len(values)) / len(values)


def _diagnostic_mean(rp: RieszProduct, values: np.ndarray, sampled: bool) -> tuple[float, float]:
    # an alias-free grid integrates ℛ_j exactly
    if not sampled:
        return float(values.mean()), 0.0
    try:
        return riesz_mean(rp), 0.0
    except ResourceLimitError:
        standard_error = float(values.std(ddof=1)) / math.sqrt(len(values))
        logger.warning("mean of order %d estimated from %d cells, standard error %.3g", rp.order, len(values),
                       standard_error)
        return float(values.mean()), standard_error


def singularity_diagnostics(
    rp: RieszProduct,
    grid_size: int,
    fractions: list[float],
    cell_budget: int = QUADRATURE_CELL_BUDGET,
    seed: int = 0,
) -> SingularityDiagnostics:
    """
    Mean, median and mass-support fractions of ℛ_j on the uniform grid.
    Grids larger than `cell_budget` are represented by a seeded uniform
    subsample of their cells; the mean then comes from `riesz_mean`, or from the
    subsample with `mean_standard_error` set when the order is past its budget.
    """
    check_grid_resolution(rp, grid_size)
    for p in fractions:
        if not 0.0 < p <= 1.0:
            raise InvalidArgument(f"mass fractions must lie in (0, 1]; got {p}.")

    sampled = grid_size > cell_budget
    if sampled:
        rng = np.random.default_rng(seed)
        cells = np.sort(rng.choice(grid_size, size=cell_budget, replace=False))
        logger.info("singularity diagnostics j=%d: subsampling %d of %d cells", rp.order, cell_budget, grid_size)
    else:
        cells = np.arange(grid_size)

    values = grid_values(rp, grid_size, cells)
    sample_mean = float(values.mean())
    mean, standard_error = _diagnostic_mean(rp, values, sampled)

    return SingularityDiagnostics(
        order=rp.order,
        mean=mean,
        median=float(np.median(values)),
        mass_support_fraction={p: _support_fraction(values, p) for p in fractions},
        sampled=sampled,
        sample_mean=sample_mean,
        mean_standard_error=standard_error,
    )
