"""
emlab — Kernel Comparison
Poisson-kernel profile of Level(j) on the comparison domain, its ratio to the Riesz
product ℛ_j, and doubling ratios of the discrete elliptic measure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from emlab.construction import AmplitudeSchedule, CoefficientField, Variant, make_lacunary
from emlab.errors import DegenerateCellError, InvalidArgument
from emlab.riesz import RieszProduct, riesz_eval
from emlab.solver import (
    MEASURE_REL_TOL,
    EllipticMeasureVector,
    Grid,
    PoissonKernelProfile,
    assemble,
    elliptic_measure,
    poisson_kernel_profile,
)

logger = logging.getLogger(__name__)

DEFAULT_POLE = (0.5, 2.0)
KERNEL_DOMAIN = (-2.0, 3.0, 3.0)
KERNEL_J_CAP = 3


@dataclass(frozen=True)
class KernelConfig:
    schedule: AmplitudeSchedule = AmplitudeSchedule()
    variant: Variant = Variant.STANDARD
    refine: int = 1
    grid: tuple[int, int] | None = None
    pole: tuple[float, float] = DEFAULT_POLE
    domain: tuple[float, float, float] = KERNEL_DOMAIN
    rel_tol: float = MEASURE_REL_TOL
    preconditioner: str = "amg"
    j_cap: int = KERNEL_J_CAP


@dataclass(frozen=True)
class KernelRun:
    grid: Grid
    measure: EllipticMeasureVector
    profile: PoissonKernelProfile


@dataclass(frozen=True)
class KernelComparison:
    j: int
    min_ratio: float
    max_ratio: float
    correlation: float | None
    table: pd.DataFrame
    run: KernelRun

    @property
    def correlation_applicable(self) -> bool:
        return self.correlation is not None


def kernel_field(j: int, cfg: KernelConfig) -> CoefficientField:
    # Level(j) needs k_{j+1} for the y-resolution
    pair = make_lacunary(j + 1, cfg.variant)
    return CoefficientField(pair, cfg.schedule, level=j)


def kernel_profile(j: int, cfg: KernelConfig = KernelConfig()) -> KernelRun:
    """Elliptic measure of Level(j) from the pole, and its bottom profile on [−1, 1]."""
    if not 1 <= j <= cfg.j_cap:
        raise InvalidArgument(f"kernel comparison runs for 1 ≤ j ≤ {cfg.j_cap}; got {j}.")
    fld = kernel_field(j, cfg)
    x0, x1, y1 = cfg.domain
    if cfg.grid is None:
        grid = Grid.for_field(fld, x0, x1, y1, cfg.refine)
    else:
        grid = Grid(x0, x1, y1, cfg.grid[0] * cfg.refine, cfg.grid[1] * cfg.refine)

    op = assemble(fld, grid)
    pole = grid.nearest_node(*cfg.pole)
    logger.info("kernel j=%d: grid %dx%d, pole node %s, rel_tol=%g, %s", j, grid.nx, grid.ny, pole,
                cfg.rel_tol, cfg.preconditioner)
    omega = elliptic_measure(op, pole, cfg.rel_tol, cfg.preconditioner)
    return KernelRun(grid, omega, poisson_kernel_profile(omega, grid))


def compare_kernel_to_riesz(j: int, cfg: KernelConfig = KernelConfig()) -> KernelComparison:
    """
    ρ(x) = 𝒦̂_j(x) / (c·ℛ_j(x)) with c = mean 𝒦̂_j / mean ℛ_j over bottom cells in [−1, 1],
    and the Pearson correlation of log 𝒦̂_j against log ℛ_j.
    """
    run = kernel_profile(j, cfg)
    profile = run.profile
    bad = np.flatnonzero(profile.density <= 0)
    if len(bad):
        x, value = float(profile.x[bad[0]]), float(profile.density[bad[0]])
        raise DegenerateCellError(f"kernel cell at x={x:.6g} is not positive ({value:.3g}).", x, value)

    rp = RieszProduct(make_lacunary(j + 1, cfg.variant), cfg.schedule, j)
    riesz = riesz_eval(rp, profile.x)
    c = profile.density.mean() / riesz.mean()
    ratio = profile.density / (c * riesz)

    log_k, log_r = np.log(profile.density), np.log(riesz)
    correlation = None
    if np.ptp(log_r) > 0:
        correlation = float(np.corrcoef(log_k, log_r)[0, 1])

    table = pd.DataFrame({
        "x": profile.x,
        "kernel_density": profile.density,
        "riesz_value": riesz,
        "ratio": ratio,
    })
    return KernelComparison(j, float(ratio.min()), float(ratio.max()), correlation, table, run)


def doubling_ratios(profile: PoissonKernelProfile) -> pd.DataFrame:
    """
    ω(2I)/ω(I) for dyadic I ⊂ [−1, 1] whose concentric double 2I also lies in [−1, 1];
    intervals are half-open and must hold at least two cells.
    """
    mass = profile.density * profile.hx
    cumulative = np.concatenate([[0.0], np.cumsum(mass)])

    def measure(left: float, right: float) -> float:
        lo = np.searchsorted(profile.x, left, side="left")
        hi = np.searchsorted(profile.x, right, side="left")
        return float(cumulative[hi] - cumulative[lo])

    rows = []
    level = 1
    while (width := 2.0 ** (1 - level)) >= 2 * profile.hx:
        for k in range(2**level):
            left = -1.0 + k * width
            right = left + width
            outer_left, outer_right = left - width / 2, right + width / 2
            if outer_left < -1.0 or outer_right > 1.0:
                continue
            inner = measure(left, right)
            if inner <= 0:
                continue
            rows.append((left, right, measure(outer_left, outer_right) / inner))
        level += 1
    if not rows:
        raise InvalidArgument("profile is too coarse for any dyadic doubling pair.")
    return pd.DataFrame(rows, columns=["left", "right", "ratio"])


def ratio_spread_change(coarse: KernelComparison, fine: KernelComparison) -> float:
    """Largest relative change of min/max ratio between two resolutions."""
    return max(
        abs(fine.min_ratio - coarse.min_ratio) / coarse.min_ratio,
        abs(fine.max_ratio - coarse.max_ratio) / coarse.max_ratio,
    )

