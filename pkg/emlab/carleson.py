"""
emlab — Kenig–Pipher Functional
Sampled Carleson functional 𝒫(𝒜) of the coefficient fields, and the analytic lower bound
obtained by restricting to the bottom layer of α_j.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from emlab.config import thread_count
from emlab.construction import AmplitudeSchedule, CoefficientField, LacunaryPair, ScheduleKind, field_gradient
from emlab.errors import InvalidArgument, ResolutionError

logger = logging.getLogger(__name__)

MIN_QUAD_POINTS = 16
# (2/3)(1 - (k/h)²)^{3/2}·π² with h ≥ 2k gives at least √3·π²/4
KP_CHAIN_FACTOR = math.sqrt(3.0) * math.pi**2 / 4.0
X_CHUNK = 4096


@dataclass(frozen=True)
class Region:
    """[x0, x1] × [0, y1] with its bottom edge on the boundary."""

    x0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        if not self.x0 < self.x1 or self.y1 <= 0:
            raise InvalidArgument(f"region needs x0 < x1 and y1 > 0; got {self}.")


@dataclass(frozen=True)
class KPSampling:
    ball_centers: int = 4
    radii_per_center: int = 4
    quad_points: int = 16
    sup_samples: int = 32


KP_DEFAULT_SAMPLING = KPSampling()


@dataclass(frozen=True)
class KPEstimate:
    value: float
    center: float
    radius: float
    sampling: KPSampling = field(default_factory=KPSampling)


@lru_cache(maxsize=16)
def disk_offsets(n: int) -> np.ndarray:
    """First n unscrambled Halton points mapped into the open unit disk; nested in n."""
    u = qmc.Halton(d=2, scramble=False).random(n)
    rho = np.sqrt(u[:, 0])
    theta = 2.0 * np.pi * u[:, 1]
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])


def _density_row(fld: CoefficientField, xs: np.ndarray, y: float, offsets: np.ndarray) -> np.ndarray:
    """max over Whitney-disk samples Y of |∇α(Y)|²·δ(Y), for every x in xs at height y."""
    out = np.empty_like(xs)
    radius = 0.5 * y
    for start in range(0, len(xs), X_CHUNK):
        block = xs[start:start + X_CHUNK]
        yx = block[:, None] + radius * offsets[None, :, 0]
        yy = np.broadcast_to(y + radius * offsets[None, :, 1], yx.shape)
        gx, gy = field_gradient(fld, yx, yy)
        out[start:start + X_CHUNK] = np.max((gx * gx + gy * gy) * yy, axis=1)
    return out


def kp_local_density(fld: CoefficientField, x: float, y: float, sup_samples: int) -> float:
    """Sampled sup over B((x, y), y/2) of |∇α(Y)|²·δ(Y), with δ(Y) = height of Y."""
    if y <= 0:
        raise InvalidArgument(f"y must be positive; got {y}.")
    if sup_samples < 1:
        raise InvalidArgument(f"sup_samples must be ≥ 1; got {sup_samples}.")
    return float(_density_row(fld, np.array([float(x)]), float(y), disk_offsets(sup_samples))[0])


def dyadic_radii(fld: CoefficientField, region: Region, keep: int) -> list[float]:
    """Dyadic radii from 1/(2k_j) up to min(1/2, y1); the `keep` finest."""
    j = fld.level if fld.level is not None else len(fld.pair)
    r_min = 1.0 / (2.0 * fld.pair.scale(j))
    r_max = min(0.5, region.y1)
    radii = []
    m = 1
    while 2.0**-m >= r_min:
        if 2.0**-m <= r_max:
            radii.append(2.0**-m)
        m += 1
    return sorted(radii)[:keep]


def _ball_average(fld: CoefficientField, center: float, radius: float, dx: float, grading: float,
                  offsets: np.ndarray) -> float:
    """(1/r)∬ density over the half-disk: midpoint rule, uniform in x, geometric in y."""
    nx = math.ceil(2.0 * radius / dx)
    step = 2.0 * radius / nx
    xs = center - radius + (np.arange(nx) + 0.5) * step

    edges = [0.0, min(dx, radius)]
    while edges[-1] < radius:
        edges.append(min(edges[-1] * (1.0 + grading), radius))

    total = 0.0
    for lower, upper in zip(edges[:-1], edges[1:]):
        ym = 0.5 * (lower + upper)
        inside = np.abs(xs - center) < math.sqrt(radius * radius - ym * ym)
        if not inside.any():
            continue
        density = _density_row(fld, xs[inside], ym, offsets)
        total += float(density.sum()) * step * (upper - lower)
    return total / radius


def kp_functional(fld: CoefficientField, region: Region = Region(),
                  sampling: KPSampling = KP_DEFAULT_SAMPLING, threads: int | None = None) -> KPEstimate:
    """
    max over sampled centers q on the bottom edge and dyadic radii r of
    (1/r)∬_{B(q,r)∩Ω} kp_local_density.
    """
    if fld.is_limit:
        raise InvalidArgument("kp_functional samples Level(j) fields; the Limit field is not resolvable.")
    if sampling.quad_points < MIN_QUAD_POINTS:
        raise ResolutionError(
            f"quad_points={sampling.quad_points} violates Δx ≤ 1/(16·h_j); need ≥ {MIN_QUAD_POINTS}."
        )
    if sampling.ball_centers < 1 or sampling.radii_per_center < 1 or sampling.sup_samples < 1:
        raise InvalidArgument(f"sampling counts must be positive; got {sampling}.")

    dx = 1.0 / (sampling.quad_points * fld.max_frequency)
    grading = 2.0 / sampling.quad_points
    offsets = disk_offsets(sampling.sup_samples)
    centers = [region.x0 + (region.x1 - region.x0) * i / sampling.ball_centers
               for i in range(sampling.ball_centers)]
    radii = dyadic_radii(fld, region, sampling.radii_per_center)
    if not radii:
        raise InvalidArgument(f"no dyadic radius fits between 1/(2k_j) and {min(0.5, region.y1)}.")

    tasks = [(c, r) for c in centers for r in radii]
    logger.debug("KP j=%s: %d balls, dx=%.3g, sup_samples=%d", fld.level, len(tasks), dx, sampling.sup_samples)
    with ThreadPoolExecutor(max_workers=thread_count(threads)) as pool:
        values = list(pool.map(lambda t: _ball_average(fld, t[0], t[1], dx, grading, offsets), tasks))

    best = int(np.argmax(values))
    center, radius = tasks[best]
    return KPEstimate(float(values[best]), center, radius, sampling)


def kp_chain_constant(schedule: AmplitudeSchedule) -> float:
    """c₀ = (√3·π²/4)·A₀²; √3/64 for the sqrt and linear schedules."""
    if schedule.kind is ScheduleKind.FLAT:
        raise InvalidArgument("the KP lower-bound chain needs a nonzero amplitude schedule.")
    return KP_CHAIN_FACTOR * schedule.base_amplitude**2


def kp_lower_bound_analytic(j: int, pair: LacunaryPair, schedule: AmplitudeSchedule) -> float:
    """
    On B(x0, r_j), r_j = 1/(2k_j), every Whitney ball stays in the bottom layer where
    |∂α_j/∂x|² = (2πh_j a_j)² sin²(2πh_j x). Where y ≥ 1/(2h_j) the Whitney ball spans a
    full period of sin², so the density is at least (2πh_j a_j)²·y. Integrating over that
    part of the half-disk:

        (1/r_j)·(2/3)(r_j² − 1/(4h_j²))^{3/2}·(2πh_j a_j)²
          = (2π²/3)(1 − (k_j/h_j)²)^{3/2}·a_j²(h_j/k_j)²
          ≥ (√3π²/4)·a_j²(h_j/k_j)²          when h_j ≥ 2k_j.

    With a_j² = A₀²/j this is c₀(h_j/k_j)²/j; with the linear schedule c₀(h_j/k_j)²/j².
    """
    c0 = kp_chain_constant(schedule)
    hj, kj = pair.frequency(j), pair.scale(j)
    if hj < 2 * kj:
        raise InvalidArgument(f"the KP chain needs h_j ≥ 2k_j; got h_{j}={hj}, k_{j}={kj}.")
    decay = j**2 if schedule.kind is ScheduleKind.LINEAR else j
    return c0 * (hj / kj) ** 2 / decay
