"""
emlab — Discrete Elliptic Solver
Conservative 5-point discretization of −div A_j ∇ on a rectangle, preconditioned CG,
elliptic measure by Green-flux extraction and the Poisson-kernel profile.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import pyamg
import scipy.sparse as sp

from emlab.construction import CoefficientField, field_eval
from emlab.errors import ConvergenceError, InvalidArgument, ResolutionError

logger = logging.getLogger(__name__)

RESOLUTION_FACTOR = 16
MIN_CELLS = 8
DEFAULT_REL_TOL = 1e-10
MEASURE_REL_TOL = 1e-12
ITERATION_FACTOR = 50
RESIDUAL_REFRESH = 50
PRECONDITIONERS = ("jacobi", "amg")
NODE_BUDGET = 2**22
SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Grid:
    """Nodes (x0 + i·hx, j·hy) for i = 0..nx, j = 0..ny on [x0, x1] × [0, y1]."""

    x0: float
    x1: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.x0 < self.x1 or self.y1 <= 0:
            raise InvalidArgument(f"grid rectangle needs x0 < x1 and y1 > 0; got {self}.")
        if min(self.nx, self.ny) < MIN_CELLS:
            raise InvalidArgument(f"grid needs at least {MIN_CELLS} cells per side; got {self.nx}x{self.ny}.")

    @classmethod
    def for_field(cls, fld: CoefficientField, x0: float, x1: float, y1: float, refine: int = 1) -> "Grid":
        """Coarsest grid obeying the resolution rule for `fld`, times `refine`."""
        j = fld.level
        nx = math.ceil(RESOLUTION_FACTOR * fld.max_frequency * (x1 - x0))
        ny = math.ceil(RESOLUTION_FACTOR * fld.pair.next_scale(j) * y1)
        return cls(x0, x1, y1, max(nx, MIN_CELLS) * refine, max(ny, MIN_CELLS) * refine)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return self.y1 / self.ny

    @property
    def interior_count(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    def node(self, i: int, j: int) -> tuple[float, float]:
        return self.x0 + i * self.hx, j * self.hy

    def nearest_node(self, x: float, y: float) -> tuple[int, int]:
        return int(round((x - self.x0) / self.hx)), int(round(y / self.hy))

    def is_interior(self, i: int, j: int) -> bool:
        return 0 < i < self.nx and 0 < j < self.ny


@dataclass(frozen=True)
class BoundaryCells:
    """Non-corner boundary nodes, ordered bottom, right, top, left."""

    side: np.ndarray
    cell_index: np.ndarray
    i: np.ndarray
    j: np.ndarray

    def __len__(self) -> int:
        return len(self.side)


@dataclass(frozen=True)
class DiscreteOperator:
    """
    `matrix` acts on interior nodes; `coupling[p, b]` is the conductivity between interior
    node p and boundary cell b, so the Dirichlet problem reads matrix·u = coupling·g.
    """

    grid: Grid
    field: CoefficientField
    matrix: sp.csr_matrix
    coupling: sp.csr_matrix
    boundary: BoundaryCells
    node_id: np.ndarray

    def interior_index(self, node: tuple[int, int]) -> int:
        i, j = node
        if not self.grid.is_interior(i, j):
            raise InvalidArgument(f"node {node} is not strictly interior to the {self.grid.nx}x{self.grid.ny} grid.")
        return int(self.node_id[j, i])


@dataclass(frozen=True)
class EllipticMeasureVector:
    boundary: BoundaryCells
    mass: np.ndarray
    pole: tuple[int, int]

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def side_mass(self, side: str) -> float:
        return float(self.mass[self.boundary.side == side].sum())

    def side_totals(self) -> dict[str, float]:
        return {side: self.side_mass(side) for side in SIDES}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "side": self.boundary.side,
            "cell_index": self.boundary.cell_index,
            "mass": self.mass,
        })


@dataclass(frozen=True)
class PoissonKernelProfile:
    x: np.ndarray
    density: np.ndarray
    hx: float

    @property
    def total_mass(self) -> float:
        return float(self.density.sum() * self.hx)


@dataclass
class SolveResult:
    solution: np.ndarray
    iterations: int
    residual_history: list[float] = field(default_factory=list)


# ─────────────────────────────────────────────
#  ASSEMBLY
# ─────────────────────────────────────────────

def check_resolution(fld: CoefficientField, grid: Grid) -> None:
    if fld.is_limit:
        raise InvalidArgument("only Level(j) fields can be discretized.")
    hx_max = 1.0 / (RESOLUTION_FACTOR * fld.max_frequency)
    hy_max = 1.0 / (RESOLUTION_FACTOR * fld.pair.next_scale(fld.level))
    if grid.hx > hx_max * (1 + 1e-12) or grid.hy > hy_max * (1 + 1e-12):
        raise ResolutionError(
            f"grid spacing ({grid.hx:.4g}, {grid.hy:.4g}) exceeds ({hx_max:.4g}, {hy_max:.4g}) "
            f"required for Level({fld.level})."
        )


def _boundary_cells(grid: Grid, node_id: np.ndarray, offset: int) -> BoundaryCells:
    nx, ny = grid.nx, grid.ny
    along_x, along_y = np.arange(1, nx), np.arange(1, ny)
    sides = [
        ("bottom", along_x, np.zeros_like(along_x)),
        ("right", np.full_like(along_y, nx), along_y),
        ("top", along_x, np.full_like(along_x, ny)),
        ("left", np.zeros_like(along_y), along_y),
    ]
    side, index, ii, jj = [], [], [], []
    for name, i, j in sides:
        side.append(np.full(len(i), name, dtype=object))
        index.append(np.arange(len(i)))
        ii.append(i)
        jj.append(j)
    cells = BoundaryCells(np.concatenate(side), np.concatenate(index), np.concatenate(ii), np.concatenate(jj))
    node_id[cells.j, cells.i] = offset + np.arange(len(cells))
    return cells


def assemble(fld: CoefficientField, grid: Grid) -> DiscreteOperator:
    """
    Flux-form 5-point stencil: x-faces carry hy/hx, y-faces carry ᾱ·hx/hy with ᾱ the mean
    of α_j at the two nodes of the face.
    """
    check_resolution(fld, grid)
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    n = grid.interior_count

    node_id = np.full((ny + 1, nx + 1), -1, dtype=np.int64)
    node_id[1:ny, 1:nx] = np.arange(n).reshape(ny - 1, nx - 1)
    boundary = _boundary_cells(grid, node_id, n)

    xs = grid.x0 + hx * np.arange(nx + 1)
    ys = hy * np.arange(ny + 1)
    alpha = field_eval(fld, *np.meshgrid(xs, ys))

    # x-faces in rows 1..ny-1, y-faces in columns 1..nx-1
    ax, bx = node_id[1:ny, :-1].ravel(), node_id[1:ny, 1:].ravel()
    cx = np.full(len(ax), hy / hx)
    ay, by = node_id[:-1, 1:nx].ravel(), node_id[1:, 1:nx].ravel()
    cy = (0.5 * (alpha[:-1, 1:nx] + alpha[1:, 1:nx]) * hx / hy).ravel()

    a = np.concatenate([ax, ay])
    b = np.concatenate([bx, by])
    c = np.concatenate([cx, cy])

    diag = np.bincount(a[a < n], weights=c[a < n], minlength=n) + np.bincount(b[b < n], weights=c[b < n], minlength=n)

    inner = (a < n) & (b < n)
    rows = np.concatenate([a[inner], b[inner], np.arange(n)])
    cols = np.concatenate([b[inner], a[inner], np.arange(n)])
    vals = np.concatenate([-c[inner], -c[inner], diag])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    a_edge = (a < n) & (b >= n)
    b_edge = (b < n) & (a >= n)
    crow = np.concatenate([a[a_edge], b[b_edge]])
    ccol = np.concatenate([b[a_edge], a[b_edge]]) - n
    cval = np.concatenate([c[a_edge], c[b_edge]])
    coupling = sp.csr_matrix((cval, (crow, ccol)), shape=(n, len(boundary)))

    logger.debug("assembled Level(%s) on %dx%d: %d unknowns, %d boundary cells", fld.level, nx, ny, n, len(boundary))
    return DiscreteOperator(grid, fld, matrix, coupling, boundary, node_id)


# ─────────────────────────────────────────────
#  PRECONDITIONED CONJUGATE GRADIENT
# ─────────────────────────────────────────────

def _preconditioner(matrix: sp.csr_matrix, kind: str):
    if kind == "jacobi":
        inv_diag = 1.0 / matrix.diagonal()
        return lambda r: inv_diag * r
    if kind == "amg":
        ml = pyamg.smoothed_aggregation_solver(matrix, symmetry="symmetric")
        m = ml.aspreconditioner(cycle="V")
        return m.matvec
    raise InvalidArgument(f"preconditioner must be one of {', '.join(PRECONDITIONERS)}; got {kind!r}.")


def pcg(matrix: sp.csr_matrix, rhs: np.ndarray, rel_tol: float, preconditioner: str = "jacobi",
        max_iter: int | None = None) -> SolveResult:
    """
    Preconditioned CG from x = 0 until ‖b − Ax‖ ≤ rel_tol·‖b‖, the recursive residual
    being replaced by the true one every RESIDUAL_REFRESH steps and at convergence.
    """
    n = matrix.shape[0]
    max_iter = max_iter or math.ceil(ITERATION_FACTOR * math.sqrt(n))
    x = np.zeros(n)
    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        return SolveResult(x, 0, [0.0])

    apply_m = _preconditioner(matrix, preconditioner)
    r = rhs.copy()
    z = apply_m(r)
    d = z.copy()
    rz = float(r @ z)
    history = [1.0]

    for it in range(1, max_iter + 1):
        q = matrix @ d
        alpha = rz / float(d @ q)
        x += alpha * d
        if it % RESIDUAL_REFRESH == 0:
            r = rhs - matrix @ x
        else:
            r -= alpha * q
        rel = float(np.linalg.norm(r)) / b_norm
        history.append(rel)

        if rel <= rel_tol:
            r = rhs - matrix @ x
            rel = float(np.linalg.norm(r)) / b_norm
            history[-1] = rel
            if rel <= rel_tol:
                logger.debug("pcg(%s): %d iterations, relative residual %.3g", preconditioner, it, rel)
                return SolveResult(x, it, history)
            # recursive residual drifted; restart the search direction from the true one
            z = apply_m(r)
            d = z.copy()
            rz = float(r @ z)
            continue

        z = apply_m(r)
        rz_next = float(r @ z)
        d = z + (rz_next / rz) * d
        rz = rz_next

    raise ConvergenceError(
        f"pcg({preconditioner}) did not reach relative residual {rel_tol:g} in {max_iter} iterations "
        f"(last {history[-1]:.3g}).",
        history,
    )


# ─────────────────────────────────────────────
#  DIRICHLET PROBLEM AND ELLIPTIC MEASURE
# ─────────────────────────────────────────────

def _check_tol(rel_tol: float) -> None:
    if not 0.0 < rel_tol <= 1e-4:
        raise InvalidArgument(f"rel_tol must lie in (0, 1e-4]; got {rel_tol:g}.")


def solve_dirichlet(op: DiscreteOperator, boundary_data: np.ndarray, rel_tol: float = DEFAULT_REL_TOL,
                    preconditioner: str = "jacobi") -> np.ndarray:
    """Interior values u with L u = 0 and u = boundary_data on the boundary cells."""
    _check_tol(rel_tol)
    data = np.asarray(boundary_data, dtype=float)
    if data.shape != (len(op.boundary),):
        raise InvalidArgument(f"boundary data needs {len(op.boundary)} values; got shape {data.shape}.")
    return pcg(op.matrix, op.coupling @ data, rel_tol, preconditioner).solution


def interior_values(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    """Interior solution as an (ny−1) × (nx−1) array."""
    return u.reshape(op.grid.ny - 1, op.grid.nx - 1)


def elliptic_measure(op: DiscreteOperator, pole: tuple[int, int], rel_tol: float = MEASURE_REL_TOL,
                     preconditioner: str = "jacobi", transpose: bool = False) -> EllipticMeasureVector:
    """
    Green function g with a unit load at `pole`, then ω_b = c_b·g(neighbour of b): the weights
    with u(pole) = Σ_b ω_b·data_b for every boundary data vector.
    """
    _check_tol(rel_tol)
    p = op.interior_index(pole)
    load = np.zeros(op.matrix.shape[0])
    load[p] = 1.0
    matrix = op.matrix.T.tocsr() if transpose else op.matrix
    green = pcg(matrix, load, rel_tol, preconditioner).solution
    mass = op.coupling.T @ green
    return EllipticMeasureVector(op.boundary, mass, tuple(pole))


def poisson_kernel_profile(omega: EllipticMeasureVector, grid: Grid) -> PoissonKernelProfile:
    """Bottom-cell mass / hx for cells with x in [−1, 1]."""
    if grid.x0 > -1.0 or grid.x1 < 1.0:
        raise InvalidArgument(f"bottom edge [{grid.x0}, {grid.x1}] does not cover [-1, 1].")
    bottom = omega.boundary.side == "bottom"
    x = grid.x0 + grid.hx * omega.boundary.i[bottom]
    inside = (x >= -1.0 - 1e-12) & (x <= 1.0 + 1e-12)
    return PoissonKernelProfile(x[inside], omega.mass[bottom][inside] / grid.hx, grid.hx)
