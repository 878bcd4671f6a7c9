"""
emlab — Random-Walk Oracle
Monte-Carlo estimate of the discrete elliptic measure: walkers step to a neighbour with
probability proportional to the face conductivity until they reach a boundary cell.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp

from emlab.config import thread_count
from emlab.errors import InvalidArgument
from emlab.solver import DiscreteOperator, EllipticMeasureVector

logger = logging.getLogger(__name__)

BATCH_SIZE = 2**14


def transition_table(op: DiscreteOperator) -> tuple[np.ndarray, np.ndarray]:
    """
    Per interior node, its four neighbours and cumulative step probabilities.
    Neighbours ≥ n are boundary cells, offset by n.
    """
    n = op.matrix.shape[0]
    off = -(op.matrix - sp.diags(op.matrix.diagonal()))
    table = sp.hstack([off, op.coupling], format="csr")
    table.eliminate_zeros()
    table.sort_indices()
    counts = np.diff(table.indptr)
    if np.any(counts != 4):
        raise InvalidArgument("every interior node must have exactly four neighbours.")
    targets = table.indices.reshape(n, 4)
    weights = table.data.reshape(n, 4)
    cumulative = np.cumsum(weights / op.matrix.diagonal()[:, None], axis=1)
    return targets, cumulative


def _walk_batch(targets: np.ndarray, cumulative: np.ndarray, start: int, walkers: int,
                seed: np.random.SeedSequence, n: int, cells: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    position = np.full(walkers, start, dtype=np.int64)
    hits = np.zeros(cells, dtype=np.int64)
    while len(position):
        u = rng.random(len(position))
        step = (u[:, None] >= cumulative[position, :3]).sum(axis=1)
        position = targets[position, step]
        done = position >= n
        if done.any():
            hits += np.bincount(position[done] - n, minlength=cells)
            position = position[~done]
    return hits


def measure_mc_oracle(op: DiscreteOperator, pole: tuple[int, int], walkers: int, seed: int = 0,
                      threads: int | None = None) -> EllipticMeasureVector:
    """
    Boundary hit frequencies of `walkers` walks from `pole`. Batches draw from
    SeedSequence(seed).spawn so the result does not depend on the thread count.
    """
    if walkers < 1:
        raise InvalidArgument(f"walkers must be ≥ 1; got {walkers}.")
    start = op.interior_index(pole)
    n, cells = op.matrix.shape[0], len(op.boundary)
    targets, cumulative = transition_table(op)

    sizes = [BATCH_SIZE] * (walkers // BATCH_SIZE)
    if walkers % BATCH_SIZE:
        sizes.append(walkers % BATCH_SIZE)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    logger.debug("random walk: %d walkers in %d batches from node %s", walkers, len(sizes), pole)
    with ThreadPoolExecutor(max_workers=thread_count(threads)) as pool:
        batches = pool.map(
            lambda job: _walk_batch(targets, cumulative, start, job[0], job[1], n, cells),
            zip(sizes, seeds),
        )
        hits = sum(batches, np.zeros(cells, dtype=np.int64))

    return EllipticMeasureVector(op.boundary, hits / walkers, tuple(pole))
