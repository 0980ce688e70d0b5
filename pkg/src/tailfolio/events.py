"""Correlated event sampling through the copula.

Whitened draws dz come from the deterministic normal stream, are colored by
the Cholesky factor (dy rows = dz rows times C'), and each dy column is pushed
through the inverse marginal map to produce increments dx. Batches are
reproducible bit for bit from (model, n, seed, lanes): lane j consumes stream
index j of the seed, and lanes are merged in lane order, so a thread pool and
a serial loop produce identical batches.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .copula import CopulaModel, cholesky_lower  # noqa: F401  (cholesky re-export)
from .copula import from_gaussian
from .errors import OutOfDomain
from .rng import NormalStream, standard_normal_stream  # noqa: F401


@dataclass(frozen=True, eq=False)
class EventBatch:
    """One batch of sampled events with its provenance."""

    dz: np.ndarray            # whitened draws, shape (n, N)
    dy: np.ndarray            # correlated normals, dz @ C'
    dx: np.ndarray            # increments per channel
    seed: int
    lanes: int
    channels: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.dz.shape[0]

    def write_csv(self, path) -> None:
        from .modelfile import write_events_csv
        write_events_csv(path, self)


def _lane_chunk(model: CopulaModel, count: int, seed: int, lane: int):
    dim = model.dim
    dz = NormalStream(seed, stream=lane).draw(count * dim).reshape(count, dim)
    dy = dz @ model.correlation.cholesky.T
    dx = np.empty_like(dy)
    for j, marg in enumerate(model.marginals):
        dx[:, j] = from_gaussian(marg, dy[:, j])
    return dz, dy, dx


def sample_events(model: CopulaModel, n: int, seed: int, lanes: int = 1,
                  parallel: bool = False) -> EventBatch:
    """Draw n correlated events; identical output for any execution schedule."""
    n = int(n)
    lanes = int(lanes)
    if n < 0:
        raise OutOfDomain("n must be non-negative")
    if lanes < 1:
        raise OutOfDomain("lanes must be >= 1")
    base = n // lanes
    counts = [base + (1 if i < n % lanes else 0) for i in range(lanes)]

    if parallel and lanes > 1:
        with ThreadPoolExecutor(max_workers=min(lanes, 8)) as pool:
            parts = list(pool.map(
                lambda i: _lane_chunk(model, counts[i], seed, i), range(lanes)))
    else:
        parts = [_lane_chunk(model, counts[i], seed, i) for i in range(lanes)]

    dz = np.concatenate([p[0] for p in parts], axis=0) if parts else np.empty((0, model.dim))
    dy = np.concatenate([p[1] for p in parts], axis=0) if parts else np.empty((0, model.dim))
    dx = np.concatenate([p[2] for p in parts], axis=0) if parts else np.empty((0, model.dim))
    return EventBatch(dz=dz, dy=dy, dx=dx, seed=int(seed), lanes=lanes,
                      channels=model.channels)
