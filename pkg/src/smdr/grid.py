"""Voxel lattice as an undirected 4-neighbor graph with a trail decomposition.

Node indices are row-major: ``node = row * width + col``.  The trail
decomposition is the set of full rows plus full columns, so every lattice
edge is covered by exactly one trail and every trail is a simple path.
Rows or columns of length one emit no trail.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridGraph:
    width: int
    height: int
    edges: np.ndarray  # (n_edges, 2) node-index pairs
    trails: tuple[np.ndarray, ...]

    @property
    def n_nodes(self) -> int:
        return self.width * self.height

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])


def build_grid(width: int, height: int) -> GridGraph:
    """Build the 4-neighbor lattice graph for a ``width x height`` grid."""
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
    idx = np.arange(width * height, dtype=np.int64).reshape(height, width)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    edges = np.concatenate([horiz.reshape(-1, 2), vert.reshape(-1, 2)], axis=0)

    trails: list[np.ndarray] = []
    if width > 1:
        trails.extend(idx[r, :].copy() for r in range(height))
    if height > 1:
        trails.extend(idx[:, c].copy() for c in range(width))
    return GridGraph(width=width, height=height, edges=edges, trails=tuple(trails))
