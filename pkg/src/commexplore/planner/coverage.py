"""Static per-node sensor footprints in CSR form."""

from __future__ import annotations

import numpy as np

from ..world import CoverageBelief, WorldGraph, nodes_in_range
from ..kernels import _node_gain
from .core import adaptive_coverage_radius


class CoverageModel:
    """For each world node, the belief indices an observation there would cover.

    The radius at a node follows the adaptive rule applied to that node's
    clearance annotation.
    """

    def __init__(self, world: WorldGraph, sensor_max: float, kappa: float = 2.0):
        self.world = world
        self.radius = np.array([adaptive_coverage_radius(c, sensor_max, kappa) for c in world.clearance])
        lists = [nodes_in_range(world.positions, world.positions[k], self.radius[k]) for k in range(len(world))]
        self.ptr = np.zeros(len(world) + 1, np.int64)
        self.ptr[1:] = np.cumsum([len(x) for x in lists])
        self.idx = np.concatenate(lists).astype(np.int64) if lists else np.zeros(0, np.int64)

    def radius_at(self, node_id: int) -> float:
        return float(self.radius[self.world.index[node_id]])

    def subset(self, node_ids) -> tuple[np.ndarray, np.ndarray]:
        """CSR restricted to ``node_ids`` (in that order), still indexing the full belief."""
        rows = [self.idx[self.ptr[k]:self.ptr[k + 1]] for k in (self.world.index[n] for n in node_ids)]
        ptr = np.zeros(len(rows) + 1, np.int64)
        ptr[1:] = np.cumsum([len(r) for r in rows])
        idx = np.concatenate(rows).astype(np.int64) if rows else np.zeros(0, np.int64)
        return ptr, idx

    def gain(self, belief: CoverageBelief, node_id: int) -> float:
        """Expected entropy reduction of observing at ``node_id``."""
        k = self.world.index[node_id]
        stamp = np.full(len(belief.covered_prob), -1, np.int64)
        return float(_node_gain(k, 0, self.ptr, self.idx, belief.covered_prob, stamp, belief.eps_cov))
