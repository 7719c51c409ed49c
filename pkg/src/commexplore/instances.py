"""Seeded random problem instances for the solver-versus-oracle comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .irm import Irm, update_from_traversal
from .planner import CoverageModel, FigOpInstance, RewardParams
from .world import CoverageBelief, Edge, WorldGraph


def random_figop(seed: int, max_prizes: int = 8) -> FigOpInstance:
    """Euclidean orienteering instance with 1..``max_prizes`` prize nodes plus a zero-prize start."""
    r = np.random.default_rng(seed)
    n = int(r.integers(1, max_prizes + 1)) + 1
    pts = r.uniform(0.0, 100.0, (n, 2))
    times = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    prizes = np.r_[0.0, r.uniform(0.0, 10.0, n - 1)]
    return FigOpInstance(list(range(n)), prizes, times, float(r.uniform(50.0, 300.0)))


def random_mesh_snr(seed: int, max_radios: int = 7, p_link: float = 0.6) -> np.ndarray:
    """Symmetric link-SNR matrix (dB) with ``-inf`` for missing links."""
    r = np.random.default_rng(seed)
    n = int(r.integers(2, max_radios + 1))
    m = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            if r.random() < p_link:
                m[i, j] = m[j, i] = round(float(r.uniform(-10.0, 60.0)), 3)
    return m


@dataclass
class LatticeInstance:
    world: WorldGraph
    irm: Irm
    belief: CoverageBelief
    coverage: CoverageModel
    params: RewardParams
    start: int

    def oracle_inputs(self) -> dict:
        """Plain-Python adjacency, step times and footprints for the exhaustive search."""
        ids = list(self.world.ids)
        adj = {i: self.irm.neighbors(i) for i in ids}
        times = {(a, b): self.irm.edge(a, b).expected_time for a in ids for b in adj[a]}
        cov = self.coverage
        fp = {i: [int(j) for j in cov.idx[cov.ptr[k]:cov.ptr[k + 1]]] for k, i in enumerate(ids)}
        return {"adj": adj, "times": times, "footprint": fp, "probs": self.belief.covered_prob.tolist()}


def lattice_lcp(seed: int, side: int = 4, depth: int = 5, spacing: float = 4.0) -> LatticeInstance:
    """Fully known ``side``×``side`` lattice with random speeds and a partly covered belief."""
    r = np.random.default_rng(seed)
    ids = list(range(side * side))
    pos = [(spacing * (i % side), spacing * (i // side), 0.0) for i in ids]
    edges = []
    for i in ids:
        x, y = i % side, i // side
        if x < side - 1:
            edges.append(Edge(i, i + 1, spacing, float(r.uniform(0.5, 1.5)), 0.0))
        if y < side - 1:
            edges.append(Edge(i, i + side, spacing, float(r.uniform(0.5, 1.5)), 0.0))
    world = WorldGraph(ids, pos, r.uniform(1.0, 3.0, len(ids)), edges, 0)
    irm = Irm()
    for i in ids:
        update_from_traversal(irm, i, world)
    belief = CoverageBelief.uniform(world)
    belief.covered_prob[r.random(len(ids)) < 0.4] = 1.0 - belief.eps_cov
    return LatticeInstance(world, irm, belief, CoverageModel(world, 10.0, 2.0),
                           RewardParams(0.95, 0.01, depth, 2), int(r.integers(len(ids))))
