import math
from pathlib import Path

import pytest

from commexplore.world import Edge, WorldGraph

ROOT = Path(__file__).resolve().parent.parent


def h2(p: float) -> float:
    """Reference binary entropy in bits, written out independently."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def line_world(n: int, spacing: float = 5.0, risk: float = 0.0, clearance: float = 2.0) -> WorldGraph:
    ids = list(range(n))
    pos = [(spacing * i, 0.0, 0.0) for i in ids]
    edges = [Edge(i, i + 1, spacing, 1.0, risk) for i in range(n - 1)]
    return WorldGraph(ids, pos, [clearance] * n, edges, 0)


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return ROOT / "scenarios"


def grid_world(side: int, spacing: float = 5.0, risk: float = 0.0, clearance: float = 1.0) -> WorldGraph:
    ids = list(range(side * side))
    pos = [(spacing * (i % side), spacing * (i // side), 0.0) for i in ids]
    edges = []
    for i in ids:
        if i % side < side - 1:
            edges.append(Edge(i, i + 1, spacing, 1.0, risk))
        if i // side < side - 1:
            edges.append(Edge(i, i + side, spacing, 1.0, risk))
    return WorldGraph(ids, pos, [clearance] * len(ids), edges, 0)
