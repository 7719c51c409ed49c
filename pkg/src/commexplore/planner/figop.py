"""Global planner: frontloaded orienteering over frontier prizes, solved by Guided Local Search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..irm import Irm, shortest_path
from ..kernels import all_pairs_min_time, gls_local_search, greedy_insertion, path_score
from ..world import CoverageBelief, WorldGraph
from .coverage import CoverageModel


class InvalidPathError(ValueError):
    pass


@dataclass
class FigOpInstance:
    """Index 0 is the start node; ``node_ids`` maps instance indices to graph ids."""

    node_ids: list[int]
    prizes: np.ndarray
    times: np.ndarray
    budget: float
    in_window: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    @property
    def start(self) -> int:
        return 0

    def __len__(self):
        return len(self.node_ids)


def _dense(ids: list[int], edges) -> np.ndarray:
    pos = {n: k for k, n in enumerate(ids)}
    w = np.full((len(ids), len(ids)), np.inf)
    for a, b, t in edges:
        i, j = pos.get(a), pos.get(b)
        if i is None or j is None:
            continue
        if t < w[i, j]:
            w[i, j] = w[j, i] = t
    return w


def build_figop(irm: Irm, belief: CoverageBelief, pose, budget: float, window_radius: float,
                coverage: CoverageModel, world: WorldGraph, start: int,
                exclude=(), max_frontiers: int | None = None) -> FigOpInstance:
    """Prize every frontier by its expected observation gain and price travel between them.

    Pairs inside the local window use shortest paths over world edges among
    known nodes there; every other pair uses the topological IRM distance.
    The combined matrix is closed under shortest paths afterwards.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    ids = sorted(irm.nodes)
    if start not in irm.nodes:
        raise ValueError("start node is not in the IRM")
    excluded = set(exclude)
    fr = [f for f in irm.frontiers() if f != start and f not in excluded]
    prizes = {f: coverage.gain(belief, f) for f in fr}
    fr = [f for f in fr if prizes[f] > 0.0]
    if max_frontiers is not None and len(fr) > max_frontiers:
        # keep the nearest ones; they dominate any frontloaded objective
        p = np.asarray(pose, dtype=float)[:3]
        fr = sorted(fr, key=lambda f: (float(np.linalg.norm(np.asarray(irm.nodes[f].position) - p)), f))
        fr = sorted(fr[:max_frontiers])
    node_ids = [start] + fr
    n = len(node_ids)
    if n == 1:
        return FigOpInstance(node_ids, np.zeros(1), np.zeros((1, 1)), float(budget), np.ones(1, bool))

    pose = np.asarray(pose, dtype=float)[:3]
    inwin_all = {i for i in ids if np.linalg.norm(np.asarray(irm.nodes[i].position) - pose) <= window_radius}
    inwin_all.add(start)
    topo = all_pairs_min_time(_dense(ids, ((e.a, e.b, e.expected_time) for e in irm.edges.values())))
    win_ids = sorted(inwin_all)
    metric_edges = []
    for a in win_ids:
        for b, e in world.adj[a]:
            if b in inwin_all and a < b:
                metric_edges.append((a, b, e.length / e.speed))
    metric = all_pairs_min_time(_dense(win_ids, metric_edges))

    gi = {v: k for k, v in enumerate(ids)}
    wi = {v: k for k, v in enumerate(win_ids)}
    inwin = np.array([v in inwin_all for v in node_ids])
    t = np.empty((n, n))
    for i, a in enumerate(node_ids):
        for j, b in enumerate(node_ids):
            c = topo[gi[a], gi[b]]
            if inwin[i] and inwin[j]:
                m = metric[wi[a], wi[b]]
                if math.isfinite(m):
                    c = m
            t[i, j] = c
    t = np.minimum(t, t.T)
    t = all_pairs_min_time(t)
    pz = np.array([0.0] + [prizes[f] for f in fr])
    return FigOpInstance(node_ids, pz, t, float(budget), inwin)


def figop_score(instance: FigOpInstance, path, gamma: float) -> float:
    """Discounted prize sum, each prize counted at its first arrival time."""
    path = list(path)
    if not path:
        return 0.0
    if path[0] != instance.start:
        raise InvalidPathError("path must begin at the start node")
    seen = set()
    t = 0.0
    s = 0.0
    prev = None
    for v in path:
        if prev is not None:
            t += float(instance.times[prev, v])
        if t > instance.budget + 1e-9:
            raise InvalidPathError(f"path time {t:.3f}s exceeds budget {instance.budget:.3f}s")
        if v not in seen:
            seen.add(v)
            s += float(instance.prizes[v]) * gamma ** t
        prev = v
    return s


def path_time(instance: FigOpInstance, path) -> float:
    return float(sum(instance.times[a, b] for a, b in zip(path, path[1:])))


def gls_solve(instance: FigOpInstance, gamma: float, iterations: int, rng: np.random.Generator,
              mu_factor: float = 0.3, history: list | None = None) -> list[int]:
    """Guided Local Search from a greedy-insertion seed.

    After each local optimum the used edge with the largest
    ``time / (1 + penalty)`` is penalised. The returned path is the best
    feasible path found on the unpenalised objective. ``history`` (if given)
    receives the incumbent score after every iteration.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = len(instance)
    if n <= 1 or instance.budget <= 0:
        if history is not None:
            history.extend([0.0] * iterations)
        return [instance.start]
    tmat = np.ascontiguousarray(instance.times, dtype=np.float64)
    prizes = np.ascontiguousarray(instance.prizes, dtype=np.float64)
    order = rng.permutation(n).astype(np.int64)
    path = np.zeros(n, np.int64)
    plen = greedy_insertion(instance.start, tmat, prizes, gamma, instance.budget, path)
    best = path[:plen].copy()
    best_score = path_score(path, plen, tmat, prizes, gamma)[0]
    pen = np.zeros((n, n))
    mu = mu_factor * best_score / max(plen - 1, 1)
    if mu <= 0.0:
        pos = prizes[prizes > 0]
        mu = mu_factor * (float(pos.mean()) if pos.size else 1.0)
    for _ in range(iterations):
        plen = gls_local_search(path, plen, tmat, prizes, gamma, instance.budget, pen, mu, order)
        s = path_score(path, plen, tmat, prizes, gamma)[0]
        if s > best_score + 1e-12:
            best_score = s
            best = path[:plen].copy()
        if history is not None:
            history.append(float(best_score))
        if plen < 2:
            continue
        util = np.array([tmat[path[k], path[k + 1]] / (1.0 + pen[path[k], path[k + 1]]) for k in range(plen - 1)])
        top = util.max()
        for k in np.flatnonzero(util >= top - 1e-12):
            a, b = path[k], path[k + 1]
            pen[a, b] += 1.0
            pen[b, a] += 1.0
    return [int(v) for v in best]


def expand_path(irm: Irm, instance: FigOpInstance, path) -> list[int]:
    """Graph node sequence visiting the stops of ``path`` via IRM shortest paths."""
    ids = [instance.node_ids[path[0]]] if path else []
    for a, b in zip(path, path[1:]):
        seg = shortest_path(irm, instance.node_ids[a], instance.node_ids[b])
        if seg is None:
            break
        ids.extend(seg[1:])
    return ids
