"""Brute-force reference implementations.

Everything here is deliberately naive, pure Python, and shares no code with
the kernels it checks.
"""

from __future__ import annotations

import heapq
import math
from itertools import permutations


def figop_brute_force(times, prizes, budget: float, gamma: float, start: int = 0):
    """Best (score, path) over every ordered subset of prize nodes within budget."""
    n = len(prizes)
    others = [i for i in range(n) if i != start]
    best = (prizes[start], [start])

    def dfs(path, t, s, left):
        nonlocal best
        if s > best[0]:
            best = (s, list(path))
        for v in left:
            nt = t + times[path[-1]][v]
            if nt > budget:
                continue
            path.append(v)
            dfs(path, nt, s + prizes[v] * gamma ** nt, [u for u in left if u != v])
            path.pop()

    dfs([start], 0.0, prizes[start], others)
    return best


def widest_path_brute_force(snr, source: int, target: int = 0) -> float:
    """Max over simple routes of the weakest link; ``-inf`` when none exists."""
    n = len(snr)
    if source == target:
        return math.inf
    best = -math.inf
    middle = [k for k in range(n) if k not in (source, target)]
    for r in range(len(middle) + 1):
        for route in permutations(middle, r):
            hops = [source, *route, target]
            w = min(snr[a][b] for a, b in zip(hops, hops[1:]))
            best = max(best, w)
    return best


def all_pairs_dijkstra(n: int, edges) -> list[list[float]]:
    adj = [[] for _ in range(n)]
    for a, b, w in edges:
        adj[a].append((b, w))
        adj[b].append((a, w))
    out = []
    for s in range(n):
        dist = [math.inf] * n
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, w in adj[u]:
                if d + w < dist[v]:
                    dist[v] = d + w
                    heapq.heappush(heap, (d + w, v))
        out.append(dist)
    return out


def _h(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def walk_value(walk, step_times, footprint, probs, eps, gamma, lam, guide=None, guide_w=0.0) -> float:
    """Rollout objective of one walk, recomputed from scratch."""
    q = 1.0 - eps
    seen = set()
    val = 0.0
    for k, w in enumerate(walk[1:]):
        g = 0.0
        for j in footprint[w]:
            if j in seen:
                continue
            if probs[j] < q and _h(probs[j]) > _h(q):
                g += _h(probs[j]) - _h(q)
        seen.update(footprint[w])
        val += gamma ** k * (g - lam * step_times[k])
    if guide is not None:
        val += guide_w * (guide[walk[0]] - guide[walk[-1]])
    return val


def lcp_exhaustive(adj, times, footprint, probs, eps, start, depth, gamma, lam, guide=None, guide_w=0.0):
    """Best (value, walk) over every walk of ``depth`` steps (shorter only at dead ends)."""
    best = (-math.inf, [start])

    def rec(walk, st):
        nonlocal best
        nbrs = adj[walk[-1]]
        if len(walk) == depth + 1 or not nbrs:
            v = walk_value(walk, st, footprint, probs, eps, gamma, lam, guide, guide_w)
            if v > best[0]:
                best = (v, list(walk))
            return
        for m in nbrs:
            walk.append(m)
            st.append(times[(walk[-2], m)])
            rec(walk, st)
            walk.pop()
            st.pop()

    rec([start], [])
    return best


def windowed_mean_recount(cmd, meas, window: int):
    """Per-sample mean of (cmd - meas) over the trailing ``window`` samples; None until full."""
    out = []
    for k in range(len(cmd)):
        if k + 1 < window:
            out.append(None)
            continue
        out.append(sum(cmd[i] - meas[i] for i in range(k + 1 - window, k + 1)) / window)
    return out


def lens_area(r1: float, r2: float, d: float) -> float:
    """Intersection area of two disks with centre distance ``d``."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    k = 0.5 * math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return a1 + a2 - k


def fall_recovery_probability(p: float, n: int) -> float:
    return 1.0 - (1.0 - p) ** n
