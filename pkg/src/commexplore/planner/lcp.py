"""Local planner: multi-heuristic rollouts over the local IRM window."""

from __future__ import annotations

import math

import numpy as np

from ..irm import Irm, travel_times
from ..kernels import lcp_rollouts, sequence_value
from ..world import CoverageBelief
from .core import GuidanceParam, Policy, PolicyOrigin, RewardParams, policy_success_prob, utility_from_value
from .coverage import CoverageModel


def _csr_adjacency(view: Irm, ids: list[int]):
    pos = {n: k for k, n in enumerate(ids)}
    ptr = np.zeros(len(ids) + 1, np.int64)
    idx, tm = [], []
    for k, n in enumerate(ids):
        for m in view.neighbors(n):
            idx.append(pos[m])
            tm.append(view.edge(n, m).expected_time)
        ptr[k + 1] = len(idx)
    return ptr, np.asarray(idx, np.int64), np.asarray(tm, np.float64)


def guidance_distances(view: Irm, ids: list[int], guidance: GuidanceParam | None,
                       target_position=None) -> np.ndarray:
    """Distance-to-target per node: travel time inside the view when the target is
    there and reachable, straight-line metres otherwise, zeros without guidance."""
    n = len(ids)
    if guidance is None or guidance.target is None:
        return np.zeros(n)
    if guidance.target in view.nodes:
        tt = travel_times(view, guidance.target)
        if all(i in tt for i in ids):
            return np.array([tt[i] for i in ids])
    if target_position is None:
        return np.zeros(n)
    p = np.asarray(target_position, dtype=float)[:3]
    return np.linalg.norm(view.positions(ids) - p, axis=1)


def lcp_plan(view: Irm, belief: CoverageBelief, guidance: GuidanceParam | None, params: RewardParams,
             rng: np.random.Generator, start: int, coverage: CoverageModel, n_rollouts: int = 512,
             heuristic_mix=(0.5, 0.3, 0.2), guide_weight: float = 0.05, target_position=None) -> Policy:
    """Best of ``n_rollouts`` rollouts of ``params.horizon`` steps from ``start``."""
    if start not in view.nodes:
        raise ValueError("start node is not in the local view")
    ids = sorted(view.nodes)
    k0 = ids.index(start)
    adj_ptr, adj_idx, adj_time = _csr_adjacency(view, ids)
    cov_ptr, cov_idx = coverage.subset(ids)
    guide = guidance_distances(view, ids, guidance, target_position)
    mix = np.asarray(heuristic_mix, dtype=float)
    heur = rng.choice(3, size=(n_rollouts, params.horizon), p=mix / mix.sum()).astype(np.int64)
    uni = rng.random((n_rollouts, params.horizon))
    val, seq, length, gains, times = lcp_rollouts(
        adj_ptr, adj_idx, adj_time, cov_ptr, cov_idx, belief.covered_prob, belief.eps_cov, k0,
        params.horizon, heur, uni, guide, guide_weight, params.gamma, params.lambda_cost)
    nodes = [ids[int(k)] for k in seq[:length]]
    return Policy(nodes, [float(g) for g in gains[:length - 1]], [float(t) for t in times[:length - 1]],
                  utility_from_value(val), policy_success_prob(nodes, view), PolicyOrigin.LOCAL, float(val))


def evaluate_sequence(nodes: list[int], irm: Irm, belief: CoverageBelief, coverage: CoverageModel,
                      params: RewardParams, guide: dict | None = None, guide_weight: float = 0.0,
                      origin: PolicyOrigin = PolicyOrigin.GLOBAL) -> Policy:
    """Score a fixed node sequence with the rollout objective and wrap it as a Policy."""
    step_time = np.array([irm.edge(a, b).expected_time for a, b in zip(nodes, nodes[1:])], np.float64)
    cov_ptr, cov_idx = coverage.subset(nodes)
    g = np.array([(guide or {}).get(v, 0.0) for v in nodes], np.float64)
    if not np.all(np.isfinite(g)):
        g = np.zeros(len(nodes))
    seq = np.arange(len(nodes), dtype=np.int64)
    val, gains = sequence_value(seq, len(nodes), step_time, cov_ptr, cov_idx, belief.covered_prob,
                                belief.eps_cov, g, guide_weight, params.gamma, params.lambda_cost)
    if not math.isfinite(val):
        val = 0.0
    return Policy(list(nodes), [float(x) for x in gains], [float(x) for x in step_time],
                  utility_from_value(val), policy_success_prob(nodes, irm), origin, float(val))
