"""Information roadmap: the shared belief graph of explored space."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

import numpy as np

from .events import canonical


class NodeKind(str, Enum):
    FRONTIER = "Frontier"
    VISITED = "Visited"
    CHECKPOINT = "CommsCheckpoint"
    RADIO = "Radio"
    BASE = "Base"


KIND_RANK = {NodeKind.FRONTIER: 0, NodeKind.VISITED: 1, NodeKind.CHECKPOINT: 2, NodeKind.RADIO: 3,
             NodeKind.BASE: 4}


class CommsClass(str, Enum):
    NONE = "None"
    WEAK = "Weak"
    STRONG = "Strong"


CLASS_RANK = {CommsClass.NONE: 0, CommsClass.WEAK: 1, CommsClass.STRONG: 2}

T_STRONG_DB = 20.0
T_NONE_DB = 5.0
MIN_SUCCESS = 1e-9


@dataclass
class IrmNode:
    node_id: int
    position: tuple
    kind: NodeKind
    snr_db: float | None = None
    comms_class: CommsClass | None = None
    snr_stamp: int = -1  # mesh revision the annotation was computed from

    @property
    def explored(self) -> bool:
        return self.kind != NodeKind.FRONTIER


@dataclass(frozen=True)
class IrmEdge:
    a: int
    b: int
    expected_time: float
    success_prob: float


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class Irm:
    def __init__(self):
        self.nodes: dict[int, IrmNode] = {}
        self.edges: dict[tuple[int, int], IrmEdge] = {}
        self.adj: dict[int, set[int]] = {}
        self.revision = 0

    def __len__(self):
        return len(self.nodes)

    def copy(self) -> "Irm":
        out = Irm()
        out.nodes = {k: replace(v) for k, v in self.nodes.items()}
        out.edges = dict(self.edges)
        out.adj = {k: set(v) for k, v in self.adj.items()}
        out.revision = self.revision
        return out

    # -- mutation -----------------------------------------------------------
    def _put_node(self, node: IrmNode) -> None:
        self.nodes[node.node_id] = node
        self.adj.setdefault(node.node_id, set())

    def _put_edge(self, edge: IrmEdge) -> None:
        self.edges[_key(edge.a, edge.b)] = edge
        self.adj.setdefault(edge.a, set()).add(edge.b)
        self.adj.setdefault(edge.b, set()).add(edge.a)

    def bump(self) -> None:
        self.revision += 1

    # -- queries ------------------------------------------------------------
    def edge(self, a: int, b: int) -> IrmEdge | None:
        return self.edges.get(_key(a, b))

    def neighbors(self, n: int) -> list[int]:
        return sorted(self.adj.get(n, ()))

    def frontiers(self) -> list[int]:
        return sorted(n for n, v in self.nodes.items() if v.kind == NodeKind.FRONTIER)

    def explored_nodes(self) -> list[int]:
        return sorted(n for n, v in self.nodes.items() if v.explored)

    def base(self) -> int | None:
        for n, v in self.nodes.items():
            if v.kind == NodeKind.BASE:
                return n
        return None

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        return np.array([self.nodes[i].position for i in ids], dtype=float).reshape(-1, 3)

    def canonical(self) -> tuple:
        """Revision-free content, for equality checks."""
        nodes = tuple(sorted((n.node_id, tuple(n.position), n.kind.value, n.snr_db,
                              n.comms_class.value if n.comms_class else None) for n in self.nodes.values()))
        edges = tuple(sorted((e.a, e.b, e.expected_time, e.success_prob) for e in self.edges.values()))
        return nodes, edges


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def update_from_traversal(irm: Irm, node_id: int, world) -> list[tuple]:
    """Mark ``node_id`` visited and add its unseen world neighbours as frontiers.

    Returns the list of changes (empty when the call changed nothing).
    """
    delta = []
    pos = tuple(float(x) for x in world.position(node_id))
    cur = irm.nodes.get(node_id)
    want = NodeKind.BASE if node_id == world.base else NodeKind.VISITED
    if cur is None:
        irm._put_node(IrmNode(node_id, pos, want))
        delta.append(("node", node_id, want.value))
    elif KIND_RANK[cur.kind] < KIND_RANK[want]:
        cur.kind = want
        delta.append(("node", node_id, want.value))
    for m, e in world.adj[node_id]:
        if m not in irm.nodes:
            mk = NodeKind.BASE if m == world.base else NodeKind.FRONTIER
            irm._put_node(IrmNode(m, tuple(float(x) for x in world.position(m)), mk))
            delta.append(("node", m, mk.value))
        if irm.edge(node_id, m) is None:
            irm._put_edge(IrmEdge(min(node_id, m), max(node_id, m), e.length / e.speed,
                                  max(1.0 - e.risk, MIN_SUCCESS)))
            delta.append(("edge", min(node_id, m), max(node_id, m)))
    if delta:
        irm.bump()
    return delta


def update_from_observation(irm: Irm, node_ids, world) -> list[tuple]:
    """Sensed nodes become explored; their unseen neighbours become frontiers."""
    delta = []
    for n in sorted(int(i) for i in node_ids):
        cur = irm.nodes.get(n)
        if cur is not None and cur.explored and all(m in irm.nodes for m, _ in world.adj[n]):
            continue
        delta.extend(update_from_traversal(irm, n, world))
    return delta


def extract_local(irm: Irm, pose, window_radius: float, current_node: int) -> Irm:
    """Induced subgraph on nodes within ``window_radius`` of ``pose`` plus the current node."""
    if not window_radius > 0:
        raise ValueError("window_radius must be positive")
    ids = sorted(irm.nodes)
    keep = {current_node}
    if ids:
        d = np.linalg.norm(irm.positions(ids) - np.asarray(pose, dtype=float)[:3], axis=1)
        keep.update(i for i, di in zip(ids, d) if di <= window_radius)
    out = Irm()
    for n in sorted(keep):
        if n in irm.nodes:
            out._put_node(replace(irm.nodes[n]))
    for (a, b), e in irm.edges.items():
        if a in keep and b in keep:
            out._put_edge(e)
    out.revision = irm.revision
    return out


def classify_checkpoint(snr_db: float, t_strong: float = T_STRONG_DB, t_none: float = T_NONE_DB) -> CommsClass:
    if snr_db >= t_strong:
        return CommsClass.STRONG
    if snr_db >= t_none:
        return CommsClass.WEAK
    return CommsClass.NONE


# --------------------------------------------------------------------------
# merging
# --------------------------------------------------------------------------


def _combine(a: IrmNode, b: IrmNode) -> IrmNode:
    kind = a.kind if KIND_RANK[a.kind] >= KIND_RANK[b.kind] else b.kind

    def ann(n):
        return (n.snr_stamp, -math.inf if n.snr_db is None else n.snr_db)

    src = a if ann(a) >= ann(b) else b
    pos = min(a.position, b.position) if a.node_id == b.node_id else a.position
    return IrmNode(a.node_id, pos, kind, src.snr_db, src.comms_class, src.snr_stamp)


def merge(irm_a: Irm, irm_b: Irm, merge_radius: float = 1.0) -> Irm:
    """Union of two roadmaps sharing the base frame.

    Nodes closer than ``merge_radius`` collapse onto the lowest id. The kept
    node takes the higher-information kind and the most recent SNR annotation.
    """
    by_id: dict[int, IrmNode] = {}
    for src in (irm_a, irm_b):
        for n, node in src.nodes.items():
            by_id[n] = _combine(by_id[n], node) if n in by_id else replace(node)

    rep: dict[int, int] = {}
    kept: list[int] = []
    buckets: dict[tuple, list[int]] = {}
    cell = max(merge_radius, 1e-9)
    for n in sorted(by_id):
        p = np.asarray(by_id[n].position, dtype=float)
        key = tuple(int(math.floor(c / cell)) for c in p)
        target = None
        if merge_radius > 0:
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        for k in buckets.get((key[0] + dx, key[1] + dy, key[2] + dz), ()):
                            if np.linalg.norm(np.asarray(by_id[k].position) - p) < merge_radius:
                                if target is None or k < target:
                                    target = k
        if target is None:
            rep[n] = n
            kept.append(n)
            buckets.setdefault(key, []).append(n)
        else:
            rep[n] = target
            by_id[target] = _combine(by_id[target], replace(by_id[n], node_id=target))

    out = Irm()
    for n in kept:
        out._put_node(by_id[n])
    for src in (irm_a, irm_b):
        for e in src.edges.values():
            a, b = rep[e.a], rep[e.b]
            if a == b:
                continue
            a, b = _key(a, b)
            new = IrmEdge(a, b, e.expected_time, e.success_prob)
            old = out.edge(a, b)
            if old is None or (new.expected_time, -new.success_prob) < (old.expected_time, -old.success_prob):
                out._put_edge(new)
    out.revision = max(irm_a.revision, irm_b.revision) + 1
    return out


# --------------------------------------------------------------------------
# travel and checkpoints
# --------------------------------------------------------------------------


def travel_times(irm: Irm, source: int) -> dict[int, float]:
    """Dijkstra over expected edge times from ``source``."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, n = heapq.heappop(heap)
        if n in done:
            continue
        done.add(n)
        for m in irm.adj.get(n, ()):
            nd = d + irm.edges[_key(n, m)].expected_time
            if nd < dist.get(m, math.inf):
                dist[m] = nd
                heapq.heappush(heap, (nd, m))
    return dist


def shortest_path(irm: Irm, source: int, target: int) -> list[int] | None:
    """Node sequence of a minimum expected-time path (ties to lower ids)."""
    dist = {source: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, n = heapq.heappop(heap)
        if n in done:
            continue
        done.add(n)
        if n == target:
            break
        for m in sorted(irm.adj.get(n, ())):
            nd = d + irm.edges[_key(n, m)].expected_time
            if nd < dist.get(m, math.inf):
                dist[m] = nd
                prev[m] = n
                heapq.heappush(heap, (nd, m))
    if target not in done:
        return None
    path = [target]
    while path[-1] != source:
        path.append(prev[path[-1]])
    return path[::-1]


def strong_candidates(irm: Irm) -> set[int]:
    strong = {n for n, v in irm.nodes.items() if v.comms_class == CommsClass.STRONG}
    out = set(strong)
    for s in strong:
        for m in irm.adj.get(s, ()):
            if irm.nodes[m].kind == NodeKind.FRONTIER:
                out.add(m)
    return out


def nearest_strong_checkpoint(irm: Irm, from_node: int, toward_base: bool = False,
                              current_target: int | None = None) -> int | None:
    """Closest Strong checkpoint (or frontier next to one) by expected travel time.

    With ``toward_base`` only candidates strictly closer to the base than
    ``current_target`` qualify. Ties go to the lower node id.
    """
    cands = strong_candidates(irm)
    if not cands:
        return None
    dist = travel_times(irm, from_node)
    if toward_base:
        base = irm.base()
        if base is None or current_target is None:
            return None
        to_base = travel_times(irm, base)
        limit = to_base.get(current_target, math.inf)
        cands = {c for c in cands if to_base.get(c, math.inf) < limit}
    best = min(((dist[c], c) for c in cands if c in dist), default=None)
    return None if best is None else best[1]


# --------------------------------------------------------------------------
# dump
# --------------------------------------------------------------------------


def dump_records(irm: Irm, tick: int | None = None) -> list[dict]:
    recs = []
    for n in sorted(irm.nodes):
        v = irm.nodes[n]
        recs.append({"type": "node", "rev": irm.revision, "tick": tick, "id": n, "pos": list(v.position),
                     "kind": v.kind.value, "snr_db": v.snr_db,
                     "comms_class": v.comms_class.value if v.comms_class else None})
    for k in sorted(irm.edges):
        e = irm.edges[k]
        recs.append({"type": "edge", "rev": irm.revision, "tick": tick, "a": e.a, "b": e.b,
                     "expected_time": e.expected_time, "success_prob": e.success_prob})
    return recs


def dump_jsonl(irm: Irm, fh, tick: int | None = None) -> None:
    for rec in dump_records(irm, tick):
        fh.write(json.dumps(canonical(rec), sort_keys=True) + "\n")
