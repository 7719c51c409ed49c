"""Ground-truth environment: traversal graph, coverage belief and robot motion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .config import WorldParams
from .events import EventKind, SimEvent


class Platform(str, Enum):
    WHEELED = "Wheeled"
    LEGGED = "Legged"
    AERIAL = "Aerial"


class Health(str, Enum):
    NOMINAL = "Nominal"
    STUCK = "Stuck"
    FALLEN = "Fallen"
    OUT_OF_SERVICE = "OutOfService"


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float
    speed: float
    risk: float
    slip: float | None = None  # fixed slip patch overriding the platform distribution

    @property
    def time(self) -> float:
        return self.length / self.speed

    def other(self, n: int) -> int:
        return self.v if n == self.u else self.u


@dataclass
class Occupancy:
    grid: np.ndarray  # bool, indexed [ix, iy]
    cell_size: float


class WorldGraph:
    def __init__(self, node_ids, positions, clearance, edges, base, occupancy=None):
        self.ids: list[int] = [int(i) for i in node_ids]
        self.index = {n: k for k, n in enumerate(self.ids)}
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.clearance = np.asarray(clearance, dtype=np.float64)
        self.edges: list[Edge] = list(edges)
        self.base = int(base)
        self.occupancy: Occupancy | None = occupancy
        self.adj: dict[int, list[tuple[int, Edge]]] = {n: [] for n in self.ids}
        self._edge: dict[tuple[int, int], Edge] = {}
        for e in self.edges:
            self.adj[e.u].append((e.v, e))
            self.adj[e.v].append((e.u, e))
            self._edge[(e.u, e.v)] = e
            self._edge[(e.v, e.u)] = e
        for n in self.adj:
            self.adj[n].sort(key=lambda t: t[0])

    def __len__(self):
        return len(self.ids)

    def position(self, n: int) -> np.ndarray:
        return self.positions[self.index[n]]

    def neighbors(self, n: int) -> list[int]:
        return [m for m, _ in self.adj[n]]

    def edge(self, a: int, b: int) -> Edge | None:
        return self._edge.get((a, b))

    def node_clearance(self, n: int) -> float:
        return float(self.clearance[self.index[n]])

    def reachable_from_base(self) -> set[int]:
        seen = {self.base}
        stack = [self.base]
        while stack:
            n = stack.pop()
            for m, _ in self.adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return seen

    def nearest_node(self, pose) -> int:
        d = np.linalg.norm(self.positions - np.asarray(pose, dtype=float), axis=1)
        return self.ids[int(np.argmin(d))]


# --------------------------------------------------------------------------
# coverage belief
# --------------------------------------------------------------------------


def binary_entropy(p):
    """Entropy in bits of a Bernoulli(p); exactly 0 at p in {0, 1}."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    m = (p > 0.0) & (p < 1.0)
    q = p[m]
    out[m] = -(q * np.log2(q) + (1.0 - q) * np.log2(1.0 - q))
    return out if out.ndim else float(out)


@dataclass
class CoverageBelief:
    positions: np.ndarray
    covered_prob: np.ndarray
    eps_cov: float = 1e-6

    @classmethod
    def uniform(cls, world: WorldGraph, prob: float = 0.5, eps_cov: float = 1e-6) -> "CoverageBelief":
        return cls(world.positions.copy(), np.full(len(world), float(prob)), eps_cov)

    def copy(self) -> "CoverageBelief":
        return CoverageBelief(self.positions, self.covered_prob.copy(), self.eps_cov)

    def covered_mask(self) -> np.ndarray:
        return self.covered_prob >= 1.0 - self.eps_cov

    def coverage_fraction(self) -> float:
        return float(self.covered_mask().mean()) if len(self.covered_prob) else 1.0


def entropy(belief: CoverageBelief) -> float:
    return float(np.sum(binary_entropy(belief.covered_prob)))


def nodes_in_range(positions: np.ndarray, pose, radius: float) -> np.ndarray:
    d = np.linalg.norm(positions - np.asarray(pose, dtype=np.float64), axis=1)
    return np.flatnonzero(d <= radius)


def observation_update(p: np.ndarray, eps_cov: float) -> np.ndarray:
    """Posterior covered_prob after an in-range observation.

    Nodes whose entropy is already at or below that of ``1 - eps_cov`` are left
    alone, so an observation can never raise entropy.
    """
    q = 1.0 - eps_cov
    hq = binary_entropy(q)
    h = binary_entropy(p)
    return np.where((p < q) & (h > hq), q, p)


def apply_observation(belief: CoverageBelief, pose, coverage_radius: float) -> float:
    """Mark every node within ``coverage_radius`` of ``pose`` as covered.

    Returns the entropy reduction in bits.
    """
    if coverage_radius <= 0:
        raise ValueError("coverage_radius must be positive")
    idx = nodes_in_range(belief.positions, pose, coverage_radius)
    if idx.size == 0:
        return 0.0
    old = belief.covered_prob[idx]
    new = observation_update(old, belief.eps_cov)
    belief.covered_prob[idx] = new
    return float(np.sum(binary_entropy(old) - binary_entropy(new)))


# --------------------------------------------------------------------------
# robots and motion
# --------------------------------------------------------------------------


@dataclass
class RobotState:
    robot_id: str
    platform: Platform
    node: int
    target: int | None = None
    progress: float = 0.0
    commanded_speed: float = 0.0
    measured_speed: float = 0.0
    health: Health = Health.NOMINAL
    odometer: float = 0.0
    max_speed: float = 1.0
    radios: int = 0
    stuck_kind: str = ""

    def at_node(self) -> bool:
        return self.target is None

    def pose(self, world: WorldGraph) -> np.ndarray:
        a = world.position(self.node)
        if self.target is None:
            return a.copy()
        b = world.position(self.target)
        return a + self.progress * (b - a)


@dataclass(frozen=True)
class Command:
    """Per-tick actuation request.

    kind: ``move`` (toward ``target`` at ``speed``), ``hold``, ``wiggle``,
    ``reset_planner``, ``stand`` (fall recovered).
    """

    kind: str
    target: int | None = None
    speed: float = 0.0
    duration: float = 0.0


def tick_failure_prob(risk: float, progress_fraction: float) -> float:
    """Hazard for covering ``progress_fraction`` of an edge with per-traversal ``risk``.

    Compounding over any split of a full traversal gives back ``risk``.
    """
    if progress_fraction <= 0.0 or risk <= 0.0:
        return 0.0
    if risk >= 1.0:
        return 1.0
    return -math.expm1(progress_fraction * math.log1p(-risk))


def step(world: WorldGraph, robots: dict[str, RobotState], commands: dict[str, Command], dt: float,
         rng: np.random.Generator, params: WorldParams | None = None, tick: int = 0):
    """Advance all robots by ``dt`` seconds. Mutates ``robots``; returns events.

    Robots are processed in id order. A moving robot draws two uniforms
    (slip, hazard) plus one more on a stuck onset; wiggling draws one.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    params = params or WorldParams()
    events: list[SimEvent] = []
    for rid in sorted(robots):
        r = robots[rid]
        cmd = commands.get(rid)
        r.commanded_speed = 0.0
        r.measured_speed = 0.0
        if cmd is None:
            continue
        if r.health == Health.OUT_OF_SERVICE:
            events.append(SimEvent(tick, rid, EventKind.COMMAND_REJECTED, {"cmd": cmd.kind, "health": r.health}))
            continue
        if r.health == Health.STUCK:
            events.extend(_step_stuck(r, cmd, dt, rng, params, tick))
            continue
        if r.health == Health.FALLEN:
            if cmd.kind == "stand":
                r.health = Health.NOMINAL
                events.append(SimEvent(tick, rid, EventKind.RECOVERED, {"from": "Fallen"}))
            else:
                events.append(SimEvent(tick, rid, EventKind.COMMAND_REJECTED, {"cmd": cmd.kind, "health": r.health}))
            continue
        if cmd.kind != "move":
            continue
        events.extend(_step_move(world, r, cmd, dt, rng, params, tick))
    return events


def _step_stuck(r: RobotState, cmd: Command, dt, rng, params: WorldParams, tick):
    if cmd.kind == "move":
        # still commanded, no motion: this is what the stuck monitor sees
        r.commanded_speed = cmd.speed
        return [SimEvent(tick, r.robot_id, EventKind.COMMAND_REJECTED, {"cmd": "move", "health": r.health})]
    if cmd.kind == "reset_planner" and r.stuck_kind == "virtual":
        r.health = Health.NOMINAL
        r.stuck_kind = ""
        return [SimEvent(tick, r.robot_id, EventKind.STUCK_CLEARED, {"by": "reset_planner"})]
    if cmd.kind == "wiggle":
        r.commanded_speed = cmd.speed
        # clearing probability p_wiggle_clear is spread over the wiggle duration
        p = 1.0 - (1.0 - params.p_wiggle_clear) ** (dt / max(cmd.duration, dt))
        if rng.random() < p:
            r.health = Health.NOMINAL
            r.stuck_kind = ""
            return [SimEvent(tick, r.robot_id, EventKind.STUCK_CLEARED, {"by": "wiggle"})]
    return []


def _step_move(world: WorldGraph, r: RobotState, cmd: Command, dt, rng, params: WorldParams, tick):
    events = []
    if r.target is None:
        if cmd.target is None or world.edge(r.node, cmd.target) is None:
            return [SimEvent(tick, r.robot_id, EventKind.COMMAND_REJECTED, {"cmd": "move", "target": cmd.target})]
        r.target = cmd.target
        r.progress = 0.0
    elif cmd.target == r.node:
        # reverse along the current edge
        r.node, r.target = r.target, r.node
        r.progress = 1.0 - r.progress
    e = world.edge(r.node, r.target)
    u_slip = rng.random()
    u_fail = rng.random()
    slip = e.slip if e.slip is not None else u_slip * params.slip_max.get(r.platform.value, 0.0)
    r.commanded_speed = cmd.speed
    r.measured_speed = cmd.speed * (1.0 - slip)
    travel = r.measured_speed * dt
    remaining = (1.0 - r.progress) * e.length
    moved = min(travel, remaining)
    frac = moved / e.length
    r.progress = r.progress + frac
    r.odometer += moved
    if moved >= remaining:
        events.append(SimEvent(tick, r.robot_id, EventKind.MOVED,
                               {"from": r.node, "to": r.target, "odometer": r.odometer}))
        r.node = r.target
        r.target = None
        r.progress = 0.0
    if u_fail < tick_failure_prob(e.risk, frac):
        if r.platform == Platform.LEGGED:
            r.health = Health.FALLEN
            events.append(SimEvent(tick, r.robot_id, EventKind.FALL_ONSET, {"edge": [e.u, e.v]}))
        else:
            r.health = Health.STUCK
            r.stuck_kind = "virtual" if rng.random() < params.p_virtual_stuck else "physical"
            events.append(SimEvent(tick, r.robot_id, EventKind.STUCK_ONSET,
                                   {"edge": [e.u, e.v], "stuck_kind": r.stuck_kind}))
    return events


def clear_fault(r: RobotState) -> None:
    r.health = Health.NOMINAL
    r.stuck_kind = ""


def stand_command() -> Command:
    return Command("stand")


def snapshot(robots: dict[str, RobotState]) -> dict[str, RobotState]:
    return {k: replace(v) for k, v in robots.items()}
