"""Scenario files: schema, loading with diagnostics, and the subway-lattice generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .config import Params
from .world import Edge, Occupancy, Platform, RobotState, WorldGraph

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "commexplore scenario",
    "type": "object",
    "required": ["nodes", "edges", "robots"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "base_node": {"type": "integer"},
        "nodes": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["id", "pos"], "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer"},
                    "pos": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3},
                    "clearance": {"type": "number"},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object", "required": ["u", "v"], "additionalProperties": False,
                "properties": {
                    "u": {"type": "integer"}, "v": {"type": "integer"},
                    "length": {"type": "number"}, "speed": {"type": "number"},
                    "risk": {"type": "number"}, "slip": {"type": "number"},
                },
            },
        },
        "occupancy": {
            "type": ["object", "null"],
            "required": ["cell_size", "rows"], "additionalProperties": False,
            "properties": {
                "cell_size": {"type": "number"},
                "rows": {"type": "array", "items": {"type": "string", "pattern": "^[.#]*$"}},
            },
        },
        "robots": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["id", "platform"], "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "platform": {"enum": [p.value for p in Platform]},
                    "max_speed": {"type": "number"},
                },
            },
        },
        "radios": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "base_tx_power_dbm": {"type": "number"},
                "tx_power_dbm": {"type": "number"},
                "inventory": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
            },
        },
        "supervisor_script": {
            "type": "array",
            "items": {
                "type": "object", "required": ["time_s", "robot_id", "action"], "additionalProperties": False,
                "properties": {
                    "time_s": {"type": "number", "minimum": 0},
                    "robot_id": {"type": "string"},
                    "action": {"enum": ["ResumeRobot", "ManualGoal", "AbortMission"]},
                    "params": {"type": "object"},
                },
            },
        },
        "faults": {
            "type": "array",
            "items": {
                "type": "object", "required": ["time_s", "robot_id", "component"], "additionalProperties": False,
                "properties": {
                    "time_s": {"type": "number", "minimum": 0},
                    "robot_id": {"type": "string"},
                    "component": {"type": "string"},
                    "repeat": {"type": "boolean"},
                },
            },
        },
        "params": {"type": "object"},
    },
}


class ScenarioError(ValueError):
    """Raised for unparsable or invalid scenarios. ``kind`` is ``parse`` or ``validation``."""

    def __init__(self, message: str, kind: str = "validation"):
        super().__init__(message)
        self.kind = kind


@dataclass
class SupervisorAction:
    time_s: float
    robot_id: str
    action: str
    params: dict = field(default_factory=dict)


@dataclass
class FaultInjection:
    time_s: float
    robot_id: str
    component: str
    repeat: bool = False


@dataclass
class Scenario:
    world: WorldGraph
    robots: dict[str, RobotState]
    radio_inventory: dict[str, int]
    supervisor_script: list[SupervisorAction]
    params: Params
    base_tx_power_dbm: float = 20.0
    tx_power_dbm: float = 20.0
    faults: list[FaultInjection] = field(default_factory=list)
    name: str = ""
    raw: dict = field(default_factory=dict)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}", "parse") from exc
    return scenario_from_dict(raw, source=str(path))


def scenario_from_dict(raw: dict, source: str = "<scenario>") -> Scenario:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"{source}: field {where}: {e.message}", "parse")

    ids = [n["id"] for n in raw["nodes"]]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"{source}: duplicate node id")
    pos = {}
    clearance = []
    for n in raw["nodes"]:
        p = list(n["pos"]) + [0.0] * (3 - len(n["pos"]))
        pos[n["id"]] = np.array(p, dtype=float)
        c = n.get("clearance", 1.0)
        if not c > 0:
            raise ScenarioError(f"{source}: node {n['id']}: clearance must be > 0")
        clearance.append(c)

    edges = []
    seen = set()
    for k, e in enumerate(raw["edges"]):
        u, v = e["u"], e["v"]
        if u not in pos or v not in pos:
            raise ScenarioError(f"{source}: edges/{k}: unknown endpoint")
        if u == v or frozenset((u, v)) in seen:
            raise ScenarioError(f"{source}: edges/{k}: self loop or duplicate edge")
        seen.add(frozenset((u, v)))
        length = e.get("length", float(np.linalg.norm(pos[u] - pos[v])))
        speed = e.get("speed", 1.0)
        risk = e.get("risk", 0.0)
        if not length > 0:
            raise ScenarioError(f"{source}: edges/{k}: length must be > 0")
        if not speed > 0:
            raise ScenarioError(f"{source}: edges/{k}: speed must be > 0")
        if not 0.0 <= risk <= 1.0:
            raise ScenarioError(f"{source}: edges/{k}: risk out of range [0, 1]")
        slip = e.get("slip")
        if slip is not None and not 0.0 <= slip <= 1.0:
            raise ScenarioError(f"{source}: edges/{k}: slip out of range [0, 1]")
        edges.append(Edge(u, v, float(length), float(speed), float(risk), slip))

    base = raw.get("base_node", ids[0])
    if base not in pos:
        raise ScenarioError(f"{source}: base node {base} does not exist")

    occ = None
    if raw.get("occupancy"):
        o = raw["occupancy"]
        rows = o["rows"]
        if not o["cell_size"] > 0:
            raise ScenarioError(f"{source}: occupancy cell_size must be > 0")
        if rows and len({len(r) for r in rows}) != 1:
            raise ScenarioError(f"{source}: occupancy rows must have equal length")
        grid = np.array([[ch == "#" for ch in r] for r in rows], dtype=bool).T if rows else np.zeros((0, 0), bool)
        occ = Occupancy(np.ascontiguousarray(grid), float(o["cell_size"]))

    world = WorldGraph(ids, [pos[i] for i in ids], clearance, edges, base, occ)
    missing = set(ids) - world.reachable_from_base()
    if missing:
        raise ScenarioError(f"{source}: graph not connected from base; unreachable nodes {sorted(missing)[:5]}")

    try:
        params = Params.from_dict(raw.get("params"))
    except (KeyError, ValueError, TypeError) as exc:
        raise ScenarioError(f"{source}: params: {exc}") from exc

    radios = raw.get("radios", {})
    inventory = dict(radios.get("inventory", {}))
    robots = {}
    for r in raw["robots"]:
        if r["id"] in robots:
            raise ScenarioError(f"{source}: duplicate robot id {r['id']}")
        speed = r.get("max_speed", 1.0)
        if not speed > 0:
            raise ScenarioError(f"{source}: robot {r['id']}: max_speed must be > 0")
        robots[r["id"]] = RobotState(r["id"], Platform(r["platform"]), base, max_speed=float(speed),
                                     radios=int(inventory.get(r["id"], 0)))
    unknown = set(inventory) - set(robots)
    if unknown:
        raise ScenarioError(f"{source}: radio inventory for unknown robot(s) {sorted(unknown)}")

    script = [SupervisorAction(s["time_s"], s["robot_id"], s["action"], dict(s.get("params", {})))
              for s in raw.get("supervisor_script", [])]
    faults = [FaultInjection(f["time_s"], f["robot_id"], f["component"], bool(f.get("repeat", False)))
              for f in raw.get("faults", [])]
    for item in script + faults:
        if item.robot_id not in robots:
            raise ScenarioError(f"{source}: script refers to unknown robot {item.robot_id}")
    script.sort(key=lambda s: (s.time_s, s.robot_id))

    return Scenario(world, robots, {k: robots[k].radios for k in robots}, script, params,
                    float(radios.get("base_tx_power_dbm", params.radio.tx_power_dbm)),
                    float(radios.get("tx_power_dbm", params.radio.tx_power_dbm)),
                    faults, raw.get("name", ""), raw)


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------


def minimal_scenario() -> dict:
    return {
        "name": "minimal",
        "base_node": 0,
        "nodes": [{"id": 0, "pos": [0, 0, 0], "clearance": 2.0}, {"id": 1, "pos": [5, 0, 0], "clearance": 2.0}],
        "edges": [{"u": 0, "v": 1, "speed": 1.0, "risk": 0.0}],
        "robots": [{"id": "r1", "platform": "Wheeled"}],
        "params": {"sim": {"duration_s": 60.0}},
    }


def subway_lattice(rooms_x: int = 5, rooms_y: int = 4, room_size: float = 12.0, corridor: float = 6.0,
                   node_spacing: float = 4.0, n_robots: int = 3, seed: int = 7,
                   risky_fraction: float = 0.08, supervisor_period_s: float | None = 120.0,
                   horizon_s: float = 1800.0) -> dict:
    """Rooms on a lattice joined by short corridors, walls in the occupancy grid.

    Every room carries a small grid of nodes with large clearance; corridor
    nodes are narrow. A few corridor edges are risky. The supervisor checks
    in every ``supervisor_period_s`` and resumes any robot waiting on it.
    """
    rng = np.random.default_rng(seed)
    pitch = room_size + corridor
    nodes, edges = [], []
    per_side = int(round(room_size / node_spacing))
    grid_ids = {}
    nid = 0
    margin = 2.0
    for rx in range(rooms_x):
        for ry in range(rooms_y):
            ox, oy = margin + rx * pitch, margin + ry * pitch
            for i in range(per_side):
                for j in range(per_side):
                    x = ox + (i + 0.5) * node_spacing
                    y = oy + (j + 0.5) * node_spacing
                    nodes.append({"id": nid, "pos": [round(x, 3), round(y, 3), 0.0],
                                  "clearance": round(float(rng.uniform(3.0, 5.0)), 3)})
                    grid_ids[(rx, ry, i, j)] = nid
                    nid += 1
            for i in range(per_side):
                for j in range(per_side):
                    if i + 1 < per_side:
                        edges.append({"u": grid_ids[(rx, ry, i, j)], "v": grid_ids[(rx, ry, i + 1, j)]})
                    if j + 1 < per_side:
                        edges.append({"u": grid_ids[(rx, ry, i, j)], "v": grid_ids[(rx, ry, i, j + 1)]})
    mid = per_side // 2
    corridor_nodes = []
    for rx in range(rooms_x):
        for ry in range(rooms_y):
            for dx, dy in ((1, 0), (0, 1)):
                nx_, ny_ = rx + dx, ry + dy
                if nx_ >= rooms_x or ny_ >= rooms_y:
                    continue
                if dx:
                    a = grid_ids[(rx, ry, per_side - 1, mid)]
                    b = grid_ids[(nx_, ny_, 0, mid)]
                else:
                    a = grid_ids[(rx, ry, mid, per_side - 1)]
                    b = grid_ids[(nx_, ny_, mid, 0)]
                pa = np.array(nodes[a]["pos"])
                pb = np.array(nodes[b]["pos"])
                pm = (pa + pb) / 2
                nodes.append({"id": nid, "pos": [round(float(v), 3) for v in pm],
                              "clearance": round(float(rng.uniform(0.8, 1.5)), 3)})
                corridor_nodes.append(nid)
                risk = round(float(rng.uniform(0.05, 0.3)), 3) if rng.random() < risky_fraction else 0.0
                edges.append({"u": a, "v": nid, "risk": risk, "speed": 0.8})
                edges.append({"u": nid, "v": b, "risk": risk, "speed": 0.8})
                nid += 1

    # occupancy: 1 m cells, walls one cell thick around every room, door gaps at corridors
    cell = 1.0
    width = int(math.ceil(margin * 2 + rooms_x * pitch))
    height = int(math.ceil(margin * 2 + rooms_y * pitch))
    occ = np.zeros((width, height), dtype=bool)
    for rx in range(rooms_x):
        for ry in range(rooms_y):
            x0 = int(math.floor(margin + rx * pitch)) - 1
            y0 = int(math.floor(margin + ry * pitch)) - 1
            x1 = int(math.ceil(margin + rx * pitch + room_size))
            y1 = int(math.ceil(margin + ry * pitch + room_size))
            occ[x0:x1 + 1, y0] = True
            occ[x0:x1 + 1, y1] = True
            occ[x0, y0:y1 + 1] = True
            occ[x1, y0:y1 + 1] = True
    for n in nodes:
        if n["id"] in corridor_nodes:
            # carve a corridor strip through the walls along its axis
            x, y = n["pos"][0], n["pos"][1]
            ix, iy = int(math.floor(x)), int(math.floor(y))
            horizontal = any(abs(nodes[e["u"]]["pos"][1] - y) < 1e-6 and e["v"] == n["id"] for e in edges)
            if horizontal:
                occ[max(ix - int(corridor), 0):ix + int(corridor) + 1, iy] = False
            else:
                occ[ix, max(iy - int(corridor), 0):iy + int(corridor) + 1] = False
    rows = ["".join("#" if occ[ix, iy] else "." for ix in range(width)) for iy in range(height)]

    platforms = ["Wheeled", "Legged", "Wheeled", "Aerial"]
    robots = [{"id": f"robot{k + 1}", "platform": platforms[k % len(platforms)], "max_speed": 1.0}
              for k in range(n_robots)]
    script = []
    if supervisor_period_s:
        k = 1
        while k * supervisor_period_s <= horizon_s:
            script += [{"time_s": k * supervisor_period_s, "robot_id": r["id"], "action": "ResumeRobot"}
                       for r in robots]
            k += 1
    return {
        "name": f"subway_lattice_{rooms_x}x{rooms_y}",
        "base_node": 0,
        "nodes": nodes,
        "edges": edges,
        "occupancy": {"cell_size": cell, "rows": rows},
        "robots": robots,
        "radios": {"base_tx_power_dbm": 0.0, "tx_power_dbm": 0.0,
                   "inventory": {r["id"]: 4 for r in robots}},
        "supervisor_script": script,
        "params": {},
    }
