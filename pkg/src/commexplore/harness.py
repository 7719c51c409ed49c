"""Simulation engine: the fixed tick pipeline, artefact files, and replay verification.

Tick pipeline, in order:

1. planners replan for robots that are due
2. mission executives tick (robot-id order)
3. the world steps
4. IRM updates from traversals, coverage observations, merges with the shared IRM
5. mesh and checkpoint refresh for radios deployed this tick
6. netstack exchange over each robot's bottleneck capacity (fair share per first hop)
7. metrics sample, then the tick digest is sealed
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .events import EventKind, EventLog, SimEvent, canonical, chain_digest, dumps
from .irm import (Irm, dump_records, extract_local, merge, nearest_strong_checkpoint, shortest_path, travel_times,
                  update_from_observation, update_from_traversal)
from .mission import Behavior, Executive, Observation, mission_health, should_deploy_radio
from .netstack import Channel, Receiver, Reporter, TrafficClass, enqueue, exchange
from .planner import (
    CoverageModel,
    GuidanceParam,
    Policy,
    PolicyOrigin,
    RewardParams,
    build_figop,
    evaluate_sequence,
    expand_path,
    gls_solve,
    lcp_plan,
    meta_select,
)
from .radio import LinkCache, MeshState, RadioNode, capacity, receiver_bottleneck, update_checkpoints
from .scenario import Scenario, load_scenario, scenario_from_dict
from .world import CoverageBelief, Health, apply_observation, clear_fault, entropy, nodes_in_range, step

STREAMS = ("world", "netloss", "mission", "planner")


def derived_seed(master_seed: int, name: str) -> list[int]:
    return [int(master_seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())]


class RngStreams:
    """Independent generators keyed by subsystem name."""

    def __init__(self, master_seed: int, names=STREAMS):
        self.master_seed = int(master_seed)
        self._gens = {n: np.random.default_rng(derived_seed(master_seed, n)) for n in names}

    def __getitem__(self, name: str) -> np.random.Generator:
        return self._gens[name]


@dataclass
class RunReport:
    scenario: str
    seed: int
    duration_s: float
    dt_s: float
    ticks: int
    coverage: list  # [time_s, fraction] samples
    final_coverage: float
    time_to_coverage_90_s: float | None
    distance_m: dict
    messages: dict  # class -> counters
    radios_deployed: int
    behavior_ticks: dict  # robot -> behaviour -> ticks
    health_records: dict
    entropy_initial: float
    entropy_final: float
    info_gain_total: float
    replans: int
    digest: str

    def to_dict(self) -> dict:
        return canonical(dict(self.__dict__))


@dataclass
class _Agent:
    robot_id: str
    exe: Executive
    reporter: Reporter
    receiver: Receiver
    channel: Channel
    irm: Irm
    policy: Policy | None = None
    plan_pos: int = 0
    guidance: GuidanceParam | None = None
    reset_plan: bool = False
    dirty: bool = True
    synced: int = -1
    connected: bool = True
    bottleneck: float | None = None
    hop: int | None = None
    health_records: int = 0
    last_health: dict | None = None
    behavior_ticks: dict = field(default_factory=dict)


class Simulation:
    def __init__(self, scenario: Scenario, seed: int = 0):
        self.sc = scenario
        self.p = scenario.params
        self.seed = int(seed)
        self.rng = RngStreams(seed)
        self.world = scenario.world
        self.dt = self.p.sim.dt_s
        self.duration = self.p.sim.duration_s
        if not self.dt > 0 or not self.duration > 0:
            raise ValueError("dt and duration must be positive")
        self.n_ticks = int(round(self.duration / self.dt))
        self.robots = {k: v for k, v in sorted(scenario.robots.items())}
        self.belief = CoverageBelief.uniform(self.world, self.p.world.initial_covered_prob, self.p.world.eps_cov)
        self.coverage = CoverageModel(self.world, self.p.planner.sensor_max_m, self.p.planner.kappa)
        self.log = EventLog()
        base_pos = self.world.position(self.world.base)
        self.mesh = MeshState([RadioNode("base", base_pos.copy(), True, scenario.base_tx_power_dbm)],
                              self.p.radio, self.world.occupancy)
        self.links = LinkCache(self.p.radio, self.world.occupancy)
        self.shared = Irm()
        update_from_traversal(self.shared, self.world.base, self.world)
        self.shared_version = 0
        mc = self.p.mission
        self.agents: dict[str, _Agent] = {}
        for rid, r in self.robots.items():
            rep = Reporter(self.p.net.retransmit_timeout_s, self.p.net.rate_window_s, self.p.net.ts_ttl_s,
                           self.p.net.compression)
            for topic, cls in (("health", TrafficClass.MISSION_CRITICAL), ("map", TrafficClass.KEY),
                               ("pose", TrafficClass.TIME_SENSITIVE)):
                bound = self.p.net.ts_queue_bound if cls is TrafficClass.TIME_SENSITIVE else None
                rep.add_topic(topic, cls, self.p.net.bucket_rate[cls.value], self.p.net.bucket_burst[cls.value], bound)
            irm = self.shared.copy()
            update_from_traversal(irm, r.node, self.world)
            self.agents[rid] = _Agent(rid, Executive(rid, r.platform, mc, self.dt,
                                                     wiggle_speed=self.p.world.wiggle_speed_mps),
                                      rep, Receiver(), Channel(self.p.net.loss_prob, (), self.rng["netloss"]), irm)
        for a in self.agents.values():
            update_checkpoints(a.irm, self.mesh, self.links, mc.T_C_db, mc.T_none_db)
        update_checkpoints(self.shared, self.mesh, self.links, mc.T_C_db, mc.T_none_db)
        self.faults = sorted(scenario.faults, key=lambda f: (f.time_s, f.robot_id, f.component))
        self.script = list(scenario.supervisor_script)
        self.tick = 0
        self.entropy_initial = entropy(self.belief)
        self.info_gain = 0.0
        self.replans = 0
        self.coverage_samples: list = []
        self.time_to_90: float | None = None
        self.radios_deployed = 0
        self.delivery: list[dict] = []
        self.metrics: list[dict] = []
        self.planner_dump: list[dict] = []
        self.irm_dump: list[dict] = []
        self.rparams_local = RewardParams(self.p.planner.gamma_local, self.p.planner.lambda_cost,
                                          self.p.planner.horizon, self.p.planner.replan_steps)
        self.rparams_global = RewardParams(self.p.planner.gamma_global, self.p.planner.lambda_cost,
                                           self.p.planner.horizon, self.p.planner.replan_steps)
        self._observe_all()

    # ------------------------------------------------------------------
    def emit(self, rid: str, kind: EventKind, payload: dict) -> None:
        self.log.emit(SimEvent(self.tick, rid, kind, payload))

    def _observe_all(self) -> None:
        for rid, r in self.robots.items():
            if r.health == Health.OUT_OF_SERVICE:
                continue
            pose = r.pose(self.world)
            near = r.node if r.at_node() else self.world.nearest_node(pose)
            radius = self.coverage.radius_at(near)
            gain = apply_observation(self.belief, pose, radius)
            a = self.agents[rid]
            if a.exe.components["mapper"].alive:
                seen = [self.world.ids[k] for k in nodes_in_range(self.world.positions, pose, radius)]
                if update_from_observation(a.irm, seen, self.world):
                    a.dirty = True
                    update_checkpoints(a.irm, self.mesh, self.links, self.p.mission.T_C_db,
                                       self.p.mission.T_none_db)
            if gain > 0:
                self.info_gain += gain
                size = max(1, int(round(gain * self.p.net.map_bytes_per_bit)))
                self._enqueue(a, "map", size)

    def _enqueue(self, a: _Agent, topic: str, size: int) -> None:
        msg = a.reporter.make_message(topic, size, self.tick, self.tick * self.dt)
        for d in enqueue(a.reporter, msg):
            self.emit(a.robot_id, EventKind.MESSAGE_DROPPED, {"topic": d.topic, "seq": d.seq, "why": "evicted"})

    # -- stage 1 ----------------------------------------------------------
    def _claimed(self, rid: str) -> set:
        """Frontiers another robot will cover on reaching its current target."""
        mine = self.agents[rid].irm
        fr = mine.frontiers()
        pos = mine.positions(fr)
        out = set()
        for other, a in self.agents.items():
            if other == rid or a.guidance is None or a.guidance.target is None:
                continue
            t = a.guidance.target
            out.add(t)
            if fr:
                c = self.world.position(t)
                d = np.linalg.norm(pos - c, axis=1)
                out.update(f for f, di in zip(fr, d) if di <= self.coverage.radius_at(t))
        if fr:
            # Voronoi split: leave frontiers that are strictly closer to another robot
            me = np.linalg.norm(pos - self.robots[rid].pose(self.world), axis=1)
            for other, r in self.robots.items():
                if other == rid or r.health == Health.OUT_OF_SERVICE:
                    continue
                d = np.linalg.norm(pos - r.pose(self.world), axis=1)
                out.update(f for f, di, mi in zip(fr, d, me) if di < mi - 1e-9)
            if len(out.intersection(fr)) == len(fr):
                return {a.guidance.target for o, a in self.agents.items()
                        if o != rid and a.guidance is not None and a.guidance.target is not None}
        return out

    def _due(self, a: _Agent, r) -> bool:
        # stuck robots keep a plan: their rejected move commands are what the stuck monitor sees
        if not r.at_node() or r.health in (Health.OUT_OF_SERVICE, Health.FALLEN):
            return False
        if a.exe.state.kind not in (Behavior.EXPLORE, Behavior.STUCK_RECOVERY):
            return False
        if not a.exe.components["planner"].alive:
            return False
        pol = a.policy
        if a.reset_plan or pol is None:
            return True
        if pol.nodes[a.plan_pos] != r.node:
            return True
        return a.plan_pos >= min(self.p.planner.replan_steps, len(pol.nodes) - 1)

    def _plan(self, rid: str) -> None:
        a = self.agents[rid]
        r = self.robots[rid]
        pp = self.p.planner
        rng = self.rng["planner"]
        now = self.tick * self.dt
        pose = r.pose(self.world)
        budget = max(0.0, self.duration - now)
        inst = build_figop(a.irm, self.belief, pose, budget, pp.local_window_m, self.coverage, self.world, r.node,
                           exclude=self._claimed(rid), max_frontiers=pp.max_global_frontiers)
        gamma_g = pp.gamma_global
        gpath = gls_solve(inst, gamma_g, pp.gls_iterations, rng, pp.gls_mu_factor)
        nodes = expand_path(a.irm, inst, gpath)
        target = inst.node_ids[gpath[1]] if len(gpath) > 1 else None
        guidance = GuidanceParam(target, tuple(nodes))
        guide = travel_times(a.irm, target) if target is not None else None
        if target is None and not a.connected:
            # nothing left to explore on a stale map: head back into comms to resync
            goal = nearest_strong_checkpoint(a.irm, r.node) or a.irm.base()
            path = shortest_path(a.irm, r.node, goal) if goal is not None else None
            if path is not None and len(path) > 1:
                nodes = path
                guidance = GuidanceParam(goal, tuple(path))
                guide = travel_times(a.irm, goal)
        glob = evaluate_sequence(nodes, a.irm, self.belief, self.coverage, self.rparams_local, guide,
                                 pp.guide_weight, PolicyOrigin.GLOBAL)
        if pp.force == "Global":
            chosen, rival = glob, None
        else:
            view = extract_local(a.irm, pose, pp.local_window_m, r.node)
            tpos = a.irm.nodes[target].position if target is not None else None
            loc = lcp_plan(view, self.belief, guidance, self.rparams_local, rng, r.node, self.coverage,
                           pp.n_rollouts, pp.heuristic_mix, pp.guide_weight, tpos)
            if pp.force == "Local":
                chosen, rival = loc, glob
            else:
                chosen = meta_select(loc, glob)
                rival = glob if chosen is loc else loc
        a.policy = chosen
        a.plan_pos = 0
        a.guidance = guidance
        a.reset_plan = False
        self.replans += 1
        self.emit(rid, EventKind.REPLAN, {"origin": chosen.origin.value, "next": chosen.nodes[1:3],
                                          "U": chosen.utility, "P": chosen.success_prob, "target": target})
        self.planner_dump.append({"tick": self.tick, "robot": rid, "chosen": chosen.to_record(),
                                  "rival": rival.to_record() if rival is not None else None,
                                  "figop_nodes": len(inst)})

    def _plan_next(self, a: _Agent, r) -> int | None:
        pol = a.policy
        if pol is None or not r.at_node():
            return None
        if pol.nodes[a.plan_pos] != r.node or a.plan_pos + 1 >= len(pol.nodes):
            return None
        return pol.nodes[a.plan_pos + 1]

    # -- main loop ----------------------------------------------------------
    def step_tick(self) -> None:
        self.tick += 1
        now = self.tick * self.dt
        dt = self.dt
        mc = self.p.mission

        # fault injections land on the executive's component table
        while self.faults and self.faults[0].time_s <= now + 1e-9:
            f = self.faults.pop(0)
            self.agents[f.robot_id].exe.inject_fault(f.component, f.repeat)

        # (1) planning
        for rid, r in self.robots.items():
            if self._due(self.agents[rid], r):
                self._plan(rid)

        # (2) executives
        due_script: dict[str, list] = {}
        while self.script and self.script[0].time_s <= now + 1e-9:
            s = self.script.pop(0)
            due_script.setdefault(s.robot_id, []).append(s)
        commands = {}
        deployments = []
        mission_rng = self.rng["mission"]
        for rid, r in self.robots.items():
            a = self.agents[rid]
            obs = Observation(self.tick, now, r, a.irm, self.mesh, r.pose(self.world),
                              a.reporter.buffer_size_bytes, a.connected, a.bottleneck, self._plan_next(a, r),
                              self.sc.tx_power_dbm, due_script.get(rid, []))
            res = a.exe.tick(obs, mission_rng)
            for kind, payload in res.events:
                self.emit(rid, kind, payload)
            for eff in res.effects:
                if eff[0] == "reset_planner":
                    a.reset_plan = True
                    a.policy = None
                elif eff[0] == "clear_fault":
                    if r.health in (Health.STUCK, Health.FALLEN):
                        clear_fault(r)
                elif eff[0] == "jam":
                    r.radios -= 1
                elif eff[0] == "deploy":
                    deployments.append((rid, eff[1]))
            if res.command is not None:
                commands[rid] = res.command
            if res.command is not None and res.command.kind == "move" and r.at_node() \
                    and res.command.target != self._plan_next(a, r):
                a.policy = None  # off-plan move: replan on arrival

        # (3) world
        arrived_before = {rid: r.node for rid, r in self.robots.items()}
        for ev in step(self.world, self.robots, commands, dt, self.rng["world"], self.p.world, self.tick):
            self.log.emit(ev)

        # (4) IRM updates, observations, merges
        for rid, r in self.robots.items():
            a = self.agents[rid]
            if r.at_node() and r.node != arrived_before[rid]:
                if a.policy is not None and a.plan_pos + 1 < len(a.policy.nodes) \
                        and a.policy.nodes[a.plan_pos + 1] == r.node:
                    a.plan_pos += 1
                if a.exe.components["mapper"].alive and update_from_traversal(a.irm, r.node, self.world):
                    a.dirty = True
                    update_checkpoints(a.irm, self.mesh, self.links, mc.T_C_db, mc.T_none_db)
        self._observe_all()
        for rid in self.robots:
            a = self.agents[rid]
            if a.connected and (a.dirty or a.synced != self.shared_version):
                merged = merge(self.shared, a.irm, self.p.sim.merge_radius_m)
                if merged.canonical() != self.shared.canonical():
                    self.shared = merged
                    self.shared_version += 1
                    self.emit(rid, EventKind.IRM_MERGED, {"nodes": len(merged), "edges": len(merged.edges)})
                a.irm = self.shared.copy()
                a.dirty = False
                a.synced = self.shared_version

        # (5) mesh refresh
        if deployments:
            for k, (rid, radio_id) in enumerate(deployments):
                r = self.robots[rid]
                pose = r.pose(self.world)
                if k > 0 and not should_deploy_radio(pose, self.mesh, mc, self.sc.tx_power_dbm):
                    # an earlier drop this tick already serves this spot
                    self.emit(rid, EventKind.DEPLOY_SKIPPED, {"radio_id": radio_id, "reason": "redundant"})
                    continue
                self.mesh = self.mesh.with_radio(RadioNode(radio_id, pose, False, self.sc.tx_power_dbm))
                r.radios -= 1
                self.radios_deployed += 1
                self.emit(rid, EventKind.RADIO_DEPLOYED, {"radio_id": radio_id, "node": r.node,
                                                          "mesh": len(self.mesh)})
            for irm in [self.shared] + [a.irm for a in self.agents.values()]:
                update_checkpoints(irm, self.mesh, self.links, mc.T_C_db, mc.T_none_db)

        # (6) netstack
        hops = {}
        for rid, r in self.robots.items():
            a = self.agents[rid]
            snr, hop = receiver_bottleneck(self.mesh, r.pose(self.world))
            alive = a.exe.components["comms"].alive and r.health != Health.OUT_OF_SERVICE
            a.bottleneck = snr
            a.hop = hop
            a.connected = snr is not None and alive
            if a.connected:
                hops[hop] = hops.get(hop, 0) + 1
        pose_ticks = max(1, int(round(self.p.net.pose_period_s / dt)))
        health_ticks = max(1, int(round(mc.health_period_s / dt)))
        for rid, r in self.robots.items():
            a = self.agents[rid]
            if self.tick % pose_ticks == 0:
                self._enqueue(a, "pose", self.p.net.pose_bytes)
            if self.tick % health_ticks == 0:
                h = mission_health(a.exe.state, a.reporter.buffer_size_bytes, now, a.exe.last_connection_s,
                                   self._progress(a), a.exe.last_event)
                self._enqueue(a, "health", self.p.net.health_bytes)
                a.health_records += 1
                a.last_health = h.to_record()
            budget = 0.0
            if a.connected:
                budget = capacity(a.bottleneck, self.p.radio.bandwidth_hz) * dt / 8.0 / hops[a.hop]
            res, delivered = exchange(a.reporter, a.receiver, a.channel, budget, dt, now, a.connected)
            for m in res.dropped:
                self.emit(rid, EventKind.MESSAGE_DROPPED, {"topic": m.topic, "seq": m.seq, "why": "ttl"})
            for m in delivered:
                self.emit(rid, EventKind.MESSAGE_DELIVERED, {"topic": m.topic, "seq": m.seq})
                self.delivery.append({"tick": self.tick, "robot": rid, "topic": m.topic, "class": m.cls.value,
                                      "seq": m.seq, "bytes": m.size_bytes, "latency_s": now - m.created_s})

        # (7) metrics
        self._sample(now)
        self.log.close_tick(self.tick)

    def _progress(self, a: _Agent) -> float:
        n = len(a.irm.nodes)
        return 0.0 if n == 0 else 1.0 - len(a.irm.frontiers()) / n

    def _sample(self, now: float) -> None:
        cov = self.belief.coverage_fraction()
        if self.time_to_90 is None and cov >= 0.9:
            self.time_to_90 = now
        row = {"tick": self.tick, "time_s": now, "coverage": cov, "radios_deployed": self.radios_deployed}
        for cls in TrafficClass:
            enq = deliv = infl = qd = drop = 0
            for a in self.agents.values():
                c = a.reporter.counters[cls]
                enq += c["enqueued"]
                deliv += c["acked"] + c["sent_ts"]
                drop += c["dropped"]
                infl += a.reporter.in_flight(cls)
                qd += a.reporter.queued(cls)
            if deliv + infl + qd + drop != enq:
                raise RuntimeError(f"message conservation violated for {cls.value} at tick {self.tick}")
            key = cls.value
            row.update({f"{key}_enqueued": enq, f"{key}_delivered": deliv, f"{key}_in_flight": infl,
                        f"{key}_queued": qd, f"{key}_dropped": drop})
        for rid, r in self.robots.items():
            a = self.agents[rid]
            st = a.exe.state.kind.value
            a.behavior_ticks[st] = a.behavior_ticks.get(st, 0) + 1
            row[f"{rid}_odometer"] = r.odometer
            row[f"{rid}_buffer"] = a.reporter.buffer_size_bytes
            row[f"{rid}_state"] = st
        self.metrics.append(row)
        ticks_per_s = max(1, int(round(1.0 / self.dt)))
        if self.tick % (10 * ticks_per_s) == 0:
            self.coverage_samples.append([now, cov])

    def run(self) -> RunReport:
        stop = self.p.sim.stop_at_coverage
        while self.tick < self.n_ticks:
            self.step_tick()
            if stop > 0 and self.belief.coverage_fraction() >= stop:
                break
        return self.report()

    def report(self) -> RunReport:
        msgs = {}
        for cls in TrafficClass:
            agg = {"enqueued": 0, "delivered": 0, "dropped": 0}
            for a in self.agents.values():
                c = a.reporter.counters[cls]
                agg["enqueued"] += c["enqueued"]
                agg["delivered"] += c["acked"] + c["sent_ts"]
                agg["dropped"] += c["dropped"]
            msgs[cls.value] = agg
        now = self.tick * self.dt
        if not self.coverage_samples or self.coverage_samples[-1][0] != now:
            self.coverage_samples.append([now, self.belief.coverage_fraction()])
        return RunReport(self.sc.name, self.seed, self.duration, self.dt, self.tick,
                         self.coverage_samples,
                         self.belief.coverage_fraction(), self.time_to_90,
                         {rid: r.odometer for rid, r in self.robots.items()}, msgs, self.radios_deployed,
                         {rid: dict(sorted(a.behavior_ticks.items())) for rid, a in self.agents.items()},
                         {rid: a.health_records for rid, a in self.agents.items()},
                         self.entropy_initial, entropy(self.belief), self.info_gain, self.replans, self.log.digest)

    # ------------------------------------------------------------------
    def write(self, out_dir, header: dict) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rep = self.report()
        (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(out / "events.jsonl", "w") as fh:
            fh.write(dumps({"header": header}) + "\n")
            for line in self.log.lines():
                fh.write(line + "\n")
        with open(out / "delivery.jsonl", "w") as fh:
            for d in self.delivery:
                fh.write(dumps(d) + "\n")
        with open(out / "metrics.csv", "w", newline="") as fh:
            if self.metrics:
                w = csv.DictWriter(fh, fieldnames=list(self.metrics[0]))
                w.writeheader()
                w.writerows(self.metrics)
        with open(out / "planner.jsonl", "w") as fh:
            for d in self.planner_dump:
                fh.write(dumps(d) + "\n")
        with open(out / "irm.jsonl", "w") as fh:
            for d in dump_records(self.shared, self.tick):
                fh.write(dumps(d) + "\n")
        self.mesh.dump_csv(out / "mesh.csv")


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------


def prepare(scenario, overrides=(), seed: int = 0, duration: float | None = None,
            dt: float | None = None) -> tuple[Scenario, dict]:
    """Load a scenario (path, dict, or Scenario) and fold in CLI-style overrides."""
    if isinstance(scenario, Scenario):
        raw = scenario.raw
    elif isinstance(scenario, dict):
        raw = scenario
    else:
        raw = load_scenario(scenario).raw
    ov = list(overrides or [])
    if duration is not None:
        ov.append(f"sim.duration_s={duration}")
    if dt is not None:
        ov.append(f"sim.dt_s={dt}")
    raw = json.loads(json.dumps(raw))
    sc = scenario_from_dict(raw)
    sc.params = sc.params.with_overrides(ov)
    header = {"scenario": raw, "seed": int(seed), "overrides": ov}
    return sc, header


def run(scenario, overrides=(), seed: int = 0, out_dir=None, duration: float | None = None,
        dt: float | None = None) -> RunReport:
    sc, header = prepare(scenario, overrides, seed, duration, dt)
    sim = Simulation(sc, seed)
    report = sim.run()
    if out_dir is not None:
        sim.write(out_dir, header)
    return report


class ReplayParseError(ValueError):
    pass


@dataclass
class ReplayVerdict:
    ok: bool
    first_divergent_tick: int | None
    reason: str


def read_event_log(path) -> tuple[dict, list[tuple[int, list[str], str]]]:
    """Header plus, per sealed tick, (tick, event lines, logged digest)."""
    header = None
    ticks = []
    pending: list[str] = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayParseError(f"{path}:{n}: not valid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ReplayParseError(f"{path}:{n}: expected an object")
            if n == 1:
                if "header" not in rec:
                    raise ReplayParseError(f"{path}:1: missing header record")
                header = rec["header"]
                continue
            if set(rec) == {"tick", "digest"}:
                ticks.append((int(rec["tick"]), pending, str(rec["digest"])))
                pending = []
            elif {"tick", "robot", "kind", "payload"} <= set(rec):
                pending.append(line)
            else:
                raise ReplayParseError(f"{path}:{n}: unrecognised record")
    if header is None:
        raise ReplayParseError(f"{path}: empty log")
    if pending:
        raise ReplayParseError(f"{path}: events after the last sealed tick")
    return header, ticks


def replay_check(path) -> ReplayVerdict:
    header, ticks = read_event_log(path)
    # the log must agree with its own digest chain
    d = EventLog().digest
    for tick, lines, logged in ticks:
        d = chain_digest(d, lines)
        if d != logged:
            return ReplayVerdict(False, tick, "log content does not match its digest chain")
    sc, _ = prepare(header["scenario"], header.get("overrides", []), header.get("seed", 0))
    sim = Simulation(sc, header.get("seed", 0))
    sim.run()
    for tick, _, logged in ticks:
        got = sim.log.tick_digests.get(tick)
        if got != logged:
            return ReplayVerdict(False, tick, "re-execution diverges from the log")
    if len(sim.log.tick_digests) != len(ticks):
        first = len(ticks) + 1
        return ReplayVerdict(False, first, "re-execution ran a different number of ticks")
    return ReplayVerdict(True, None, "all tick digests match")


def write_report(report: RunReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


__all__ = ["RngStreams", "RunReport", "Simulation", "derived_seed", "prepare", "replay_check", "run",
           "ReplayParseError", "ReplayVerdict"]
