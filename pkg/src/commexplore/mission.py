"""Per-robot behaviour executive: monitors pick a behaviour, behaviours issue commands.

Monitor priority is fixed: fall, stuck, comms, radio deployment, exploration.
An executive never touches shared state; anything that must change outside
the robot (mesh, planner, world faults) is returned as an effect for the
harness to apply at the tick boundary.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .config import LinkModel, MissionConfig
from .events import EventKind
from .irm import Irm, nearest_strong_checkpoint, shortest_path
from .radio import MeshState, predict_coverage_radius, receiver_bottleneck
from .world import Command, Health, Platform, RobotState


class ContractViolation(RuntimeError):
    pass


class Behavior(str, Enum):
    EXPLORE = "Explore"
    DEPLOY_RADIO = "DeployRadio"
    RETURN_TO_COMMS = "ReturnToComms"
    STUCK_RECOVERY = "StuckRecovery"
    FALL_RECOVERY = "FallRecovery"
    AWAIT_SUPERVISOR = "AwaitSupervisor"
    MANUAL_GOAL = "ManualGoal"


@dataclass(frozen=True)
class BehaviorState:
    kind: Behavior = Behavior.EXPLORE
    radio_id: str | None = None
    target_node: int | None = None
    waiting_since: int | None = None  # tick the current wait began
    last_buffer: float | None = None
    cause: str | None = None
    stage: int = 0
    phase: str = ""  # stuck recovery: "act" then "check"
    phase_since: int = 0
    attempts_used: int = 0
    resume: "BehaviorState | None" = None

    def to_record(self) -> dict:
        rec = {"kind": self.kind.value}
        for k in ("radio_id", "target_node", "waiting_since", "cause"):
            v = getattr(self, k)
            if v is not None:
                rec[k] = v
        if self.kind == Behavior.STUCK_RECOVERY:
            rec["stage"] = self.stage
        if self.kind == Behavior.FALL_RECOVERY:
            rec["attempts_used"] = self.attempts_used
        return rec


EXPLORE = BehaviorState()


@dataclass
class MissionHealth:
    behavior: str
    buffer_size_bytes: float
    time_since_last_connection_s: float
    mission_progress: float
    last_event: str | None

    def to_record(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------------------
# monitors
# --------------------------------------------------------------------------


def stuck_detect(history, window_s: float, threshold_mps: float, dt: float) -> bool:
    """Mean of (commanded - measured) over the trailing window exceeds the threshold.

    ``history`` holds one (commanded, measured) pair per tick. Too short a
    history never fires.
    """
    w = max(1, int(round(window_s / dt)))
    if len(history) < w:
        return False
    h = list(history)[-w:]
    return sum(c - m for c, m in h) / w > threshold_mps


def overlap_fraction(r_new: float, r_old: float, d: float) -> float:
    """Share of the candidate disk's area that lies inside an existing disk."""
    if r_new <= 0:
        return 0.0
    if d >= r_new + r_old:
        area = 0.0
    elif d <= abs(r_new - r_old):
        area = math.pi * min(r_new, r_old) ** 2
    else:
        a1 = r_new ** 2 * math.acos((d * d + r_new ** 2 - r_old ** 2) / (2 * d * r_new))
        a2 = r_old ** 2 * math.acos((d * d + r_old ** 2 - r_new ** 2) / (2 * d * r_old))
        k = 0.5 * math.sqrt(max(0.0, (-d + r_new + r_old) * (d + r_new - r_old) * (d - r_new + r_old)
                                * (d + r_new + r_old)))
        area = a1 + a2 - k
    return area / (math.pi * r_new ** 2)


_UNSET = object()


def should_deploy_radio(pose, mesh: MeshState, config: MissionConfig, tx_power_dbm: float,
                        model: LinkModel | None = None, bottleneck_db=_UNSET) -> bool:
    """Weak link at ``pose`` and no deployed radio whose predicted disk would overlap too much.

    ``bottleneck_db`` may be passed in when already known (``None`` meaning
    unreachable, which counts as weak); otherwise it is computed here.
    """
    model = model or mesh.model
    if bottleneck_db is _UNSET:
        bottleneck_db, _ = receiver_bottleneck(mesh, pose)
    if bottleneck_db is not None and bottleneck_db >= config.deploy_snr_db:
        return False
    r_new = predict_coverage_radius(tx_power_dbm, model, config.deploy_snr_db)
    p = np.asarray(pose, dtype=float)
    for radio in mesh.radios:
        r_old = predict_coverage_radius(radio.tx_power_dbm, model, config.deploy_snr_db)
        d = float(np.linalg.norm(np.asarray(radio.position, dtype=float) - p))
        if overlap_fraction(r_new, r_old, d) >= config.overlap_fraction_max:
            return False
    return True


# --------------------------------------------------------------------------
# behaviours as pure steps
# --------------------------------------------------------------------------


def deploy_radio(inventory: int, rng: np.random.Generator, p_jam: float) -> str:
    """``Deployed`` or ``Jammed``; ``Empty`` (no draw) when nothing is carried."""
    if inventory <= 0:
        return "Empty"
    return "Jammed" if rng.random() < p_jam else "Deployed"


def return_to_comms_step(state: BehaviorState, buffer_bytes: float, connected: bool, irm: Irm,
                         node: int, at_node: bool, tick: int, dt: float, config: MissionConfig):
    """One tick of re-establishing connectivity.

    Returns ``(target_node or None, new_state)``; a ``None`` target with an
    Explore state means resume exploration.
    """
    done = buffer_bytes < config.T_B_low_bytes and (state.cause != "Disconnected" or connected)
    if done:
        return None, EXPLORE
    st = state
    if st.target_node is None:
        st = replace(st, target_node=_strong_or_base(irm, node), waiting_since=None)
    if at_node and node == st.target_node:
        if st.waiting_since is None:
            st = replace(st, waiting_since=tick, last_buffer=buffer_bytes)
        elif st.last_buffer is not None and buffer_bytes < st.last_buffer:
            st = replace(st, waiting_since=tick, last_buffer=buffer_bytes)
        else:
            st = replace(st, last_buffer=buffer_bytes)
            if (tick - st.waiting_since) * dt >= config.wait_timeout_s - 1e-9:
                nxt = nearest_strong_checkpoint(irm, node, toward_base=True, current_target=st.target_node)
                if nxt is None:
                    nxt = irm.base() if irm.base() is not None else st.target_node
                st = replace(st, target_node=nxt, waiting_since=None if nxt != node else tick,
                             last_buffer=buffer_bytes)
    return st.target_node, st


def _strong_or_base(irm: Irm, node: int) -> int:
    t = nearest_strong_checkpoint(irm, node)
    if t is None:
        t = irm.base()
    return node if t is None else t


def stuck_recover_step(state: BehaviorState, still_stuck: bool, history_full: bool, tick: int,
                       dt: float, config: MissionConfig):
    """Staged stuck recovery.

    Stage 0 resets the planner, stage 1 wiggles for ``wiggle_duration_s``;
    after each action the robot tries to move again until the detector has a
    full window, and the stage advances only if it still fires. Returns
    ``(action, new_state)`` with action in {"reset_planner", "wiggle",
    "resume", "await", "recovered"}.
    """
    if state.phase == "act":
        if state.stage == 0:
            return "reset_planner", replace(state, phase="check", phase_since=tick)
        if state.stage == 1:
            if (tick - state.phase_since) * dt < config.wiggle_duration_s - 1e-9:
                return "wiggle", state
            return "resume", replace(state, phase="check", phase_since=tick)
        return "await", BehaviorState(Behavior.AWAIT_SUPERVISOR, cause="StuckRecoveryFailed")
    # checking: keep trying to move until the window refills
    if not history_full:
        return "resume", state
    if not still_stuck:
        return "recovered", EXPLORE
    nxt = state.stage + 1
    if nxt >= 2:
        return "await", BehaviorState(Behavior.AWAIT_SUPERVISOR, cause="StuckRecoveryFailed")
    return "wiggle", replace(state, stage=nxt, phase="act", phase_since=tick)


def fall_recover_step(state: BehaviorState, platform: Platform, rng: np.random.Generator,
                      config: MissionConfig):
    """One self-righting attempt. Returns ``(success, new_state)``."""
    if platform != Platform.LEGGED:
        raise ContractViolation(f"fall recovery is defined for legged robots, not {platform.value}")
    used = state.attempts_used + 1
    if rng.random() < config.p_selfright:
        back = state.resume if state.resume is not None else EXPLORE
        return True, back
    if used >= config.fall_attempts_n:
        return False, BehaviorState(Behavior.AWAIT_SUPERVISOR, cause="FallRecoveryFailed")
    return False, replace(state, attempts_used=used)


@dataclass
class Component:
    alive: bool = True
    last_beat: float = 0.0
    revive_at: float | None = None
    persistent_fault: bool = False


def watchdog_step(components: dict[str, Component], now: float, restarts_used: int, config: MissionConfig):
    """Inspect heartbeats. Returns ``(action, component)``.

    action is ``None`` (all fresh or already restarting), ``"restart"`` or
    ``"escalate"``. Components are checked in name order.
    """
    for name in sorted(components):
        c = components[name]
        if c.revive_at is not None:
            continue
        if now - c.last_beat > config.heartbeat_timeout_s + 1e-9:
            if restarts_used < config.restart_budget:
                return "restart", name
            return "escalate", name
    return None, None


def mission_health(state: BehaviorState, buffer_bytes: float, now: float, last_connection_s: float,
                   progress: float, last_event: str | None) -> MissionHealth:
    return MissionHealth(state.kind.value, float(buffer_bytes), max(0.0, now - last_connection_s),
                         float(progress), last_event)


# --------------------------------------------------------------------------
# executive
# --------------------------------------------------------------------------


@dataclass
class Observation:
    """What the executive sees this tick (assembled by the harness)."""

    tick: int
    now: float
    robot: RobotState
    irm: Irm
    mesh: MeshState
    pose: np.ndarray
    buffer_bytes: float
    connected: bool
    bottleneck_db: float | None
    plan_next: int | None  # next node of the planner's policy, if any
    tx_power_dbm: float
    supervisor: list = field(default_factory=list)  # SupervisorAction records due now


@dataclass
class TickResult:
    command: Command | None
    state: BehaviorState
    events: list  # (EventKind, payload)
    effects: list  # ("reset_planner",) ("deploy", radio_id) ("clear_fault",) ("jam", radio_id)


class Executive:
    def __init__(self, robot_id: str, platform: Platform, config: MissionConfig, dt: float,
                 components=("comms", "mapper", "planner"), wiggle_speed: float = 0.3):
        self.robot_id = robot_id
        self.platform = platform
        self.config = config
        self.dt = dt
        self.state = EXPLORE
        w = max(1, int(round(config.stuck_window_s / dt)))
        self.history: deque = deque(maxlen=w)
        self.components = {c: Component() for c in components}
        self.restarts_used = 0
        self.last_connection_s = 0.0
        self.last_event: str | None = None
        self.radio_seq = 0
        self.wiggle_speed = wiggle_speed

    # -- helpers --------------------------------------------------------------
    def _move(self, obs: Observation, goal: int | None) -> Command | None:
        r = obs.robot
        if not r.at_node():
            return Command("move", r.target, r.max_speed)
        if goal is None or goal == r.node:
            return Command("hold")
        path = shortest_path(obs.irm, r.node, goal)
        if path is None or len(path) < 2:
            return Command("hold")
        return Command("move", path[1], r.max_speed)

    def _explore_cmd(self, obs: Observation) -> Command:
        r = obs.robot
        if not r.at_node():
            return Command("move", r.target, r.max_speed)
        if obs.plan_next is None or not self.components["planner"].alive:
            return Command("hold")
        return Command("move", obs.plan_next, r.max_speed)

    def components_ok(self) -> bool:
        return all(c.alive for c in self.components.values())

    def inject_fault(self, component: str, persistent: bool) -> None:
        c = self.components.setdefault(component, Component())
        c.alive = False
        c.persistent_fault = persistent or c.persistent_fault

    def _heartbeats(self, now: float, events: list) -> None:
        for name in sorted(self.components):
            c = self.components[name]
            if c.revive_at is not None and now >= c.revive_at - 1e-9:
                c.revive_at = None
                c.last_beat = now
                c.alive = not c.persistent_fault
            elif c.alive:
                c.last_beat = now

    # -- main step ----------------------------------------------------------
    def tick(self, obs: Observation, rng: np.random.Generator) -> TickResult:
        cfg = self.config
        r = obs.robot
        events: list = []
        effects: list = []
        prev = self.state
        if obs.connected:
            self.last_connection_s = obs.now
        self.history.append((r.commanded_speed, r.measured_speed))
        self._heartbeats(obs.now, events)

        st = self.state
        # supervisor script
        for act in obs.supervisor:
            events.append((EventKind.SUPERVISOR_ACTION, {"action": act.action, "params": act.params}))
            if act.action == "ResumeRobot" and st.kind == Behavior.AWAIT_SUPERVISOR \
                    and st.cause != "MissionAborted":
                effects.append(("clear_fault",))
                effects.append(("reset_planner",))
                self.history.clear()
                self.restarts_used = 0
                for c in self.components.values():
                    c.alive, c.persistent_fault, c.revive_at, c.last_beat = True, False, None, obs.now
                st = EXPLORE
            elif act.action == "ManualGoal" and st.cause != "MissionAborted":
                st = BehaviorState(Behavior.MANUAL_GOAL, target_node=int(act.params.get("node", r.node)))
            elif act.action == "AbortMission":
                st = BehaviorState(Behavior.AWAIT_SUPERVISOR, cause="MissionAborted")

        command: Command | None = None
        if st.kind == Behavior.AWAIT_SUPERVISOR:
            pass
        else:
            # watchdog runs beside the behaviour monitors
            action, comp = watchdog_step(self.components, obs.now, self.restarts_used, cfg)
            if action == "restart":
                self.restarts_used += 1
                c = self.components[comp]
                c.revive_at = obs.now + cfg.restart_latency_s
                c.alive = False
                events.append((EventKind.COMPONENT_RESTART, {"component": comp, "used": self.restarts_used}))
            elif action == "escalate":
                st = BehaviorState(Behavior.AWAIT_SUPERVISOR, cause="EndogenousFault")
            if st.kind != Behavior.AWAIT_SUPERVISOR:
                st, command = self._behave(st, obs, rng, events, effects)

        if st.kind == Behavior.AWAIT_SUPERVISOR:
            command = None
            if prev.kind != Behavior.AWAIT_SUPERVISOR:
                events.append((EventKind.SUPERVISOR_NOTIFIED, {"cause": st.cause}))
        if st.kind != prev.kind:
            events.append((EventKind.BEHAVIOR_CHANGED, {"from": prev.kind.value, "to": st.to_record()}))
        self.state = st
        if events:
            self.last_event = events[-1][0].value
        return TickResult(command, st, events, effects)

    def _behave(self, st: BehaviorState, obs: Observation, rng, events, effects):
        cfg = self.config
        r = obs.robot
        full = len(self.history) == self.history.maxlen
        stuck_now = stuck_detect(self.history, cfg.stuck_window_s, cfg.stuck_threshold_mps, self.dt)

        # fall monitor
        if r.health == Health.FALLEN:
            if st.kind != Behavior.FALL_RECOVERY:
                resume = st if st.kind in (Behavior.RETURN_TO_COMMS, Behavior.MANUAL_GOAL) else None
                st = BehaviorState(Behavior.FALL_RECOVERY, resume=resume)
                return st, None
            ok, nst = fall_recover_step(st, self.platform, rng, cfg)
            events.append((EventKind.RECOVERY_ATTEMPT, {"attempt": st.attempts_used + 1, "success": ok}))
            if ok:
                effects.append(("reset_planner",))
                self.history.clear()
                return nst, Command("stand")
            return nst, None
        if st.kind == Behavior.FALL_RECOVERY:
            st = st.resume if st.resume is not None else EXPLORE

        # stuck monitor
        if st.kind == Behavior.STUCK_RECOVERY:
            action, nst = stuck_recover_step(st, stuck_now, full, obs.tick, self.dt, cfg)
            if action == "reset_planner":
                effects.append(("reset_planner",))
                self.history.clear()
                return nst, Command("reset_planner")
            if action == "wiggle":
                if nst.phase == "act" and nst.phase_since == obs.tick:
                    self.history.clear()
                return nst, Command("wiggle", speed=min(r.max_speed, self.wiggle_speed),
                                    duration=cfg.wiggle_duration_s)
            if action == "resume":
                if nst.phase == "check" and nst.phase_since == obs.tick:
                    self.history.clear()
                return nst, self._explore_cmd(obs)
            if action == "recovered":
                return nst, self._explore_cmd(obs)
            return nst, None
        if stuck_now:
            st = BehaviorState(Behavior.STUCK_RECOVERY, stage=0, phase="act", phase_since=obs.tick)
            return self._behave(st, obs, rng, events, effects)

        # comms monitor
        disconnected = obs.now - self.last_connection_s >= cfg.t_disc_s
        if st.kind not in (Behavior.RETURN_TO_COMMS, Behavior.MANUAL_GOAL):
            if obs.buffer_bytes >= cfg.T_B_high_bytes:
                st = BehaviorState(Behavior.RETURN_TO_COMMS, cause="Buffer")
            elif disconnected:
                st = BehaviorState(Behavior.RETURN_TO_COMMS, cause="Disconnected")
        if st.kind == Behavior.RETURN_TO_COMMS:
            target, nst = return_to_comms_step(st, obs.buffer_bytes, obs.connected, obs.irm, r.node,
                                               r.at_node(), obs.tick, self.dt, cfg)
            if nst.kind == Behavior.EXPLORE:
                return nst, self._explore_cmd(obs)
            return nst, self._move(obs, target)

        if st.kind == Behavior.MANUAL_GOAL:
            if r.at_node() and r.node == st.target_node:
                return EXPLORE, self._explore_cmd(obs)
            return st, self._move(obs, st.target_node)

        # radio deployment monitor
        if st.kind == Behavior.DEPLOY_RADIO or (
                r.radios > 0 and r.at_node()
                and should_deploy_radio(obs.pose, obs.mesh, cfg, obs.tx_power_dbm,
                                        bottleneck_db=obs.bottleneck_db)):
            if st.kind != Behavior.DEPLOY_RADIO:
                self.radio_seq += 1
                st = BehaviorState(Behavior.DEPLOY_RADIO, radio_id=f"{self.robot_id}-r{self.radio_seq}")
            outcome = deploy_radio(r.radios, rng, cfg.p_jam)
            if outcome == "Empty":
                events.append((EventKind.DEPLOY_SKIPPED, {"reason": "empty inventory"}))
                return EXPLORE, self._explore_cmd(obs)
            if outcome == "Jammed":
                events.append((EventKind.RADIO_JAMMED, {"radio_id": st.radio_id}))
                effects.append(("jam", st.radio_id))
                if r.radios - 1 > 0:
                    self.radio_seq += 1
                    return replace(st, radio_id=f"{self.robot_id}-r{self.radio_seq}"), Command("hold")
                return EXPLORE, Command("hold")
            effects.append(("deploy", st.radio_id))
            return EXPLORE, Command("hold")

        return EXPLORE, self._explore_cmd(obs)
