"""Simulation events and the digest-chained event log."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable


class EventKind(str, Enum):
    MOVED = "Moved"
    COMMAND_REJECTED = "CommandRejected"
    STUCK_ONSET = "StuckOnset"
    STUCK_CLEARED = "StuckCleared"
    FALL_ONSET = "FallOnset"
    RECOVERED = "Recovered"
    RECOVERY_ATTEMPT = "RecoveryAttempt"
    RADIO_DEPLOYED = "RadioDeployed"
    RADIO_JAMMED = "RadioJammed"
    DEPLOY_SKIPPED = "DeploySkipped"
    MESSAGE_DELIVERED = "MessageDelivered"
    MESSAGE_DROPPED = "MessageDropped"
    SUPERVISOR_NOTIFIED = "SupervisorNotified"
    SUPERVISOR_ACTION = "SupervisorAction"
    BEHAVIOR_CHANGED = "BehaviorChanged"
    COMPONENT_RESTART = "ComponentRestart"
    REPLAN = "Replan"
    IRM_MERGED = "IrmMerged"


def canonical(value: Any) -> Any:
    """JSON-safe, platform-stable form: floats rounded to 9 significant digits."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float) or hasattr(value, "dtype"):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == int(v) and abs(v) < 2**53:
            return int(v)
        return float(f"{v:.9g}")
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SimEvent:
    tick: int
    robot_id: str
    kind: EventKind
    payload: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"tick": self.tick, "robot": self.robot_id, "kind": self.kind.value, "payload": self.payload}

    def to_json(self) -> str:
        return dumps(self.to_record())


class EventLog:
    """Ordered event sink that folds each tick into a running sha256 digest."""

    def __init__(self):
        self.events: list[SimEvent] = []
        self.tick_digests: dict[int, str] = {}
        self._lines: list[str] = []
        self._pending: list[str] = []
        self._last_tick = -1
        self._digest = hashlib.sha256(b"commexplore").hexdigest()

    def emit(self, event: SimEvent) -> None:
        if event.tick < self._last_tick:
            raise ValueError(f"event tick {event.tick} precedes {self._last_tick}")
        self._last_tick = event.tick
        self.events.append(event)
        line = event.to_json()
        self._pending.append(line)
        self._lines.append(line)

    def extend(self, events: Iterable[SimEvent]) -> None:
        for e in events:
            self.emit(e)

    def close_tick(self, tick: int) -> str:
        self._digest = chain_digest(self._digest, self._pending)
        self._pending = []
        self.tick_digests[tick] = self._digest
        self._lines.append(dumps({"tick": tick, "digest": self._digest}))
        return self._digest

    @property
    def digest(self) -> str:
        return self._digest

    def lines(self) -> list[str]:
        return list(self._lines)


def chain_digest(previous: str, lines: list[str]) -> str:
    h = hashlib.sha256(previous.encode())
    for line in lines:
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()
