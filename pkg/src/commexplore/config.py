"""Tunable parameters, grouped per subsystem.

Scenario files carry a ``params`` object with one sub-object per group
(``world``, ``radio``, ``net``, ``planner``, ``mission``, ``sim``). Command
line overrides use dotted keys, e.g. ``mission.wait_timeout_s=30``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any


@dataclass
class WorldParams:
    eps_cov: float = 1e-6
    slip_max: dict = field(default_factory=lambda: {"Wheeled": 0.1, "Legged": 0.1, "Aerial": 0.1})
    p_virtual_stuck: float = 0.3
    p_wiggle_clear: float = 0.6
    wiggle_speed_mps: float = 0.3
    initial_covered_prob: float = 0.5


@dataclass
class LinkModel:
    frequency_hz: float = 2.4e9
    noise_floor_dbm: float = -90.0
    wall_damping_db: float = 8.0
    bandwidth_hz: float = 1.0e6
    tx_power_dbm: float = 20.0
    snr_cap_db: float = 60.0
    link_floor_db: float = -10.0

    def __post_init__(self):
        if self.frequency_hz <= 0 or self.bandwidth_hz <= 0 or self.wall_damping_db < 0:
            raise ValueError("link model: frequency and bandwidth must be positive, damping non-negative")


@dataclass
class NetParams:
    retransmit_timeout_s: float = 2.0
    rate_window_s: float = 10.0
    ts_queue_bound: int = 20
    ts_ttl_s: float = 5.0
    compression: float = 1.0
    # per-class token buckets (bytes/s, bytes)
    bucket_rate: dict = field(default_factory=lambda: {"Key": 40_000.0, "MissionCritical": 20_000.0,
                                                       "TimeSensitive": 10_000.0})
    bucket_burst: dict = field(default_factory=lambda: {"Key": 80_000.0, "MissionCritical": 40_000.0,
                                                        "TimeSensitive": 10_000.0})
    map_bytes_per_bit: float = 2_000.0
    pose_bytes: int = 200
    pose_period_s: float = 1.0
    health_bytes: int = 400
    loss_prob: float = 0.0


@dataclass
class PlannerParams:
    gamma_local: float = 0.95
    gamma_global: float = 0.99
    lambda_cost: float = 0.01
    horizon: int = 10
    replan_steps: int = 2
    n_rollouts: int = 512
    heuristic_mix: tuple = (0.5, 0.3, 0.2)
    guide_weight: float = 0.05
    gls_iterations: int = 2000
    gls_mu_factor: float = 0.3
    kappa: float = 2.0
    sensor_max_m: float = 10.0
    local_window_m: float = 20.0
    max_global_frontiers: int = 40
    force: str = ""  # "", "Local" or "Global"


@dataclass
class MissionConfig:
    T_C_db: float = 20.0
    T_none_db: float = 5.0
    T_B_low_bytes: float = 200_000.0
    T_B_high_bytes: float = 1_000_000.0
    t_disc_s: float = 600.0
    wait_timeout_s: float = 60.0
    stuck_window_s: float = 5.0
    stuck_threshold_mps: float = 0.3
    wiggle_duration_s: float = 4.0
    fall_attempts_n: int = 3
    p_selfright: float = 0.7
    p_jam: float = 0.05
    deploy_snr_db: float = 20.0
    overlap_fraction_max: float = 0.5
    health_period_s: float = 5.0
    restart_budget: int = 2
    restart_latency_s: float = 3.0
    heartbeat_timeout_s: float = 2.0

    def __post_init__(self):
        if not self.T_B_low_bytes < self.T_B_high_bytes:
            raise ValueError("mission config: T_B_low_bytes must be below T_B_high_bytes")
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name.startswith("p_"):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"mission config: {f.name} must be a probability")
            elif v <= 0:
                raise ValueError(f"mission config: {f.name} must be positive")


@dataclass
class SimParams:
    dt_s: float = 0.5
    duration_s: float = 600.0
    merge_radius_m: float = 1.0
    stop_at_coverage: float = 0.0  # > 0 ends the run early once reached


@dataclass
class Params:
    world: WorldParams = field(default_factory=WorldParams)
    radio: LinkModel = field(default_factory=LinkModel)
    net: NetParams = field(default_factory=NetParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    mission: MissionConfig = field(default_factory=MissionConfig)
    sim: SimParams = field(default_factory=SimParams)

    @classmethod
    def from_dict(cls, raw: dict | None) -> "Params":
        raw = raw or {}
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise KeyError(f"unknown parameter group(s): {sorted(unknown)}")
        groups = {}
        for f in dataclasses.fields(cls):
            sub = raw.get(f.name, {})
            group_cls = f.default_factory
            names = {g.name for g in dataclasses.fields(group_cls)}
            bad = set(sub) - names
            if bad:
                raise KeyError(f"unknown parameter(s) in {f.name}: {sorted(bad)}")
            groups[f.name] = _build(group_cls, sub)
        return cls(**groups)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_overrides(self, overrides: list[str] | dict | None) -> "Params":
        if not overrides:
            return self
        items = overrides.items() if isinstance(overrides, dict) else (_split(o) for o in overrides)
        raw = self.to_dict()
        for key, value in items:
            group, _, name = key.partition(".")
            if group not in raw or name not in raw[group]:
                raise KeyError(f"unknown override key {key!r}")
            raw[group][name] = _coerce(raw[group][name], value)
        return Params.from_dict(raw)


def _build(group_cls, values: dict):
    obj = group_cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in values.items()})
    return obj


def _split(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ValueError(f"override must look like key=value, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def _coerce(current: Any, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        # JSON does not distinguish 60 from 60.0; accept either spelling
        try:
            return int(value)
        except ValueError:
            f = float(value)
            return int(f) if f.is_integer() else f
    if isinstance(current, float):
        return float(value) if value.lower() not in ("inf", "+inf") else math.inf
    if isinstance(current, (dict, list, tuple)):
        return json.loads(value)
    return value
