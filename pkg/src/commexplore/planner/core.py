"""Planner data types and the small decision rules shared by both levels."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from enum import Enum


class InvalidPolicyError(ValueError):
    pass


class PolicyOrigin(str, Enum):
    LOCAL = "Local"
    GLOBAL = "Global"


@dataclass(frozen=True)
class RewardParams:
    gamma: float = 0.95
    lambda_cost: float = 0.01  # bits per second of travel
    horizon: int = 10
    replan_steps: int = 2

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.lambda_cost < 0:
            raise ValueError("lambda_cost must be non-negative")
        if not 0 < self.replan_steps <= self.horizon:
            raise ValueError("need 0 < replan_steps <= horizon")


@dataclass
class Policy:
    nodes: list[int]
    step_gains: list[float]
    step_times: list[float]
    utility: float
    success_prob: float
    origin: PolicyOrigin
    value: float = 0.0  # unclipped objective

    @property
    def expected(self) -> float:
        return self.success_prob * self.utility

    def to_record(self) -> dict:
        return {"origin": self.origin.value, "nodes": list(self.nodes), "U": self.utility,
                "P": self.success_prob, "value": self.value}


@dataclass(frozen=True)
class GuidanceParam:
    target: int | None
    corridor: tuple = field(default_factory=tuple)


def belief_reward(info_gain_bits: float, action_cost_s: float, params: RewardParams) -> float:
    """Linear trade-off between information gain and travel time."""
    if info_gain_bits < 0 or action_cost_s < 0:
        raise ValueError("gain and cost must be non-negative")
    return info_gain_bits - params.lambda_cost * action_cost_s


def adaptive_coverage_radius(clearance_at_pose: float, sensor_max: float, kappa: float = 2.0) -> float:
    if clearance_at_pose <= 0 or sensor_max <= 0:
        raise ValueError("clearance and sensor range must be positive")
    return min(sensor_max, kappa * clearance_at_pose)


def policy_success_prob(policy_nodes, irm) -> float:
    """Product of edge success probabilities along the node sequence."""
    nodes = policy_nodes.nodes if isinstance(policy_nodes, Policy) else list(policy_nodes)
    p = 1.0
    for a, b in zip(nodes, nodes[1:]):
        e = irm.edge(a, b)
        if e is None:
            raise InvalidPolicyError(f"policy uses missing edge {a}-{b}")
        p *= e.success_prob
    return p


def meta_select(local: Policy, global_: Policy) -> Policy:
    """Pick the policy with the larger success-weighted utility; ties keep the local plan."""
    # exact rational products: no rounding can reorder a near-tie
    if Fraction(local.success_prob) * Fraction(local.utility) >= \
            Fraction(global_.success_prob) * Fraction(global_.utility):
        return local
    return global_


def utility_from_value(value: float) -> float:
    return max(0.0, value) if math.isfinite(value) else 0.0
