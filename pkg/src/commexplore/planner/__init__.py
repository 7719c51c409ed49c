"""Hierarchical coverage planning: global orienteering, local rollouts, and the choice between them."""

from .core import (
    GuidanceParam,
    InvalidPolicyError,
    Policy,
    PolicyOrigin,
    RewardParams,
    adaptive_coverage_radius,
    belief_reward,
    meta_select,
    policy_success_prob,
)
from .coverage import CoverageModel
from .figop import FigOpInstance, InvalidPathError, build_figop, expand_path, figop_score, gls_solve, path_time
from .lcp import evaluate_sequence, guidance_distances, lcp_plan

__all__ = [
    "CoverageModel",
    "FigOpInstance",
    "GuidanceParam",
    "InvalidPathError",
    "InvalidPolicyError",
    "Policy",
    "PolicyOrigin",
    "RewardParams",
    "adaptive_coverage_radius",
    "belief_reward",
    "build_figop",
    "evaluate_sequence",
    "expand_path",
    "figop_score",
    "gls_solve",
    "guidance_distances",
    "lcp_plan",
    "meta_select",
    "path_time",
    "policy_success_prob",
]
