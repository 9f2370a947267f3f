"""Restriction policy suite: heuristics, the expert rule, and the
learned multi-agent actor-critic."""

from .buffer import ReplayBuffer, sample_dual
from .heuristic import (HEURISTIC_POLICIES, CountThresholdPolicy, ExpertPolicy,
                        MitigationPolicy, NoPolicy, Policy, RandomPolicy,
                        SuppressionPolicy, make_policy)
from .nets import MLP, Adam, soft_update
from .train import (LearnedPolicy, ObsScaler, TrainConfig, TrainResult,
                    load_policy, rho_at, save_policy, train)

__all__ = [
    "Policy", "NoPolicy", "RandomPolicy", "CountThresholdPolicy",
    "MitigationPolicy", "SuppressionPolicy", "ExpertPolicy", "make_policy",
    "HEURISTIC_POLICIES", "ReplayBuffer", "sample_dual", "MLP", "Adam",
    "soft_update", "TrainConfig", "TrainResult", "ObsScaler", "LearnedPolicy",
    "train", "rho_at", "save_policy", "load_policy",
]
