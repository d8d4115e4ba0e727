from .base import OraclePolicy, Policy, RandomPolicy
from .net import (
    ActionDistribution,
    NetConfig,
    NeuralPolicy,
    PolicyNet,
    action_distribution,
    log_prob,
    sample_action,
)

__all__ = [
    "ActionDistribution",
    "NetConfig",
    "NeuralPolicy",
    "OraclePolicy",
    "Policy",
    "PolicyNet",
    "RandomPolicy",
    "action_distribution",
    "log_prob",
    "sample_action",
]
