"""Online planners implementing the policy contract."""

from .action_sequences import ActionSequences
from .baselines import FixedSequencePolicy, RandomPolicy
from .common import (
    DiscreteActionSampler,
    PlannerConfig,
    SearchNode,
    pw_allows_new_child,
    random_rollout,
    ucb_score,
)
from .pft import PftDpw, SparsePft
from .pomcp import Pomcp, PomcpDpw, Pomcpow
from .sparse_sampling import SparseSampling

__all__ = [
    "ActionSequences",
    "DiscreteActionSampler",
    "FixedSequencePolicy",
    "PftDpw",
    "PlannerConfig",
    "Pomcp",
    "PomcpDpw",
    "Pomcpow",
    "RandomPolicy",
    "SearchNode",
    "SparsePft",
    "SparseSampling",
    "pw_allows_new_child",
    "random_rollout",
    "ucb_score",
]
