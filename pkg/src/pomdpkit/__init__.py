"""POMDP online planning and benchmarking toolkit."""

from .core import (
    CompatibilityReport,
    Environment,
    Kind,
    Policy,
    PolicyRunData,
    SimulationSpec,
    SpaceInfo,
    SpaceRequirements,
    canonical_serialize,
    check_compatibility,
    spec_hash,
)
from .beliefs import (
    UnweightedParticleBelief,
    WeightedParticleBelief,
    create_environment_belief,
    sample,
    systematic_resample,
    update,
)
from .evaluation import AggregateStats, EpisodeRecord, aggregate, cvar, run_episode, var
from .registry import DEFAULT_REGISTRY, Registry, default_registry
from .taskman import BackendSpec, EpisodeCache, ExecutionResult, TaskSet, execute, run_store_write

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "BackendSpec",
    "CompatibilityReport",
    "DEFAULT_REGISTRY",
    "Environment",
    "EpisodeCache",
    "EpisodeRecord",
    "ExecutionResult",
    "Kind",
    "Policy",
    "PolicyRunData",
    "Registry",
    "SimulationSpec",
    "SpaceInfo",
    "SpaceRequirements",
    "TaskSet",
    "UnweightedParticleBelief",
    "WeightedParticleBelief",
    "aggregate",
    "canonical_serialize",
    "check_compatibility",
    "create_environment_belief",
    "cvar",
    "default_registry",
    "execute",
    "run_episode",
    "run_store_write",
    "sample",
    "spec_hash",
    "systematic_resample",
    "update",
    "var",
]
