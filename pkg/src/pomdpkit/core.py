"""Core contracts: spaces, environments, policies, and simulation specs.

The canonical serialization defined here is the foundation of the content
cache: equal specs must map to equal bytes on every machine, so the byte
format is fixed (see ``docs/formats.md``) and covered by tests.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .errors import ContractViolationError, SerializationError
from .rng import Rng

SCHEMA_VERSION = 1

State = Any
Action = Any
Observation = Any


class Kind(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    MIXED = "mixed"


@dataclass(frozen=True)
class SpaceInfo:
    """Declares the structure of an environment's state/action/observation spaces.

    ``action_count`` is present exactly when actions are discrete;
    ``state_dim`` exactly when the state space is continuous or mixed.
    """

    state_kind: Kind
    action_kind: Kind
    observation_kind: Kind
    action_count: int | None = None
    state_dim: int | None = None

    def __post_init__(self) -> None:
        if (self.action_kind == Kind.DISCRETE) != (self.action_count is not None):
            raise ContractViolationError(
                "action_count must be present iff action_kind is discrete"
            )
        if self.action_count is not None and self.action_count < 1:
            raise ContractViolationError("action_count must be positive")
        has_dim = self.state_dim is not None
        if (self.state_kind in (Kind.CONTINUOUS, Kind.MIXED)) != has_dim:
            raise ContractViolationError(
                "state_dim must be present iff state_kind is continuous or mixed"
            )
        if has_dim and self.state_dim < 1:
            raise ContractViolationError("state_dim must be positive")


@dataclass(frozen=True)
class SpaceRequirements:
    """The pattern of spaces a policy supports; ``None`` leaves an axis unconstrained."""

    state_kinds: frozenset[Kind] | None = None
    action_kinds: frozenset[Kind] | None = None
    observation_kinds: frozenset[Kind] | None = None

    @staticmethod
    def any_space() -> "SpaceRequirements":
        return SpaceRequirements()


@dataclass(frozen=True)
class CompatibilityReport:
    ok: bool
    mismatches: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.ok:
            return "compatible"
        return "incompatible: " + "; ".join(self.mismatches)


def check_compatibility(
    env_info: SpaceInfo, requirements: SpaceRequirements
) -> CompatibilityReport:
    """Match an environment's spaces against a policy's supported pattern.

    Returns a report naming every mismatching axis; never raises.
    """
    mismatches = []
    axes = (
        ("state", env_info.state_kind, requirements.state_kinds),
        ("action", env_info.action_kind, requirements.action_kinds),
        ("observation", env_info.observation_kind, requirements.observation_kinds),
    )
    for name, kind, allowed in axes:
        if allowed is not None and kind not in allowed:
            wanted = ", ".join(sorted(k.value for k in allowed))
            mismatches.append(f"{name} axis: environment is {kind.value}, policy supports {{{wanted}}}")
    return CompatibilityReport(ok=not mismatches, mismatches=tuple(mismatches))


@dataclass
class PolicyRunData:
    """Per-step planner diagnostics attached to every chosen action.

    Action keys in the visit/value maps are stringified so the structure
    serializes uniformly regardless of the environment's action type.
    """

    nodes_expanded: int = 0
    root_action_visits: dict[str, int] = field(default_factory=dict)
    root_action_values: dict[str, float] = field(default_factory=dict)
    planning_time: float = 0.0
    max_depth_reached: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes_expanded": self.nodes_expanded,
            "root_action_visits": dict(self.root_action_visits),
            "root_action_values": dict(self.root_action_values),
            "planning_time": self.planning_time,
            "max_depth_reached": self.max_depth_reached,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "PolicyRunData":
        return PolicyRunData(
            nodes_expanded=int(d["nodes_expanded"]),
            root_action_visits={k: int(v) for k, v in d["root_action_visits"].items()},
            root_action_values={k: float(v) for k, v in d["root_action_values"].items()},
            planning_time=float(d["planning_time"]),
            max_depth_reached=int(d["max_depth_reached"]),
        )


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

_MAX_SEED = 2**64 - 1


def _canonical_float(x: float) -> str:
    if not np.isfinite(x):
        raise SerializationError(f"non-finite numeric parameter: {x!r}")
    s = repr(float(x))
    # repr() is shortest round-trip; force an explicit marker so a real can
    # never collide with an integer rendering.
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def _canonical_fragments(value: Any) -> Iterator[str]:
    if value is None:
        yield "null"
    elif isinstance(value, (bool, np.bool_)):
        yield "true" if value else "false"
    elif isinstance(value, (int, np.integer)):
        yield str(int(value))
    elif isinstance(value, (float, np.floating)):
        yield _canonical_float(float(value))
    elif isinstance(value, str):
        yield json.dumps(value, ensure_ascii=True)
    elif isinstance(value, Mapping):
        keys = list(value.keys())
        if any(not isinstance(k, str) for k in keys):
            raise SerializationError("map keys must be strings")
        if len(set(keys)) != len(keys):
            raise SerializationError("duplicate map keys")
        yield "{"
        for i, k in enumerate(sorted(keys)):
            if i:
                yield ","
            yield json.dumps(k, ensure_ascii=True)
            yield ":"
            yield from _canonical_fragments(value[k])
        yield "}"
    elif isinstance(value, (list, tuple)):
        yield "["
        for i, item in enumerate(value):
            if i:
                yield ","
            yield from _canonical_fragments(item)
        yield "]"
    else:
        raise SerializationError(f"unserializable parameter of type {type(value).__name__}")


def canonical_bytes(value: Any) -> bytes:
    """Canonical UTF-8 rendering of a parameter tree (see docs/formats.md)."""
    return "".join(_canonical_fragments(value)).encode("utf-8")


@dataclass(frozen=True)
class SimulationSpec:
    """The complete description of one episode; the unit of caching.

    Parameter maps must hold only canonically serializable values (strings,
    finite numbers, booleans, None, and nested lists/maps of those).
    """

    environment_id: str
    environment_params: Mapping[str, Any]
    policy_id: str
    policy_params: Mapping[str, Any]
    belief_id: str
    belief_params: Mapping[str, Any]
    seed: int
    num_steps: int
    episode_index: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) <= _MAX_SEED:
            raise ContractViolationError("seed must fit in an unsigned 64-bit integer")
        if int(self.num_steps) < 0:
            raise ContractViolationError("num_steps must be nonnegative")
        if int(self.episode_index) < 0:
            raise ContractViolationError("episode_index must be nonnegative")
        if int(self.schema_version) < 1:
            raise ContractViolationError("schema_version must be positive")

    def as_mapping(self) -> dict[str, Any]:
        return {
            "environment_id": self.environment_id,
            "environment_params": dict(self.environment_params),
            "policy_id": self.policy_id,
            "policy_params": dict(self.policy_params),
            "belief_id": self.belief_id,
            "belief_params": dict(self.belief_params),
            "seed": int(self.seed),
            "num_steps": int(self.num_steps),
            "episode_index": int(self.episode_index),
            "schema_version": int(self.schema_version),
        }

    @staticmethod
    def from_mapping(d: Mapping[str, Any]) -> "SimulationSpec":
        return SimulationSpec(
            environment_id=d["environment_id"],
            environment_params=dict(d["environment_params"]),
            policy_id=d["policy_id"],
            policy_params=dict(d["policy_params"]),
            belief_id=d["belief_id"],
            belief_params=dict(d["belief_params"]),
            seed=int(d["seed"]),
            num_steps=int(d["num_steps"]),
            episode_index=int(d["episode_index"]),
            schema_version=int(d["schema_version"]),
        )


def canonical_serialize(spec: SimulationSpec) -> bytes:
    """Deterministic byte form of a spec: sorted keys, fixed number rendering."""
    return canonical_bytes(spec.as_mapping())


def spec_hash(spec: SimulationSpec) -> str:
    """64-char lowercase hex SHA-256 of the canonical serialization."""
    return hashlib.sha256(canonical_serialize(spec)).hexdigest()


# ---------------------------------------------------------------------------
# Environment and policy contracts
# ---------------------------------------------------------------------------

StepResult = tuple[State, Observation, float, bool, bool]

TERMINAL_OBS = None
"""Distinguished observation emitted when stepping an already-terminal state.

Terminal states are absorbing: stepping one yields the same state, zero
reward, ``terminal=True`` and this token, whose log-mass is 0.0 for terminal
next-states and -inf otherwise.  Belief updates conditioned on any live
observation therefore wash terminal particles out.
"""


class Environment(ABC):
    """Generative POMDP model.

    ``step`` must be a pure function of (state, action, rng stream): feeding
    identical generator states yields identical outputs.  All model objects
    are immutable after construction and safe to share across workers.
    """

    env_id: str = ""

    @property
    @abstractmethod
    def discount(self) -> float:
        ...

    @abstractmethod
    def sample_initial_state(self, rng: Rng) -> State:
        ...

    @abstractmethod
    def step(self, state: State, action: Action, rng: Rng) -> StepResult:
        """Returns (next_state, observation, reward, terminal, safety_event)."""

    @abstractmethod
    def observation_loglik(self, obs: Observation, next_state: State, action: Action) -> float:
        """Log-density (continuous) or log-mass (discrete) of ``obs``."""

    @abstractmethod
    def is_terminal(self, state: State) -> bool:
        ...

    @abstractmethod
    def space_info(self) -> SpaceInfo:
        ...

    def actions(self) -> Sequence[Action]:
        """Finite action list; required when the action space is discrete."""
        raise ContractViolationError(f"{type(self).__name__} has no discrete action list")

    def params(self) -> dict[str, Any]:
        """The full config as an ordered key->value map (feeds the spec hash)."""
        raise NotImplementedError

    def goal_reached(self, state: State, action: Action, next_state: State) -> bool:
        """Whether the step that just terminated the episode achieved the goal."""
        return False

    # Optional batch hooks: environments with array-friendly states may
    # implement these to let particle filters run vectorized.  Semantics must
    # match per-particle application of ``step`` (transition component) and
    # ``observation_loglik``.

    def supports_batch(self) -> bool:
        return False

    def step_batch(
        self, states: np.ndarray, action: Action, rng: Rng
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized transition: (next_states, rewards, terminals, safety_events)."""
        raise NotImplementedError

    def loglik_batch(self, obs: Observation, next_states: np.ndarray, action: Action) -> np.ndarray:
        raise NotImplementedError

    def sample_initial_states(self, n: int, rng: Rng) -> list[State] | np.ndarray:
        return [self.sample_initial_state(rng) for _ in range(n)]


class EnumerableEnvironment(Environment):
    """Extension for environments whose step outcomes can be enumerated exactly.

    Enables exhaustive lookahead (sparse sampling's enumeration mode) and
    exact test oracles.
    """

    @abstractmethod
    def enumerate_step_outcomes(
        self, state: State, action: Action
    ) -> list[tuple[float, State, Observation, float, bool, bool]]:
        """All (probability, next_state, obs, reward, terminal, safety) outcomes."""


class Policy(ABC):
    """Action-selection contract: consumes a belief, never mutates it."""

    policy_id: str = ""

    @abstractmethod
    def action(self, belief, rng: Rng) -> tuple[Action, PolicyRunData]:
        ...

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements.any_space()

    def hyperparameter_space(self):
        """The policy's tunable-parameter domains (a hyperopt.SearchSpace)."""
        from .hyperopt import SearchSpace

        return SearchSpace({})
