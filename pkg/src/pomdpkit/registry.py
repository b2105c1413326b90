"""Name registries resolving simulation-spec ids into live objects.

Environments, policies, and beliefs register under stable string ids so a
spec (and therefore its hash) pins an exact runnable configuration.  Custom
components plug in through ``register_*`` on a registry instance; workers use
the module-level default registry, which carries every shipped component.
"""

from __future__ import annotations

import dataclasses
from typing import Any, Callable, Mapping

from . import beliefs
from .core import Environment, Policy
from .environments import (
    LightDark,
    LightDarkConfig,
    MountainCar,
    MountainCarConfig,
    RockSample,
    RockSampleConfig,
    Tiger,
    TigerConfig,
)
from .errors import ConfigError
from .planners import (
    ActionSequences,
    FixedSequencePolicy,
    PftDpw,
    PlannerConfig,
    Pomcp,
    PomcpDpw,
    Pomcpow,
    RandomPolicy,
    SparsePft,
    SparseSampling,
)
from .rng import Rng

EnvFactory = Callable[[Mapping[str, Any]], Environment]
PolicyFactory = Callable[[Environment, Mapping[str, Any]], Policy]
BeliefFactory = Callable[[Environment, Mapping[str, Any], Rng], Any]


def _build_config(config_cls, params: Mapping[str, Any], context: str):
    names = {f.name for f in dataclasses.fields(config_cls)}
    unknown = sorted(set(params) - names)
    if unknown:
        raise ConfigError(f"{context}: unknown parameters {unknown}; valid: {sorted(names)}")
    kwargs = dict(params)
    # structured fields arrive from configs/specs as lists; normalize to tuples
    for f in dataclasses.fields(config_cls):
        if f.name in kwargs and isinstance(kwargs[f.name], list):
            kwargs[f.name] = _tuplify(kwargs[f.name])
    try:
        return config_cls(**kwargs)
    except Exception as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _env_factory(env_cls, config_cls) -> EnvFactory:
    def build(params: Mapping[str, Any]) -> Environment:
        return env_cls(_build_config(config_cls, params, env_cls.env_id))

    return build


def _planner_factory(policy_cls) -> PolicyFactory:
    def build(env: Environment, params: Mapping[str, Any]) -> Policy:
        try:
            config = PlannerConfig.from_params(dict(params))
            return policy_cls(env, config)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"{policy_cls.policy_id}: {exc}") from exc

    return build


def _random_factory(env: Environment, params: Mapping[str, Any]) -> Policy:
    if params:
        raise ConfigError(f"random policy takes no parameters, got {sorted(params)}")
    return RandomPolicy(env)


def _fixed_sequence_factory(env: Environment, params: Mapping[str, Any]) -> Policy:
    extra = sorted(set(params) - {"actions"})
    if extra:
        raise ConfigError(f"fixed_sequence: unknown parameters {extra}")
    return FixedSequencePolicy(env, params.get("actions", ()))


def _weighted_pf_factory(env: Environment, params: Mapping[str, Any], rng: Rng):
    extra = sorted(set(params) - {"n_particles", "resample_threshold"})
    if extra:
        raise ConfigError(f"weighted_pf: unknown parameters {extra}")
    return beliefs.create_environment_belief(
        env,
        int(params.get("n_particles", 100)),
        rng,
        resample_threshold=float(params.get("resample_threshold", beliefs.DEFAULT_RESAMPLE_THRESHOLD)),
    )


def _unweighted_pf_factory(env: Environment, params: Mapping[str, Any], rng: Rng):
    extra = sorted(set(params) - {"n_particles"})
    if extra:
        raise ConfigError(f"unweighted_pf: unknown parameters {extra}")
    seeded = beliefs.create_environment_belief(env, int(params.get("n_particles", 100)), rng)
    return beliefs.UnweightedParticleBelief(seeded.particles)


class Registry:
    def __init__(self) -> None:
        self.environments: dict[str, EnvFactory] = {}
        self.policies: dict[str, PolicyFactory] = {}
        self.beliefs: dict[str, BeliefFactory] = {}

    def register_environment(self, env_id: str, factory: EnvFactory) -> None:
        self.environments[env_id] = factory

    def register_policy(self, policy_id: str, factory: PolicyFactory) -> None:
        self.policies[policy_id] = factory

    def register_belief(self, belief_id: str, factory: BeliefFactory) -> None:
        self.beliefs[belief_id] = factory

    def build_environment(self, env_id: str, params: Mapping[str, Any]) -> Environment:
        if env_id not in self.environments:
            raise ConfigError(
                f"unknown environment id {env_id!r}; registered: {sorted(self.environments)}"
            )
        return self.environments[env_id](params)

    def build_policy(self, policy_id: str, env: Environment, params: Mapping[str, Any]) -> Policy:
        if policy_id not in self.policies:
            raise ConfigError(
                f"unknown policy id {policy_id!r}; registered: {sorted(self.policies)}"
            )
        return self.policies[policy_id](env, params)

    def build_belief(self, belief_id: str, env: Environment, params: Mapping[str, Any], rng: Rng):
        if belief_id not in self.beliefs:
            raise ConfigError(
                f"unknown belief id {belief_id!r}; registered: {sorted(self.beliefs)}"
            )
        return self.beliefs[belief_id](env, params, rng)

    def resolve_policy_params(self, policy_id: str, params: Mapping[str, Any]) -> dict[str, Any]:
        """Full parameter map with defaults materialized; this is what specs hash."""
        if policy_id in _PLANNER_CLASSES:
            return PlannerConfig.from_params(dict(params)).as_params()
        return dict(params)

    def resolve_environment_params(self, env_id: str, params: Mapping[str, Any]) -> dict[str, Any]:
        return self.build_environment(env_id, params).params()


_PLANNER_CLASSES = {
    cls.policy_id: cls
    for cls in (Pomcp, PomcpDpw, Pomcpow, SparseSampling, SparsePft, PftDpw, ActionSequences)
}


def default_registry() -> Registry:
    reg = Registry()
    reg.register_environment("tiger", _env_factory(Tiger, TigerConfig))
    reg.register_environment("lightdark", _env_factory(LightDark, LightDarkConfig))
    reg.register_environment("rocksample", _env_factory(RockSample, RockSampleConfig))
    reg.register_environment("mountaincar", _env_factory(MountainCar, MountainCarConfig))
    for policy_id, cls in _PLANNER_CLASSES.items():
        reg.register_policy(policy_id, _planner_factory(cls))
    reg.register_policy("random", _random_factory)
    reg.register_policy("fixed_sequence", _fixed_sequence_factory)
    reg.register_belief("weighted_pf", _weighted_pf_factory)
    reg.register_belief("unweighted_pf", _unweighted_pf_factory)
    return reg


DEFAULT_REGISTRY = default_registry()
