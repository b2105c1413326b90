"""Hyperparameter search over planner parameter spaces.

The shipped driver is seeded random search: the whole sampling sequence is
drawn up front from the caller's generator, so results are reproducible and
independent of how trials are scheduled.  Trials share one block of episode
seeds (common random numbers); the final evaluation of the winning
configuration runs on a disjoint seed block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .errors import ConfigError, ContractViolationError, PomdpkitError
from .evaluation import cvar
from .rng import Rng
from .taskman import BackendSpec, TaskSet, execute


@dataclass(frozen=True)
class RealDomain:
    lo: float
    hi: float
    scale: str = "linear"

    def __post_init__(self) -> None:
        if self.scale not in ("linear", "log"):
            raise ContractViolationError(f"unknown scale {self.scale!r}")
        if not self.lo < self.hi:
            raise ContractViolationError("real domain needs lo < hi")
        if self.scale == "log" and self.lo <= 0:
            raise ContractViolationError("logarithmic domain needs lo > 0")

    def sample(self, rng: Rng) -> float:
        if self.scale == "log":
            return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class IntDomain:
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ContractViolationError("integer domain needs lo <= hi")

    def sample(self, rng: Rng) -> int:
        return int(rng.integers(self.lo, self.hi + 1))


@dataclass(frozen=True)
class CategoricalDomain:
    choices: tuple

    def __post_init__(self) -> None:
        if not self.choices:
            raise ContractViolationError("categorical domain needs at least one choice")

    def sample(self, rng: Rng):
        return self.choices[int(rng.integers(len(self.choices)))]


Domain = RealDomain | IntDomain | CategoricalDomain


@dataclass(frozen=True)
class SearchSpace:
    params: Mapping[str, Domain]


def sample_params(space: SearchSpace, rng: Rng) -> dict[str, Any]:
    """One independent draw per parameter, in the space's declaration order."""
    return {name: domain.sample(rng) for name, domain in space.params.items()}


_DEFAULT_DOMAINS: dict[str, Domain] = {
    "depth": IntDomain(1, 30),
    "exploration_constant": RealDomain(0.1, 100.0, scale="log"),
    "n_simulations": IntDomain(10, 1000),
    "k_a": RealDomain(1.0, 20.0),
    "alpha_a": RealDomain(0.05, 1.0),
    "k_o": RealDomain(1.0, 20.0),
    "alpha_o": RealDomain(0.05, 1.0),
    "m_particles": IntDomain(1, 100),
    "risk_alpha": RealDomain(0.05, 1.0),
    "width": IntDomain(1, 10),
    "n_rollouts": IntDomain(1, 100),
}


def default_mcts_domains(names: list[str]) -> dict[str, Domain]:
    return {name: _DEFAULT_DOMAINS[name] for name in names}


@dataclass
class Trial:
    trial_index: int
    params: dict[str, Any]
    objective_value: float
    episode_seeds: list[list[int]] = field(default_factory=list)


def optimize(
    objective: Callable[[dict[str, Any]], float],
    space: SearchSpace,
    n_trials: int,
    rng: Rng,
) -> tuple[Trial, list[Trial]]:
    """Random-search driver: n independent samples, best by objective value.

    A trial whose objective raises is recorded with a -inf sentinel and the
    search continues; if every trial fails the search itself fails.  Ties go
    to the lowest trial index.
    """
    if n_trials < 1:
        raise ContractViolationError("n_trials must be at least 1")
    sampled = [sample_params(space, rng) for _ in range(n_trials)]
    history: list[Trial] = []
    best: Trial | None = None
    for i, params in enumerate(sampled):
        try:
            value = float(objective(params))
        except Exception:
            value = -math.inf
        trial = Trial(trial_index=i, params=params, objective_value=value)
        history.append(trial)
        if best is None or trial.objective_value > best.objective_value:
            best = trial
    if best is None or best.objective_value == -math.inf:
        raise PomdpkitError("every hyperparameter trial failed")
    return best, history


@dataclass(frozen=True)
class OptimizeBudget:
    n_trials: int
    episodes_per_trial: int
    eval_episodes: int

    def __post_init__(self) -> None:
        if min(self.n_trials, self.episodes_per_trial, self.eval_episodes) < 1:
            raise ConfigError("optimize budgets must all be positive")


@dataclass
class OptimizeEvalResult:
    best_trial: Trial
    history: list[Trial]
    best_params: dict[str, Any]
    eval_stats: Any
    eval_records: list
    eval_run_id: str | None


def optimize_and_evaluate(
    env_id: str,
    env_params: Mapping[str, Any],
    policy_id: str,
    space: SearchSpace,
    budget: OptimizeBudget,
    rng: Rng,
    *,
    belief_id: str = "weighted_pf",
    belief_params: Mapping[str, Any] | None = None,
    fixed_policy_params: Mapping[str, Any] | None = None,
    seed: int = 0,
    num_steps: int = 30,
    alpha: float = 0.05,
    backend: BackendSpec | None = None,
    cache_dir=None,
    run_dir=None,
    experiment_name: str = "optimize",
    objective_kind: str = "mean",
    registry=None,
) -> OptimizeEvalResult:
    """Random search on a search seed block, then evaluation of the winner on a
    disjoint evaluation seed block.  Both phases cache through the task manager,
    so rerunning the whole workflow touches no new episodes.
    """
    from .core import SimulationSpec
    from .registry import DEFAULT_REGISTRY

    registry = registry or DEFAULT_REGISTRY
    backend = backend or BackendSpec()
    belief_params = dict(belief_params or {})
    fixed_policy_params = dict(fixed_policy_params or {})
    if objective_kind not in ("mean", "cvar"):
        raise ConfigError(f"unknown objective {objective_kind!r}")

    resolved_env = registry.resolve_environment_params(env_id, env_params)
    search_indices = list(range(budget.episodes_per_trial))
    eval_indices = list(
        range(budget.episodes_per_trial, budget.episodes_per_trial + budget.eval_episodes)
    )
    assert not set(search_indices) & set(eval_indices), "seed blocks must be disjoint"

    def build_specs(policy_params: dict[str, Any], indices: list[int]) -> list[SimulationSpec]:
        full = registry.resolve_policy_params(policy_id, {**fixed_policy_params, **policy_params})
        return [
            SimulationSpec(
                environment_id=env_id,
                environment_params=resolved_env,
                policy_id=policy_id,
                policy_params=full,
                belief_id=belief_id,
                belief_params=belief_params,
                seed=seed,
                num_steps=num_steps,
                episode_index=i,
            )
            for i in indices
        ]

    def objective(params: dict[str, Any]) -> float:
        task_set = TaskSet(
            specs=build_specs(params, search_indices),
            experiment_name=f"{experiment_name}-search",
            backend=backend,
            cache_dir=cache_dir,
            run_dir=None,
        )
        result = execute(task_set, alpha=alpha, registry=registry)
        returns = [r.discounted_return for r in result.records]
        if objective_kind == "cvar":
            return cvar(returns, alpha)
        return float(sum(returns) / len(returns))

    best, history = optimize(objective, space, budget.n_trials, rng)
    seeds_block = [[seed, i] for i in search_indices]
    for trial in history:
        trial.episode_seeds = list(seeds_block)

    eval_task_set = TaskSet(
        specs=build_specs(best.params, eval_indices),
        experiment_name=experiment_name,
        backend=backend,
        cache_dir=cache_dir,
        run_dir=run_dir,
    )
    eval_result = execute(
        eval_task_set,
        alpha=alpha,
        registry=registry,
        extra_params={"policy_id": policy_id, "best_params": dict(best.params)},
    )
    label = next(iter(eval_result.stats))
    return OptimizeEvalResult(
        best_trial=best,
        history=history,
        best_params=registry.resolve_policy_params(
            policy_id, {**fixed_policy_params, **best.params}
        ),
        eval_stats=eval_result.stats[label],
        eval_records=eval_result.records,
        eval_run_id=eval_result.run_id,
    )
