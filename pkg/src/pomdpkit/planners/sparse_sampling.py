"""Sparse sampling: depth-limited lookahead over sampled generative branches.

The depth-d value of a belief is estimated recursively: for every action,
draw ``width`` generative samples from belief draws, update the belief with
each sampled observation, and fold reward + discounted child value across the
samples with the configured risk operator (mean, or empirical CVaR for
risk-averse backups).  Depth 0 is worth 0, so depth d looks ahead d actions.

With ``exhaustive=True`` and an environment that can enumerate its step
outcomes, sampling is replaced by exact expectation over every (particle,
outcome) pair with exact Bayes posteriors, which makes the estimator equal to
full expectimax over the belief-MDP.
"""

from __future__ import annotations

import time
from typing import Any

import numpy as np

from .. import beliefs
from ..core import EnumerableEnvironment, Environment, Kind, Policy, PolicyRunData, SpaceRequirements
from ..errors import BudgetExceededError, ContractViolationError, ParticleDepletionError
from ..evaluation import cvar
from ..rng import Rng
from .common import CVAR, EXPECTATION, PlannerConfig


def _risk_value(values: list[float], operator: str, alpha: float) -> float:
    if operator == EXPECTATION:
        return float(np.mean(values))
    return cvar(values, alpha)


def _particle_key(state: Any) -> Any:
    if isinstance(state, np.ndarray):
        return tuple(state.tolist())
    if isinstance(state, np.generic):
        return state.item()
    return state


class SparseSampling(Policy):
    policy_id = "sparse_sampling"

    def __init__(self, env: Environment, config: PlannerConfig | None = None) -> None:
        self.env = env
        self.config = config or PlannerConfig()
        self.config.validate_against(env)
        if self.config.exhaustive:
            if not isinstance(env, EnumerableEnvironment):
                raise ContractViolationError(
                    "exhaustive sparse sampling needs an environment with enumerable step outcomes"
                )
            if self.config.risk_operator != EXPECTATION:
                raise ContractViolationError("exhaustive mode computes exact expectations only")

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(action_kinds=frozenset({Kind.DISCRETE}))

    def hyperparameter_space(self):
        from ..hyperopt import SearchSpace, default_mcts_domains

        return SearchSpace(default_mcts_domains(["depth", "width", "risk_alpha"]))

    def action(self, belief, rng: Rng):
        cfg = self.config
        t0 = time.perf_counter()
        actions = tuple(self.env.actions())
        self._nodes = 0
        if cfg.exhaustive:
            dist = self._belief_to_dist(belief)
            values = {a: self._q_exact(dist, a, max(cfg.depth, 1)) for a in actions}
            per_action = 1
        else:
            ceiling = (len(actions) * cfg.width) ** max(cfg.depth, 1)
            if ceiling > cfg.enumeration_cap:
                raise BudgetExceededError(
                    f"sparse sampling tree of ~{ceiling} nodes exceeds cap {cfg.enumeration_cap}"
                )
            values = {a: self._q_sampled(belief, a, max(cfg.depth, 1), rng) for a in actions}
            per_action = cfg.width
        best = None
        best_v = -np.inf
        for a in actions:
            if values[a] > best_v:
                best_v = values[a]
                best = a
        data = PolicyRunData(
            nodes_expanded=self._nodes,
            root_action_visits={str(a): per_action for a in actions},
            root_action_values={str(a): float(values[a]) for a in actions},
            planning_time=time.perf_counter() - t0,
            max_depth_reached=max(cfg.depth, 1),
        )
        return best, data

    # sampled estimator ------------------------------------------------------

    def _q_sampled(self, belief, action, d: int, rng: Rng) -> float:
        cfg = self.config
        self._nodes += 1
        gamma = self.env.discount
        vals = []
        for _ in range(cfg.width):
            s = beliefs.sample(belief, rng)
            _s2, o, r, term, _safety = self.env.step(s, action, rng)
            if term or d <= 1:
                vals.append(r)
                continue
            try:
                child = beliefs.update(belief, action, o, self.env, rng)
            except ParticleDepletionError:
                vals.append(r)
                continue
            vals.append(r + gamma * self._v_sampled(child, d - 1, rng))
        return _risk_value(vals, cfg.risk_operator, cfg.risk_alpha)

    def _v_sampled(self, belief, d: int, rng: Rng) -> float:
        return max(self._q_sampled(belief, a, d, rng) for a in self.env.actions())

    # exact estimator --------------------------------------------------------

    def _belief_to_dist(self, belief) -> list[tuple[Any, float]]:
        acc: dict[Any, float] = {}
        keyed: dict[Any, Any] = {}
        weights = belief.weights
        for s, w in zip(belief.particles, weights):
            k = _particle_key(s)
            acc[k] = acc.get(k, 0.0) + float(w)
            keyed[k] = k if not isinstance(s, np.generic) else s.item()
        return [(keyed[k], w) for k, w in acc.items()]

    def _q_exact(self, dist: list[tuple[Any, float]], action, d: int) -> float:
        self._nodes += 1
        if self._nodes > self.config.enumeration_cap:
            raise BudgetExceededError(
                f"exhaustive sparse sampling exceeded the {self.config.enumeration_cap}-node cap"
            )
        gamma = self.env.discount
        value = 0.0
        groups: dict[Any, dict[Any, float]] = {}
        for s, p in dist:
            for po, s2, o, r, term, _safety in self.env.enumerate_step_outcomes(s, action):
                pr = p * po
                if pr == 0.0:
                    continue
                value += pr * r
                if not term and d > 1:
                    groups.setdefault(o, {})
                    k = _particle_key(s2)
                    groups[o][k] = groups[o].get(k, 0.0) + pr
        for _o, smap in groups.items():
            po = sum(smap.values())
            if po <= 0.0:
                continue
            child = [(s2, q / po) for s2, q in smap.items()]
            value += gamma * po * self._v_exact(child, d - 1)
        return value

    def _v_exact(self, dist: list[tuple[Any, float]], d: int) -> float:
        if d == 0:
            return 0.0
        return max(self._q_exact(dist, a, d) for a in self.env.actions())
