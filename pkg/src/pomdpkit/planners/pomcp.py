"""History-tree Monte Carlo planners: POMCP, POMCP-DPW, and POMCPOW.

All three share one action-selection rule (UCB with uniform expansion of
untried actions) and differ in how observation branches are handled:

* POMCP branches on sampled observations by exact equality and admits every
  branch, so it needs a discrete observation space.
* POMCP-DPW caps both action and observation children with progressive
  widening; when the observation side is closed, an existing child is chosen
  proportionally to its traversal count and the simulation continues from a
  state drawn uniformly from that child's particle bag.
* POMCPOW keeps weighted particle bags: every simulated next state is
  inserted with the likelihood of the child's representative observation as
  its weight, and descents through existing children resample the
  continuation state (and its paired reward) from that weighted bag.

POMCP is literally the shared code path with widening disabled, so running
POMCP-DPW with non-binding widening constants reproduces POMCP draw for draw.
"""

from __future__ import annotations

import math
import time

from .. import beliefs
from ..core import Environment, Kind, Policy, PolicyRunData, SpaceRequirements
from ..errors import ContractViolationError
from ..rng import Rng
from .common import (
    EXPECTATION,
    DiscreteActionSampler,
    PlannerConfig,
    SearchNode,
    backup,
    best_root_action,
    leaf_value,
    pw_allows_new_child,
    root_diagnostics,
    select_action_node,
)


def _pick_by_edge_visits(anode: SearchNode, rng: Rng) -> SearchNode:
    children = list(anode.children.values())
    total = sum(ch.edge_visits for ch in children)
    u = rng.random() * total
    acc = 0
    for ch in children:
        acc += ch.edge_visits
        if u < acc:
            return ch
    return children[-1]


def _weighted_bag_index(weights: list[float], rng: Rng) -> int:
    total = math.fsum(weights)
    u = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    return len(weights) - 1


class _HistoryTreePlanner:
    """One planning call; owns its tree and rng, never shared."""

    def __init__(
        self,
        env: Environment,
        config: PlannerConfig,
        rng: Rng,
        widen_actions: bool,
        widen_obs: bool,
        weighted_obs: bool,
    ) -> None:
        self.env = env
        self.cfg = config
        self.rng = rng
        self.widen_actions = widen_actions
        self.widen_obs = widen_obs
        self.weighted_obs = weighted_obs
        self.sampler = DiscreteActionSampler(env.actions())
        self.gamma = env.discount
        self.nodes_expanded = 0
        self.max_level = 0

    def plan(self, belief) -> tuple[object, PolicyRunData]:
        t0 = time.perf_counter()
        root = SearchNode("belief")
        for _ in range(self.cfg.n_simulations):
            s = beliefs.sample(belief, self.rng)
            self._simulate(s, root, self.cfg.depth, 1)
        action = best_root_action(root)
        visits, values = root_diagnostics(root)
        data = PolicyRunData(
            nodes_expanded=self.nodes_expanded,
            root_action_visits=visits,
            root_action_values=values,
            planning_time=time.perf_counter() - t0,
            max_depth_reached=self.max_level,
        )
        return action, data

    def _select(self, bnode: SearchNode):
        before = len(bnode.children)
        anode, action = select_action_node(
            bnode, self.sampler, self.cfg.exploration_constant, self.rng,
            self.widen_actions, self.cfg.k_a, self.cfg.alpha_a,
        )
        if len(bnode.children) > before:
            self.nodes_expanded += 1
        return anode, action

    def _simulate(self, s, bnode: SearchNode, remaining: int, level: int) -> float:
        if level > self.max_level:
            self.max_level = level
        if self.weighted_obs:
            total = self._step_pomcpow(s, bnode, remaining, level)
        else:
            total = self._step_dpw(s, bnode, remaining, level)
        bnode.N += 1
        return total

    def _step_dpw(self, s, bnode: SearchNode, remaining: int, level: int) -> float:
        cfg = self.cfg
        anode, action = self._select(bnode)
        obs_open = (not self.widen_obs) or pw_allows_new_child(
            anode.N, len(anode.children), cfg.k_o, cfg.alpha_o
        )
        if obs_open:
            s2, o, r, term, _safety = self.env.step(s, action, self.rng)
            child = anode.children.get(o)
            created = child is None
            if created:
                child = SearchNode("belief")
                child.obs_label = o
                anode.children[o] = child
                self.nodes_expanded += 1
            child.edge_visits += 1
            child.bag.append((s2, r, term))
            if term or remaining <= 1:
                total = r
            elif created:
                total = r + self.gamma * leaf_value(s2, self.env, remaining - 1, self.rng, cfg.rollout)
            else:
                total = r + self.gamma * self._simulate(s2, child, remaining - 1, level + 1)
        else:
            child = _pick_by_edge_visits(anode, self.rng)
            child.edge_visits += 1
            s2, r, term = child.bag[int(self.rng.integers(len(child.bag)))]
            if term or remaining <= 1:
                total = r
            else:
                total = r + self.gamma * self._simulate(s2, child, remaining - 1, level + 1)
        backup(anode, total, EXPECTATION, 1.0)
        return total

    def _step_pomcpow(self, s, bnode: SearchNode, remaining: int, level: int) -> float:
        cfg = self.cfg
        anode, action = self._select(bnode)
        s2, o, r, term, _safety = self.env.step(s, action, self.rng)
        created = False
        if pw_allows_new_child(anode.N, len(anode.children), cfg.k_o, cfg.alpha_o):
            child = anode.children.get(o)
            if child is None:
                child = SearchNode("belief")
                child.obs_label = o
                anode.children[o] = child
                self.nodes_expanded += 1
                created = True
        else:
            child = _pick_by_edge_visits(anode, self.rng)
            o = child.obs_label
        child.edge_visits += 1
        w = math.exp(self.env.observation_loglik(o, s2, action))
        child.bag.append((s2, r, term))
        child.bag_weights.append(w)
        if created:
            if term or remaining <= 1:
                total = r
            else:
                total = r + self.gamma * leaf_value(s2, self.env, remaining - 1, self.rng, cfg.rollout)
        else:
            idx = _weighted_bag_index(child.bag_weights, self.rng)
            s3, r3, term3 = child.bag[idx]
            if term3 or remaining <= 1:
                total = r3
            else:
                total = r3 + self.gamma * self._simulate(s3, child, remaining - 1, level + 1)
        backup(anode, total, EXPECTATION, 1.0)
        return total


class _HistoryTreePolicy(Policy):
    widen_actions = False
    widen_obs = False
    weighted_obs = False

    def __init__(self, env: Environment, config: PlannerConfig | None = None) -> None:
        self.env = env
        self.config = config or PlannerConfig()
        self.config.validate_against(env)
        if self.config.risk_operator != EXPECTATION:
            raise ContractViolationError(
                f"{self.policy_id} backs up by expectation only; use the PFT or "
                "sparse-sampling planners for the cvar operator"
            )

    def action(self, belief, rng: Rng):
        planner = _HistoryTreePlanner(
            self.env, self.config, rng,
            self.widen_actions, self.widen_obs, self.weighted_obs,
        )
        return planner.plan(belief)

    def hyperparameter_space(self):
        from ..hyperopt import SearchSpace, default_mcts_domains

        names = ["depth", "exploration_constant", "n_simulations"]
        if self.widen_actions:
            names += ["k_a", "alpha_a", "k_o", "alpha_o"]
        return SearchSpace(default_mcts_domains(names))


class Pomcp(_HistoryTreePolicy):
    policy_id = "pomcp"

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(
            action_kinds=frozenset({Kind.DISCRETE}),
            observation_kinds=frozenset({Kind.DISCRETE}),
        )


class PomcpDpw(_HistoryTreePolicy):
    policy_id = "pomcp_dpw"
    widen_actions = True
    widen_obs = True

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(action_kinds=frozenset({Kind.DISCRETE}))


class Pomcpow(_HistoryTreePolicy):
    policy_id = "pomcpow"
    widen_actions = True
    widen_obs = True
    weighted_obs = True

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(action_kinds=frozenset({Kind.DISCRETE}))
