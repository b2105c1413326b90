"""Particle-filter tree search: MCTS whose nodes hold m-particle beliefs.

Expanding a (belief, action) edge samples one state from the node's belief,
steps it generatively to obtain a conditioning observation, then runs a full
weighted particle-filter update of all m particles under that observation.
The edge reward is the prior-weighted mean of the per-particle step rewards,
so belief transitions score the whole distribution rather than one sample.

SparsePFT caps each action at ``width`` belief children and picks among them
uniformly at random once full (children are i.i.d. observation draws);
PFT-DPW applies progressive widening on both actions and belief children and
revisits children proportionally to traversal counts.  Backups fold returns
with the configured risk operator, so a CVaR operator turns either variant
into its risk-averse counterpart.
"""

from __future__ import annotations

import time

import numpy as np

from .. import beliefs
from ..beliefs import WeightedParticleBelief, observation_logliks, propagate, reweight
from ..core import Environment, Kind, Policy, PolicyRunData, SpaceRequirements
from ..errors import ContractViolationError, ParticleDepletionError
from ..rng import Rng
from .common import (
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
from .pomcp import _pick_by_edge_visits


def _resize_belief(belief, m: int, rng: Rng) -> WeightedParticleBelief:
    """m i.i.d. weighted draws from the planning belief, uniform output weights."""
    w = np.asarray(belief.weights)
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    idx = np.minimum(np.searchsorted(cdf, rng.random(m), side="right"), len(w) - 1)
    particles = belief.particles
    if isinstance(particles, np.ndarray):
        chosen = particles[idx]
    else:
        chosen = [particles[i] for i in idx]
    threshold = getattr(belief, "resample_threshold", beliefs.DEFAULT_RESAMPLE_THRESHOLD)
    return WeightedParticleBelief(chosen, np.full(m, 1.0 / m), threshold, _validated=True)


class _PftPlanner:
    def __init__(self, env: Environment, config: PlannerConfig, rng: Rng, dpw: bool) -> None:
        self.env = env
        self.cfg = config
        self.rng = rng
        self.dpw = dpw
        self.sampler = DiscreteActionSampler(env.actions())
        self.gamma = env.discount
        self.nodes_expanded = 0
        self.max_level = 0

    def plan(self, belief) -> tuple[object, PolicyRunData]:
        t0 = time.perf_counter()
        root = SearchNode("belief")
        root.belief = _resize_belief(belief, self.cfg.m_particles, self.rng)
        for _ in range(self.cfg.n_simulations):
            self._simulate(root, self.cfg.depth, 1)
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

    def _simulate(self, bnode: SearchNode, remaining: int, level: int) -> float:
        if level > self.max_level:
            self.max_level = level
        cfg = self.cfg
        before = len(bnode.children)
        anode, action = select_action_node(
            bnode, self.sampler, cfg.exploration_constant, self.rng,
            self.dpw, cfg.k_a, cfg.alpha_a,
        )
        if len(bnode.children) > before:
            self.nodes_expanded += 1
        if self.dpw:
            allow_new = pw_allows_new_child(anode.N, len(anode.children), cfg.k_o, cfg.alpha_o)
        else:
            allow_new = len(anode.children) < cfg.width
        child = None
        created = False
        if allow_new:
            child = self._expand_edge(bnode.belief, action)
            if child is not None:
                anode.children[len(anode.children)] = child
                self.nodes_expanded += 1
                created = True
        if child is None and anode.children:
            # widening closed, or expansion abandoned after a depletion retry
            if self.dpw:
                child = _pick_by_edge_visits(anode, self.rng)
            else:
                keys = list(anode.children.keys())
                child = anode.children[keys[int(self.rng.integers(len(keys)))]]
        if child is None:
            total = 0.0
        else:
            child.edge_visits += 1
            if child.terminal or remaining <= 1:
                total = child.edge_reward
            elif created:
                s_roll = beliefs.sample(child.belief, self.rng)
                total = child.edge_reward + self.gamma * leaf_value(
                    s_roll, self.env, remaining - 1, self.rng, cfg.rollout
                )
            else:
                total = child.edge_reward + self.gamma * self._simulate(child, remaining - 1, level + 1)
        bnode.N += 1
        backup(anode, total, cfg.risk_operator, cfg.risk_alpha)
        return total

    def _expand_edge(self, belief: WeightedParticleBelief, action) -> SearchNode | None:
        """Belief transition under one sampled observation; one retry on depletion."""
        for _attempt in range(2):
            s = beliefs.sample(belief, self.rng)
            _s2, obs, _r, _term, _safety = self.env.step(s, action, self.rng)
            nxt, rewards, terms, _safe = propagate(self.env, belief.particles, action, self.rng)
            edge_reward = float(np.dot(belief.weights, rewards))
            try:
                w = reweight(belief.weights, observation_logliks(self.env, obs, nxt, action))
            except ParticleDepletionError:
                continue
            child_belief = WeightedParticleBelief(
                nxt, w, belief.resample_threshold, _validated=True
            )
            if child_belief.effective_sample_size() < belief.resample_threshold * len(child_belief):
                child_belief = beliefs.systematic_resample(child_belief, self.rng)
            child = SearchNode("belief")
            child.belief = child_belief
            child.obs_label = obs
            child.edge_reward = edge_reward
            child.terminal = bool(np.all(terms))
            return child
        return None


class _PftPolicy(Policy):
    dpw = False

    def __init__(self, env: Environment, config: PlannerConfig | None = None) -> None:
        self.env = env
        self.config = config or PlannerConfig()
        self.config.validate_against(env)

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(action_kinds=frozenset({Kind.DISCRETE}))

    def action(self, belief, rng: Rng):
        return _PftPlanner(self.env, self.config, rng, self.dpw).plan(belief)

    def hyperparameter_space(self):
        from ..hyperopt import SearchSpace, default_mcts_domains

        names = ["depth", "exploration_constant", "n_simulations", "m_particles", "risk_alpha"]
        if self.dpw:
            names += ["k_a", "alpha_a", "k_o", "alpha_o"]
        else:
            names += ["width"]
        return SearchSpace(default_mcts_domains(names))


class SparsePft(_PftPolicy):
    policy_id = "sparse_pft"
    dpw = False


class PftDpw(_PftPolicy):
    policy_id = "pft_dpw"
    dpw = True
