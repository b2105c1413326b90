"""Open-loop baseline: evaluate fixed action sequences, commit to the best head.

Every length-``depth`` action sequence (enumerated when the count fits under
the enumeration cap, otherwise uniformly sampled) is scored by Monte Carlo:
``n_rollouts`` episodes from belief draws apply the sequence regardless of
observations, and the mean discounted return ranks sequences.  Ties go to the
lexicographically first sequence in action-list order.
"""

from __future__ import annotations

import itertools
import time

import numpy as np

from .. import beliefs
from ..core import Environment, Kind, Policy, PolicyRunData, SpaceRequirements
from ..rng import Rng
from .common import PlannerConfig

SAMPLED_SEQUENCES = 1000


class ActionSequences(Policy):
    policy_id = "action_sequences"

    def __init__(self, env: Environment, config: PlannerConfig | None = None) -> None:
        self.env = env
        self.config = config or PlannerConfig()
        self.config.validate_against(env)

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(action_kinds=frozenset({Kind.DISCRETE}))

    def hyperparameter_space(self):
        from ..hyperopt import SearchSpace, default_mcts_domains

        return SearchSpace(default_mcts_domains(["depth", "n_rollouts"]))

    def _candidate_sequences(self, actions, depth: int, rng: Rng):
        if len(actions) ** depth <= self.config.enumeration_cap:
            return list(itertools.product(actions, repeat=depth))
        index = {a: i for i, a in enumerate(actions)}
        sampled = {
            tuple(actions[int(rng.integers(len(actions)))] for _ in range(depth))
            for _ in range(SAMPLED_SEQUENCES)
        }
        return sorted(sampled, key=lambda seq: tuple(index[a] for a in seq))

    def action(self, belief, rng: Rng):
        cfg = self.config
        t0 = time.perf_counter()
        actions = tuple(self.env.actions())
        depth = max(cfg.depth, 1)
        gamma = self.env.discount
        best_seq = None
        best_v = -np.inf
        head_values: dict[str, float] = {}
        head_visits: dict[str, int] = {}
        for seq in self._candidate_sequences(actions, depth, rng):
            vals = []
            for _ in range(cfg.n_rollouts):
                s = beliefs.sample(belief, rng)
                total = 0.0
                disc = 1.0
                for a in seq:
                    if self.env.is_terminal(s):
                        break
                    s, _obs, r, term, _safety = self.env.step(s, a, rng)
                    total += disc * r
                    disc *= gamma
                    if term:
                        break
                vals.append(total)
            v = float(np.mean(vals))
            head = str(seq[0])
            head_visits[head] = head_visits.get(head, 0) + cfg.n_rollouts
            if head not in head_values or v > head_values[head]:
                head_values[head] = v
            if v > best_v:
                best_v = v
                best_seq = seq
        data = PolicyRunData(
            nodes_expanded=0,
            root_action_visits=head_visits,
            root_action_values=head_values,
            planning_time=time.perf_counter() - t0,
            max_depth_reached=depth,
        )
        return best_seq[0], data
