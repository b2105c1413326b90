"""Non-planning reference policies used as baselines and in scripted tests."""

from __future__ import annotations

from ..core import Environment, Kind, Policy, PolicyRunData, SpaceRequirements
from ..errors import ContractViolationError
from ..rng import Rng


class RandomPolicy(Policy):
    """Uniform over the environment's action list."""

    policy_id = "random"

    def __init__(self, env: Environment) -> None:
        self.env = env
        self._actions = tuple(env.actions())

    def requirements(self) -> SpaceRequirements:
        return SpaceRequirements(action_kinds=frozenset({Kind.DISCRETE}))

    def action(self, belief, rng: Rng):
        a = self._actions[int(rng.integers(len(self._actions)))]
        return a, PolicyRunData()


class FixedSequencePolicy(Policy):
    """Plays a scripted action list, repeating the final action afterwards.

    The step counter is episode-scoped: build a fresh instance per episode.
    """

    policy_id = "fixed_sequence"

    def __init__(self, env: Environment, actions) -> None:
        if not actions:
            raise ContractViolationError("fixed_sequence needs at least one action")
        self.env = env
        valid = tuple(env.actions())
        self._seq = []
        for a in actions:
            match = next((v for v in valid if v == a), None)
            if match is None:
                raise ContractViolationError(f"scripted action {a!r} not in {valid}")
            self._seq.append(match)
        self._i = 0

    def action(self, belief, rng: Rng):
        a = self._seq[min(self._i, len(self._seq) - 1)]
        self._i += 1
        return a, PolicyRunData()
