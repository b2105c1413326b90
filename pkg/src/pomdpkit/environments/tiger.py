"""Classic two-door tiger problem.

States are small ints so particle sets vectorize: 0 tiger-left, 1 tiger-right,
2 done (absorbing).  Listening hears the correct side with probability
``obs_accuracy``; opening a door ends the episode and emits the uninformative
terminal token.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from ..core import Environment, EnumerableEnvironment, Kind, SpaceInfo, StepResult, TERMINAL_OBS
from ..errors import ContractViolationError
from ..rng import Rng

TIGER_LEFT = 0
TIGER_RIGHT = 1
DONE = 2

LISTEN = "listen"
OPEN_LEFT = "open-left"
OPEN_RIGHT = "open-right"

HEAR_LEFT = "hear-left"
HEAR_RIGHT = "hear-right"


@dataclass(frozen=True)
class TigerConfig:
    listen_cost: float = -1.0
    wrong_door_penalty: float = -100.0
    correct_door_reward: float = 10.0
    obs_accuracy: float = 0.85
    discount: float = 0.95

    def __post_init__(self) -> None:
        if not 0.5 < self.obs_accuracy <= 1.0:
            raise ContractViolationError("obs_accuracy must lie in (0.5, 1]")
        if not 0.0 < self.discount <= 1.0:
            raise ContractViolationError("discount must lie in (0, 1]")


class Tiger(EnumerableEnvironment):
    env_id = "tiger"

    def __init__(self, config: TigerConfig | None = None) -> None:
        self.config = config or TigerConfig()
        self._log_acc = math.log(self.config.obs_accuracy)
        self._log_miss = (
            math.log(1.0 - self.config.obs_accuracy) if self.config.obs_accuracy < 1.0 else -math.inf
        )

    @property
    def discount(self) -> float:
        return self.config.discount

    def params(self) -> dict:
        c = self.config
        return {
            "listen_cost": c.listen_cost,
            "wrong_door_penalty": c.wrong_door_penalty,
            "correct_door_reward": c.correct_door_reward,
            "obs_accuracy": c.obs_accuracy,
            "discount": c.discount,
        }

    def space_info(self) -> SpaceInfo:
        return SpaceInfo(Kind.DISCRETE, Kind.DISCRETE, Kind.DISCRETE, action_count=3)

    def actions(self):
        return (LISTEN, OPEN_LEFT, OPEN_RIGHT)

    def observations(self):
        return (HEAR_LEFT, HEAR_RIGHT, TERMINAL_OBS)

    def sample_initial_state(self, rng: Rng) -> int:
        return TIGER_LEFT if rng.random() < 0.5 else TIGER_RIGHT

    def sample_initial_states(self, n: int, rng: Rng) -> np.ndarray:
        return (rng.random(n) >= 0.5).astype(np.int8)

    def is_terminal(self, state: int) -> bool:
        return state == DONE

    def step(self, state: int, action, rng: Rng) -> StepResult:
        c = self.config
        if state == DONE:
            return DONE, TERMINAL_OBS, 0.0, True, False
        if state not in (TIGER_LEFT, TIGER_RIGHT):
            raise ContractViolationError(f"unknown tiger state {state!r}")
        if action == LISTEN:
            correct = rng.random() < c.obs_accuracy
            heard_left = correct == (state == TIGER_LEFT)
            return state, (HEAR_LEFT if heard_left else HEAR_RIGHT), c.listen_cost, False, False
        if action == OPEN_LEFT or action == OPEN_RIGHT:
            opened_tiger = (action == OPEN_LEFT) == (state == TIGER_LEFT)
            reward = c.wrong_door_penalty if opened_tiger else c.correct_door_reward
            return DONE, TERMINAL_OBS, reward, True, opened_tiger
        raise ContractViolationError(f"unknown tiger action {action!r}")

    def observation_loglik(self, obs, next_state: int, action) -> float:
        if next_state == DONE:
            return 0.0 if obs is TERMINAL_OBS else -math.inf
        if action != LISTEN or obs is TERMINAL_OBS:
            return -math.inf
        if obs == HEAR_LEFT:
            return self._log_acc if next_state == TIGER_LEFT else self._log_miss
        if obs == HEAR_RIGHT:
            return self._log_acc if next_state == TIGER_RIGHT else self._log_miss
        return -math.inf

    def goal_reached(self, state: int, action, next_state: int) -> bool:
        return (action == OPEN_LEFT and state == TIGER_RIGHT) or (
            action == OPEN_RIGHT and state == TIGER_LEFT
        )

    # batch hooks -----------------------------------------------------------

    def supports_batch(self) -> bool:
        return True

    def step_batch(self, states: np.ndarray, action, rng: Rng):
        c = self.config
        done = states == DONE
        live = ~done
        if action == LISTEN:
            nxt = states.copy()
            rewards = np.where(live, c.listen_cost, 0.0)
            terminals = done.copy()
            safety = np.zeros(len(states), dtype=bool)
            return nxt, rewards, terminals, safety
        if action in (OPEN_LEFT, OPEN_RIGHT):
            tiger_side = TIGER_LEFT if action == OPEN_LEFT else TIGER_RIGHT
            opened_tiger = live & (states == tiger_side)
            rewards = np.where(
                live, np.where(opened_tiger, c.wrong_door_penalty, c.correct_door_reward), 0.0
            )
            nxt = np.full(len(states), DONE, dtype=states.dtype)
            terminals = np.ones(len(states), dtype=bool)
            return nxt, rewards, terminals, opened_tiger
        raise ContractViolationError(f"unknown tiger action {action!r}")

    def loglik_batch(self, obs, next_states: np.ndarray, action) -> np.ndarray:
        done = next_states == DONE
        if obs is TERMINAL_OBS:
            return np.where(done, 0.0, -np.inf)
        if action != LISTEN or obs not in (HEAR_LEFT, HEAR_RIGHT):
            return np.full(len(next_states), -np.inf)
        side = TIGER_LEFT if obs == HEAR_LEFT else TIGER_RIGHT
        out = np.where(next_states == side, self._log_acc, self._log_miss)
        return np.where(done, -np.inf, out)

    # exact enumeration -----------------------------------------------------

    def enumerate_step_outcomes(self, state: int, action):
        c = self.config
        if state == DONE:
            return [(1.0, DONE, TERMINAL_OBS, 0.0, True, False)]
        if action == LISTEN:
            if state == TIGER_LEFT:
                return [
                    (c.obs_accuracy, state, HEAR_LEFT, c.listen_cost, False, False),
                    (1.0 - c.obs_accuracy, state, HEAR_RIGHT, c.listen_cost, False, False),
                ]
            return [
                (c.obs_accuracy, state, HEAR_RIGHT, c.listen_cost, False, False),
                (1.0 - c.obs_accuracy, state, HEAR_LEFT, c.listen_cost, False, False),
            ]
        if action in (OPEN_LEFT, OPEN_RIGHT):
            opened_tiger = (action == OPEN_LEFT) == (state == TIGER_LEFT)
            reward = c.wrong_door_penalty if opened_tiger else c.correct_door_reward
            return [(1.0, DONE, TERMINAL_OBS, reward, True, opened_tiger)]
        raise ContractViolationError(f"unknown tiger action {action!r}")
