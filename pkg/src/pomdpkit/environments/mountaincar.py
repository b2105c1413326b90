"""Under-powered mountain car with noisy position observations.

Deterministic classic dynamics; partial observability comes entirely from the
Gaussian measurement of position (velocity is never observed).  The episode
ends with the goal reward once position reaches ``goal_position``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Environment, Kind, SpaceInfo, StepResult
from ..errors import ContractViolationError
from ..rng import Rng

P_MIN, P_MAX = -1.2, 0.6
V_MIN, V_MAX = -0.07, 0.07

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MountainCarConfig:
    obs_noise_std: float = 0.1
    goal_position: float = 0.45
    step_cost: float = -1.0
    goal_reward: float = 100.0
    force: float = 0.001
    gravity_coeff: float = 0.0025
    discount: float = 0.95

    def __post_init__(self) -> None:
        if self.obs_noise_std <= 0:
            raise ContractViolationError("obs_noise_std must be positive")
        if not 0.0 < self.discount <= 1.0:
            raise ContractViolationError("discount must lie in (0, 1]")


class MountainCar(Environment):
    env_id = "mountaincar"

    def __init__(self, config: MountainCarConfig | None = None) -> None:
        self.config = config or MountainCarConfig()

    @property
    def discount(self) -> float:
        return self.config.discount

    def params(self) -> dict:
        c = self.config
        return {
            "obs_noise_std": c.obs_noise_std,
            "goal_position": c.goal_position,
            "step_cost": c.step_cost,
            "goal_reward": c.goal_reward,
            "force": c.force,
            "gravity_coeff": c.gravity_coeff,
            "discount": c.discount,
        }

    def space_info(self) -> SpaceInfo:
        return SpaceInfo(Kind.CONTINUOUS, Kind.DISCRETE, Kind.CONTINUOUS, action_count=3, state_dim=2)

    def actions(self):
        return (-1, 0, 1)

    def sample_initial_state(self, rng: Rng):
        # classic start: random position in the valley, at rest
        return (float(rng.uniform(-0.6, -0.4)), 0.0)

    def sample_initial_states(self, n: int, rng: Rng) -> np.ndarray:
        out = np.zeros((n, 2))
        out[:, 0] = rng.uniform(-0.6, -0.4, size=n)
        return out

    def is_terminal(self, state) -> bool:
        return state[0] >= self.config.goal_position

    def step(self, state, action, rng: Rng) -> StepResult:
        c = self.config
        a = int(action)
        if a not in (-1, 0, 1):
            raise ContractViolationError(f"unknown mountaincar action {action!r}")
        p, v = float(state[0]), float(state[1])
        if p >= c.goal_position:
            obs = p + c.obs_noise_std * rng.standard_normal()
            return (p, v), float(obs), 0.0, True, False
        v2 = min(max(v + a * c.force - c.gravity_coeff * math.cos(3.0 * p), V_MIN), V_MAX)
        p2 = min(max(p + v2, P_MIN), P_MAX)
        terminal = p2 >= c.goal_position
        reward = c.goal_reward if terminal else c.step_cost
        obs = p2 + c.obs_noise_std * rng.standard_normal()
        return (p2, v2), float(obs), reward, terminal, False

    def observation_loglik(self, obs, next_state, action) -> float:
        s = self.config.obs_noise_std
        z = (float(obs) - float(next_state[0])) / s
        return -0.5 * z * z - math.log(s) - _LOG_SQRT_2PI

    def goal_reached(self, state, action, next_state) -> bool:
        return float(next_state[0]) >= self.config.goal_position

    # batch hooks -----------------------------------------------------------

    def supports_batch(self) -> bool:
        return True

    def step_batch(self, states: np.ndarray, action, rng: Rng):
        c = self.config
        a = int(action)
        if a not in (-1, 0, 1):
            raise ContractViolationError(f"unknown mountaincar action {action!r}")
        p, v = states[:, 0], states[:, 1]
        done = p >= c.goal_position
        live = ~done
        v2 = np.clip(v + a * c.force - c.gravity_coeff * np.cos(3.0 * p), V_MIN, V_MAX)
        p2 = np.clip(p + v2, P_MIN, P_MAX)
        nxt = states.copy()
        nxt[live, 0] = p2[live]
        nxt[live, 1] = v2[live]
        terminals = nxt[:, 0] >= c.goal_position
        rewards = np.where(live, np.where(terminals, c.goal_reward, c.step_cost), 0.0)
        safety = np.zeros(len(states), dtype=bool)
        return nxt, rewards, terminals, safety

    def loglik_batch(self, obs, next_states: np.ndarray, action) -> np.ndarray:
        s = self.config.obs_noise_std
        z = (float(obs) - next_states[:, 0]) / s
        return -0.5 * z * z - math.log(s) - _LOG_SQRT_2PI
