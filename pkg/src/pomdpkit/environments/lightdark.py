"""One-dimensional light-dark localization with optional obstacle region.

The agent moves on a line; observation noise shrinks linearly toward the
light source, so good localization requires traveling toward the light before
declaring at the origin.  Action 0 declares: goal reward within
``goal_radius`` of the origin, miss penalty otherwise.  A configurable
interval can stochastically penalize (and optionally terminate) any move that
lands inside it.

States are (x, flag) pairs; flag 0 is live, 1 declared, 2 terminated by an
obstacle hit.  Declared states emit the terminal observation token; all other
states measure x with noise sigma(x) = sigma_slope*|x - light| + sigma_min.
The discrete variant rounds states and observations to the integer grid and
scores observations by Gaussian bin mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ..core import Environment, Kind, SpaceInfo, StepResult, TERMINAL_OBS
from ..errors import ContractViolationError
from ..rng import Rng

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

LIVE = 0.0
DECLARED = 1.0
CRASHED = 2.0

DEFAULT_ACTIONS = (-10.0, -1.0, 0.0, 1.0, 10.0)


@dataclass(frozen=True)
class LightDarkConfig:
    light_position: float = 5.0
    sigma_slope: float = 0.5
    sigma_min: float = 0.1
    goal_radius: float = 1.0
    goal_reward: float = 100.0
    miss_penalty: float = -100.0
    step_cost: float = -1.0
    init_mean: float = 2.0
    init_std: float = 2.0
    obstacle_interval: tuple[float, float] | None = None
    obstacle_hit_probability: float = 0.0
    obstacle_penalty: float = -100.0
    is_obstacle_hit_terminal: bool = False
    variant: str = "continuous"
    action_set: tuple[float, ...] = field(default=DEFAULT_ACTIONS)
    discount: float = 0.95

    def __post_init__(self) -> None:
        if self.sigma_slope < 0 or self.sigma_min <= 0:
            raise ContractViolationError("need sigma_slope >= 0 and sigma_min > 0")
        if not 0.0 <= self.obstacle_hit_probability <= 1.0:
            raise ContractViolationError("obstacle_hit_probability must lie in [0, 1]")
        if self.variant not in ("continuous", "discrete"):
            raise ContractViolationError("variant must be 'continuous' or 'discrete'")
        if self.obstacle_interval is not None:
            lo, hi = self.obstacle_interval
            if not lo <= hi:
                raise ContractViolationError("obstacle_interval must be [lo, hi] with lo <= hi")
        if 0.0 not in tuple(self.action_set):
            raise ContractViolationError("action_set must contain the declare action 0")
        if not 0.0 < self.discount <= 1.0:
            raise ContractViolationError("discount must lie in (0, 1]")


class LightDark(Environment):
    env_id = "lightdark"

    def __init__(self, config: LightDarkConfig | None = None) -> None:
        self.config = config or LightDarkConfig()
        self._discrete = self.config.variant == "discrete"
        self._actions = tuple(float(a) for a in self.config.action_set)

    @property
    def discount(self) -> float:
        return self.config.discount

    def params(self) -> dict:
        c = self.config
        return {
            "light_position": c.light_position,
            "sigma_slope": c.sigma_slope,
            "sigma_min": c.sigma_min,
            "goal_radius": c.goal_radius,
            "goal_reward": c.goal_reward,
            "miss_penalty": c.miss_penalty,
            "step_cost": c.step_cost,
            "init_mean": c.init_mean,
            "init_std": c.init_std,
            "obstacle_interval": list(c.obstacle_interval) if c.obstacle_interval else None,
            "obstacle_hit_probability": c.obstacle_hit_probability,
            "obstacle_penalty": c.obstacle_penalty,
            "is_obstacle_hit_terminal": c.is_obstacle_hit_terminal,
            "variant": c.variant,
            "action_set": list(self._actions),
            "discount": c.discount,
        }

    def space_info(self) -> SpaceInfo:
        if self._discrete:
            return SpaceInfo(Kind.DISCRETE, Kind.DISCRETE, Kind.DISCRETE, action_count=len(self._actions))
        return SpaceInfo(
            Kind.CONTINUOUS, Kind.DISCRETE, Kind.CONTINUOUS,
            action_count=len(self._actions), state_dim=1,
        )

    def actions(self):
        return self._actions

    def sigma(self, x: float) -> float:
        c = self.config
        return c.sigma_slope * abs(x - c.light_position) + c.sigma_min

    def sample_initial_state(self, rng: Rng):
        x = self.config.init_mean + self.config.init_std * rng.standard_normal()
        if self._discrete:
            x = float(np.round(x))
        return (x, LIVE)

    def sample_initial_states(self, n: int, rng: Rng) -> np.ndarray:
        x = self.config.init_mean + self.config.init_std * rng.standard_normal(n)
        if self._discrete:
            x = np.round(x)
        out = np.zeros((n, 2))
        out[:, 0] = x
        return out

    def is_terminal(self, state) -> bool:
        return state[1] != LIVE

    def _emit_obs(self, x: float, rng: Rng) -> float:
        o = x + self.sigma(x) * rng.standard_normal()
        return float(np.round(o)) if self._discrete else float(o)

    def step(self, state, action, rng: Rng) -> StepResult:
        c = self.config
        a = float(action)
        if a not in self._actions:
            raise ContractViolationError(f"action {action!r} not in action set {self._actions}")
        x, flag = float(state[0]), float(state[1])
        if flag == DECLARED:
            return (x, DECLARED), TERMINAL_OBS, 0.0, True, False
        if flag == CRASHED:
            return (x, CRASHED), self._emit_obs(x, rng), 0.0, True, False
        if a == 0.0:
            reward = c.goal_reward if abs(x) <= c.goal_radius else c.miss_penalty
            return (x, DECLARED), TERMINAL_OBS, reward, True, False
        x2 = x + a
        if self._discrete:
            x2 = float(np.round(x2))
        reward = c.step_cost
        safety = False
        flag2 = LIVE
        if c.obstacle_interval is not None and c.obstacle_interval[0] <= x2 <= c.obstacle_interval[1]:
            if rng.random() < c.obstacle_hit_probability:
                reward += c.obstacle_penalty
                safety = True
                if c.is_obstacle_hit_terminal:
                    flag2 = CRASHED
        obs = self._emit_obs(x2, rng)
        return (x2, flag2), obs, reward, flag2 != LIVE, safety

    def observation_loglik(self, obs, next_state, action) -> float:
        x, flag = float(next_state[0]), float(next_state[1])
        if flag == DECLARED:
            return 0.0 if obs is TERMINAL_OBS else -math.inf
        if obs is TERMINAL_OBS:
            return -math.inf
        s = self.sigma(x)
        o = float(obs)
        if self._discrete:
            hi = ndtr((o + 0.5 - x) / s)
            lo = ndtr((o - 0.5 - x) / s)
            mass = hi - lo
            return math.log(mass) if mass > 0 else -math.inf
        z = (o - x) / s
        return -0.5 * z * z - math.log(s) - _LOG_SQRT_2PI

    def goal_reached(self, state, action, next_state) -> bool:
        return float(action) == 0.0 and abs(float(state[0])) <= self.config.goal_radius

    # batch hooks -----------------------------------------------------------

    def supports_batch(self) -> bool:
        return True

    def step_batch(self, states: np.ndarray, action, rng: Rng):
        c = self.config
        a = float(action)
        if a not in self._actions:
            raise ContractViolationError(f"action {action!r} not in action set {self._actions}")
        n = len(states)
        x, flag = states[:, 0], states[:, 1]
        live = flag == LIVE
        nxt = states.copy()
        rewards = np.zeros(n)
        safety = np.zeros(n, dtype=bool)
        if a == 0.0:
            nxt[live, 1] = DECLARED
            rewards[live] = np.where(np.abs(x[live]) <= c.goal_radius, c.goal_reward, c.miss_penalty)
            terminals = np.ones(n, dtype=bool)
            return nxt, rewards, terminals, safety
        x2 = x + np.where(live, a, 0.0)
        if self._discrete:
            x2 = np.where(live, np.round(x2), x2)
        nxt[:, 0] = x2
        rewards[live] = c.step_cost
        if c.obstacle_interval is not None and c.obstacle_hit_probability > 0:
            lo, hi = c.obstacle_interval
            in_zone = live & (x2 >= lo) & (x2 <= hi)
            if in_zone.any():
                hits = in_zone & (rng.random(n) < c.obstacle_hit_probability)
                rewards[hits] += c.obstacle_penalty
                safety = hits
                if c.is_obstacle_hit_terminal:
                    nxt[hits, 1] = CRASHED
        terminals = nxt[:, 1] != LIVE
        return nxt, rewards, terminals, safety

    def loglik_batch(self, obs, next_states: np.ndarray, action) -> np.ndarray:
        c = self.config
        x, flag = next_states[:, 0], next_states[:, 1]
        declared = flag == DECLARED
        if obs is TERMINAL_OBS:
            return np.where(declared, 0.0, -np.inf)
        s = c.sigma_slope * np.abs(x - c.light_position) + c.sigma_min
        o = float(obs)
        if self._discrete:
            mass = ndtr((o + 0.5 - x) / s) - ndtr((o - 0.5 - x) / s)
            with np.errstate(divide="ignore"):
                ll = np.log(mass)
        else:
            z = (o - x) / s
            ll = -0.5 * z * z - np.log(s) - _LOG_SQRT_2PI
        return np.where(declared, -np.inf, ll)
