"""RockSample grid navigation with noisy rock sensing and dangerous cells.

The rover starts at the west edge, middle row.  Moving east off the east edge
exits the map for the exit reward; other edge moves are blocked.  Checking a
rock reads its quality correctly with probability 0.5 + 0.5*2^(-d/d0), so the
sensor is perfect at distance 0 and degrades with distance.  Cells listed in
``dangerous_areas`` penalize (and optionally terminate) the rover on entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from ..core import EnumerableEnvironment, Kind, SpaceInfo, StepResult, TERMINAL_OBS
from ..errors import ContractViolationError
from ..rng import Rng

NORTH, SOUTH, EAST, WEST, SAMPLE = "north", "south", "east", "west", "sample"
OBS_GOOD, OBS_BAD = "good", "bad"

LIVE = 0
EXITED = 1
DESTROYED = 2


class RockSampleState(NamedTuple):
    x: int
    y: int
    rocks: tuple[int, ...]
    done: int = LIVE


@dataclass(frozen=True)
class RockSampleConfig:
    grid_size: int = 5
    rock_positions: tuple[tuple[int, int], ...] = ((1, 1), (2, 3), (4, 4))
    sensor_efficiency_distance: float = 20.0
    sample_good_reward: float = 10.0
    sample_bad_penalty: float = -10.0
    exit_reward: float = 10.0
    dangerous_areas: tuple[tuple[tuple[int, int], float], ...] = ()
    dangerous_is_terminal: bool = False
    discount: float = 0.95

    def __post_init__(self) -> None:
        n = self.grid_size
        if n < 1:
            raise ContractViolationError("grid_size must be positive")
        if self.sensor_efficiency_distance <= 0:
            raise ContractViolationError("sensor_efficiency_distance must be positive")
        for pos in self.rock_positions:
            if not (0 <= pos[0] < n and 0 <= pos[1] < n):
                raise ContractViolationError(f"rock {pos} outside the {n}x{n} grid")
        for cell, _penalty in self.dangerous_areas:
            if not (0 <= cell[0] < n and 0 <= cell[1] < n):
                raise ContractViolationError(f"dangerous cell {cell} outside the grid")
        if not 0.0 < self.discount <= 1.0:
            raise ContractViolationError("discount must lie in (0, 1]")


class RockSample(EnumerableEnvironment):
    env_id = "rocksample"

    def __init__(self, config: RockSampleConfig | None = None) -> None:
        self.config = config or RockSampleConfig()
        self._rocks = [tuple(p) for p in self.config.rock_positions]
        self._rock_index = {pos: i for i, pos in enumerate(self._rocks)}
        self._dangerous = {tuple(cell): float(p) for cell, p in self.config.dangerous_areas}
        self._actions = (NORTH, SOUTH, EAST, WEST, SAMPLE) + tuple(
            f"check_{i + 1}" for i in range(len(self._rocks))
        )
        self._start = (0, self.config.grid_size // 2)

    @property
    def discount(self) -> float:
        return self.config.discount

    def params(self) -> dict:
        c = self.config
        return {
            "grid_size": c.grid_size,
            "rock_positions": [list(p) for p in self._rocks],
            "sensor_efficiency_distance": c.sensor_efficiency_distance,
            "sample_good_reward": c.sample_good_reward,
            "sample_bad_penalty": c.sample_bad_penalty,
            "exit_reward": c.exit_reward,
            "dangerous_areas": [[list(cell), pen] for cell, pen in c.dangerous_areas],
            "dangerous_is_terminal": c.dangerous_is_terminal,
            "discount": c.discount,
        }

    def space_info(self) -> SpaceInfo:
        return SpaceInfo(Kind.DISCRETE, Kind.DISCRETE, Kind.DISCRETE, action_count=len(self._actions))

    def actions(self):
        return self._actions

    def observations(self):
        return (OBS_GOOD, OBS_BAD, TERMINAL_OBS)

    def sample_initial_state(self, rng: Rng) -> RockSampleState:
        rocks = tuple(int(rng.random() < 0.5) for _ in self._rocks)
        return RockSampleState(self._start[0], self._start[1], rocks, LIVE)

    def is_terminal(self, state: RockSampleState) -> bool:
        return state.done != LIVE

    def _check_accuracy(self, state: RockSampleState, rock_i: int) -> float:
        rx, ry = self._rocks[rock_i]
        d = math.hypot(state.x - rx, state.y - ry)
        return 0.5 + 0.5 * 2.0 ** (-d / self.config.sensor_efficiency_distance)

    def step(self, state: RockSampleState, action, rng: Rng) -> StepResult:
        c = self.config
        if state.done != LIVE:
            return state, TERMINAL_OBS, 0.0, True, False
        if action in (NORTH, SOUTH, EAST, WEST):
            return self._move(state, action, rng)
        if action == SAMPLE:
            idx = self._rock_index.get((state.x, state.y))
            if idx is not None and state.rocks[idx]:
                rocks = tuple(0 if i == idx else r for i, r in enumerate(state.rocks))
                return state._replace(rocks=rocks), TERMINAL_OBS, c.sample_good_reward, False, False
            return state, TERMINAL_OBS, c.sample_bad_penalty, False, False
        if isinstance(action, str) and action.startswith("check_"):
            rock_i = self._parse_check(action)
            acc = self._check_accuracy(state, rock_i)
            correct = rng.random() < acc
            good = bool(state.rocks[rock_i]) == correct
            return state, (OBS_GOOD if good else OBS_BAD), 0.0, False, False
        raise ContractViolationError(f"unknown rocksample action {action!r}")

    def _parse_check(self, action: str) -> int:
        try:
            i = int(action.split("_", 1)[1]) - 1
        except (IndexError, ValueError):
            raise ContractViolationError(f"malformed check action {action!r}") from None
        if not 0 <= i < len(self._rocks):
            raise ContractViolationError(f"{action!r} refers to a nonexistent rock")
        return i

    def _move(self, state: RockSampleState, action, rng: Rng) -> StepResult:
        n = self.config.grid_size
        x, y = state.x, state.y
        if action == EAST and x == n - 1:
            return state._replace(done=EXITED), TERMINAL_OBS, self.config.exit_reward, True, False
        dx, dy = {NORTH: (0, 1), SOUTH: (0, -1), EAST: (1, 0), WEST: (-1, 0)}[action]
        nx, ny = min(max(x + dx, 0), n - 1), min(max(y + dy, 0), n - 1)
        reward = 0.0
        safety = False
        done = LIVE
        if (nx, ny) != (x, y) and (nx, ny) in self._dangerous:
            reward += self._dangerous[(nx, ny)]
            safety = True
            if self.config.dangerous_is_terminal:
                done = DESTROYED
        nxt = state._replace(x=nx, y=ny, done=done)
        return nxt, TERMINAL_OBS, reward, done != LIVE, safety

    def observation_loglik(self, obs, next_state: RockSampleState, action) -> float:
        if next_state.done != LIVE:
            return 0.0 if obs is TERMINAL_OBS else -math.inf
        if isinstance(action, str) and action.startswith("check_"):
            rock_i = self._parse_check(action)
            acc = self._check_accuracy(next_state, rock_i)
            if obs == OBS_GOOD:
                p = acc if next_state.rocks[rock_i] else 1.0 - acc
            elif obs == OBS_BAD:
                p = 1.0 - acc if next_state.rocks[rock_i] else acc
            else:
                return -math.inf
            return math.log(p) if p > 0 else -math.inf
        return 0.0 if obs is TERMINAL_OBS else -math.inf

    def goal_reached(self, state, action, next_state: RockSampleState) -> bool:
        return next_state.done == EXITED

    def enumerate_step_outcomes(self, state: RockSampleState, action):
        """Transitions are deterministic; only check observations branch."""
        if state.done == LIVE and isinstance(action, str) and action.startswith("check_"):
            rock_i = self._parse_check(action)
            acc = self._check_accuracy(state, rock_i)
            good_p = acc if state.rocks[rock_i] else 1.0 - acc
            return [
                (good_p, state, OBS_GOOD, 0.0, False, False),
                (1.0 - good_p, state, OBS_BAD, 0.0, False, False),
            ]
        rng = None  # deterministic branches never draw
        nxt, obs, reward, terminal, safety = self.step(state, action, rng)
        return [(1.0, nxt, obs, reward, terminal, safety)]
