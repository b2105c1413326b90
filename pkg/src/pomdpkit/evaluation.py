"""Episode execution and risk-aware aggregate statistics.

VaR/CVaR use the lower-tail convention over discounted returns: risk means a
low return.  VaR at level alpha is the ceil(alpha*n)-th smallest return and
CVaR the mean of those smallest returns, so CVaR(1.0) is the plain mean.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Mapping, Sequence

import numpy as np

from . import beliefs
from .core import PolicyRunData, SimulationSpec, check_compatibility, spec_hash
from .environments.metrics import safety_metrics
from .errors import IncompatibilityError, ParticleDepletionError
from .rng import episode_rng


def _scalar_repr(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, np.floating):
        return repr(float(value))
    if isinstance(value, np.integer):
        return repr(int(value))
    return str(value)


@dataclass
class StepRecord:
    action: str
    observation: str
    reward: float
    safety_event: bool
    rundata: PolicyRunData

    def to_dict(self) -> dict[str, Any]:
        return {
            "action": self.action,
            "observation": self.observation,
            "reward": self.reward,
            "safety_event": self.safety_event,
            "rundata": self.rundata.to_dict(),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "StepRecord":
        return StepRecord(
            action=d["action"],
            observation=d["observation"],
            reward=float(d["reward"]),
            safety_event=bool(d["safety_event"]),
            rundata=PolicyRunData.from_dict(d["rundata"]),
        )


@dataclass
class EpisodeRecord:
    """Outcome of one simulated episode; serializes to a flat JSON mapping."""

    spec_hash: str
    discounted_return: float
    undiscounted_return: float
    steps_taken: int
    goal_reached: bool
    safety_event_count: int
    belief_resets: int
    per_step: list[StepRecord] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec_hash": self.spec_hash,
            "discounted_return": self.discounted_return,
            "undiscounted_return": self.undiscounted_return,
            "steps_taken": self.steps_taken,
            "goal_reached": self.goal_reached,
            "safety_event_count": self.safety_event_count,
            "belief_resets": self.belief_resets,
            "per_step": [s.to_dict() for s in self.per_step],
            "wall_time": self.wall_time,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "EpisodeRecord":
        return EpisodeRecord(
            spec_hash=d["spec_hash"],
            discounted_return=float(d["discounted_return"]),
            undiscounted_return=float(d["undiscounted_return"]),
            steps_taken=int(d["steps_taken"]),
            goal_reached=bool(d["goal_reached"]),
            safety_event_count=int(d["safety_event_count"]),
            belief_resets=int(d["belief_resets"]),
            per_step=[StepRecord.from_dict(s) for s in d["per_step"]],
            wall_time=float(d["wall_time"]),
        )


def run_episode(spec: SimulationSpec, registry) -> EpisodeRecord:
    """Execute one episode exactly as described by the spec.

    The rng stream is derived from (seed, episode_index) alone, so identical
    specs replay identically on any backend.  A particle-depleted belief is
    rejuvenated from the environment's initial distribution and counted in
    ``belief_resets`` rather than killing the episode.
    """
    t0 = time.perf_counter()
    env = registry.build_environment(spec.environment_id, spec.environment_params)
    policy = registry.build_policy(spec.policy_id, env, spec.policy_params)
    report = check_compatibility(env.space_info(), policy.requirements())
    if not report.ok:
        raise IncompatibilityError(report)

    rng = episode_rng(spec.seed, spec.episode_index)
    state = env.sample_initial_state(rng)
    belief = registry.build_belief(spec.belief_id, env, spec.belief_params, rng)

    gamma = env.discount
    disc = 1.0
    discounted = 0.0
    undiscounted = 0.0
    resets = 0
    safety_count = 0
    goal = False
    steps: list[StepRecord] = []

    for _t in range(spec.num_steps):
        action, rundata = policy.action(belief, rng)
        nxt, obs, reward, terminal, safety = env.step(state, action, rng)
        discounted += disc * reward
        undiscounted += reward
        disc *= gamma
        if safety:
            safety_count += 1
        steps.append(
            StepRecord(
                action=_scalar_repr(action),
                observation=_scalar_repr(obs),
                reward=float(reward),
                safety_event=bool(safety),
                rundata=rundata,
            )
        )
        if terminal:
            goal = bool(env.goal_reached(state, action, nxt))
            state = nxt
            break
        state = nxt
        try:
            belief = beliefs.update(belief, action, obs, env, rng)
        except ParticleDepletionError:
            belief = registry.build_belief(spec.belief_id, env, spec.belief_params, rng)
            resets += 1

    return EpisodeRecord(
        spec_hash=spec_hash(spec),
        discounted_return=discounted,
        undiscounted_return=undiscounted,
        steps_taken=len(steps),
        goal_reached=goal,
        safety_event_count=safety_count,
        belief_resets=resets,
        per_step=steps,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Risk statistics
# ---------------------------------------------------------------------------

def _tail_count(alpha: float, n: int) -> int:
    # small slack so alpha*n lands on its intended integer despite fp error
    m = math.ceil(alpha * n - 1e-9)
    return min(max(m, 1), n)


def var(returns: Sequence[float], alpha: float) -> float:
    """Lower-tail empirical value-at-risk: the ceil(alpha*n)-th smallest return."""
    if len(returns) == 0:
        raise ValueError("var of an empty sample")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    ordered = np.sort(np.asarray(returns, dtype=np.float64))
    return float(ordered[_tail_count(alpha, len(ordered)) - 1])


def cvar(returns: Sequence[float], alpha: float) -> float:
    """Mean of the ceil(alpha*n) smallest returns; equals the mean at alpha=1."""
    n = len(returns)
    if n == 0:
        raise ValueError("cvar of an empty sample")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    m = _tail_count(alpha, n)
    arr = np.asarray(returns, dtype=np.float64)
    if m >= n:
        return float(np.mean(arr))
    return float(np.mean(np.sort(arr)[:m]))


@dataclass(frozen=True)
class AggregateStats:
    n_episodes: int
    mean_return: float
    std_return: float
    ci_low: float
    ci_high: float
    var_alpha: float
    cvar_alpha: float
    alpha: float
    goal_rate: float
    violation_rate: float
    total_violations: int
    degenerate_ci: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_episodes": self.n_episodes,
            "mean_return": self.mean_return,
            "std_return": self.std_return,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "var_alpha": self.var_alpha,
            "cvar_alpha": self.cvar_alpha,
            "alpha": self.alpha,
            "goal_rate": self.goal_rate,
            "violation_rate": self.violation_rate,
            "total_violations": self.total_violations,
            "degenerate_ci": self.degenerate_ci,
        }


def aggregate(records: Sequence[EpisodeRecord], alpha: float) -> AggregateStats:
    """Cohort statistics over discounted returns.

    One ``alpha`` drives both the VaR/CVaR level and the (1-alpha) two-sided
    normal-approximation confidence interval, mirroring the evaluation API's
    single risk parameter.
    """
    if not records:
        raise ValueError("aggregate needs at least one episode record")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    returns = np.asarray([r.discounted_return for r in records], dtype=np.float64)
    n = len(returns)
    mean = float(np.mean(returns))
    degenerate = n == 1
    std = 0.0 if degenerate else float(np.std(returns, ddof=1))
    z = NormalDist().inv_cdf(1.0 - alpha / 2.0)
    half = z * std / math.sqrt(n) if n > 1 else 0.0
    violation_rate, total_violations = safety_metrics(records)
    return AggregateStats(
        n_episodes=n,
        mean_return=mean,
        std_return=std,
        ci_low=mean - half,
        ci_high=mean + half,
        var_alpha=var(returns, alpha),
        cvar_alpha=cvar(returns, alpha),
        alpha=alpha,
        goal_rate=float(np.mean([r.goal_reached for r in records])),
        violation_rate=violation_rate,
        total_violations=int(total_violations),
        degenerate_ci=degenerate,
    )
