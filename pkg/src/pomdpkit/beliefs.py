"""Particle-based belief representations and Bayesian updates.

Beliefs are immutable values: every operation returns a new belief object.
Particles are stored either as a plain list of state objects or, for
environments exposing the batch hooks, as a numpy array, which lets updates
over 1e5 particles run vectorized.  Semantics are identical in both layouts.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .core import Action, Environment, Observation, State
from .errors import ContractViolationError, ParticleDepletionError
from .rng import Rng

DEFAULT_RESAMPLE_THRESHOLD = 0.5

Particles = Any  # list of states, or ndarray of shape (n,) / (n, state_dim)


def _num_particles(particles: Particles) -> int:
    return len(particles)


def _take(particles: Particles, indices: np.ndarray) -> Particles:
    if isinstance(particles, np.ndarray):
        return particles[indices]
    return [particles[i] for i in indices]


class WeightedParticleBelief:
    """States with normalized weights; resamples when ESS drops too low."""

    __slots__ = ("particles", "weights", "resample_threshold")

    def __init__(
        self,
        particles: Particles,
        weights: Sequence[float] | np.ndarray,
        resample_threshold: float = DEFAULT_RESAMPLE_THRESHOLD,
        _validated: bool = False,
    ) -> None:
        n = _num_particles(particles)
        if n < 1:
            raise ContractViolationError("a belief needs at least one particle")
        w = np.asarray(weights, dtype=np.float64)
        if not _validated:
            if len(w) != n:
                raise ContractViolationError("particles and weights must have equal length")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ContractViolationError("weights must be finite and nonnegative")
            total = float(w.sum())
            if total <= 0:
                raise ContractViolationError("weights must not all be zero")
            if abs(total - 1.0) > 1e-9:
                w = w / total
            if not 0.0 <= resample_threshold <= 1.0:
                raise ContractViolationError("resample_threshold must lie in [0, 1]")
        self.particles = particles
        self.weights = w
        self.resample_threshold = resample_threshold

    def __len__(self) -> int:
        return _num_particles(self.particles)

    def effective_sample_size(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))


class UnweightedParticleBelief:
    """Plain particle set; equivalent to uniform weights over the particles."""

    __slots__ = ("particles",)

    def __init__(self, particles: Particles) -> None:
        if _num_particles(particles) < 1:
            raise ContractViolationError("a belief needs at least one particle")
        self.particles = particles

    def __len__(self) -> int:
        return _num_particles(self.particles)

    @property
    def weights(self) -> np.ndarray:
        n = len(self)
        return np.full(n, 1.0 / n)


Belief = WeightedParticleBelief | UnweightedParticleBelief


def create_environment_belief(
    env: Environment,
    n_particles: int,
    rng: Rng,
    resample_threshold: float = DEFAULT_RESAMPLE_THRESHOLD,
) -> WeightedParticleBelief:
    """Initial belief: n i.i.d. draws from the environment's initial distribution."""
    if n_particles < 1:
        raise ContractViolationError("n_particles must be at least 1")
    particles = env.sample_initial_states(n_particles, rng)
    weights = np.full(n_particles, 1.0 / n_particles)
    return WeightedParticleBelief(particles, weights, resample_threshold, _validated=True)


def sample(belief: Belief, rng: Rng) -> State:
    """Draw one particle with probability proportional to its weight."""
    if isinstance(belief, UnweightedParticleBelief):
        i = int(rng.integers(len(belief)))
    else:
        cdf = np.cumsum(belief.weights)
        i = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(belief) - 1)
    p = belief.particles[i]
    return p


def propagate(
    env: Environment, particles: Particles, action: Action, rng: Rng
) -> tuple[Particles, np.ndarray, np.ndarray, np.ndarray]:
    """Transition component of env.step applied to every particle."""
    if env.supports_batch() and isinstance(particles, np.ndarray):
        return env.step_batch(particles, action, rng)
    nxt, rewards, terms, safety = [], [], [], []
    for s in particles:
        s2, _obs, r, t, sf = env.step(s, action, rng)
        nxt.append(s2)
        rewards.append(r)
        terms.append(t)
        safety.append(sf)
    return nxt, np.asarray(rewards, dtype=np.float64), np.asarray(terms, dtype=bool), np.asarray(safety, dtype=bool)


def observation_logliks(env: Environment, obs: Observation, particles: Particles, action: Action) -> np.ndarray:
    if env.supports_batch() and isinstance(particles, np.ndarray):
        return np.asarray(env.loglik_batch(obs, particles, action), dtype=np.float64)
    return np.asarray(
        [env.observation_loglik(obs, s, action) for s in particles], dtype=np.float64
    )


def reweight(weights: np.ndarray, logliks: np.ndarray) -> np.ndarray:
    """Posterior weights from prior weights and per-particle log-likelihoods.

    Computed in log space so far-tail likelihoods do not underflow; raises
    ParticleDepletionError when every particle has zero posterior mass.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(weights) + logliks
    m = np.max(logw)
    if not np.isfinite(m):
        raise ParticleDepletionError("all particle weights collapsed to zero")
    w = np.exp(logw - m)
    return w / w.sum()


def update(
    belief: Belief,
    action: Action,
    obs: Observation,
    env: Environment,
    rng: Rng,
) -> Belief:
    """Bayes update: propagate particles, reweight by observation likelihood.

    Weighted beliefs resample systematically when ESS < threshold * n.
    Unweighted beliefs run the same update followed by an unconditional
    systematic resample (the bootstrap filter), returning an unweighted belief.
    """
    if isinstance(belief, UnweightedParticleBelief):
        inner = WeightedParticleBelief(
            belief.particles, belief.weights, resample_threshold=0.0, _validated=True
        )
        nxt, w = _update_weighted(inner, action, obs, env, rng)
        tmp = WeightedParticleBelief(nxt, w, 0.0, _validated=True)
        return UnweightedParticleBelief(systematic_resample(tmp, rng).particles)

    nxt, w = _update_weighted(belief, action, obs, env, rng)
    out = WeightedParticleBelief(nxt, w, belief.resample_threshold, _validated=True)
    if out.effective_sample_size() < belief.resample_threshold * len(out):
        out = systematic_resample(out, rng)
    return out


def _update_weighted(
    belief: WeightedParticleBelief, action: Action, obs: Observation, env: Environment, rng: Rng
) -> tuple[Particles, np.ndarray]:
    nxt, _rewards, _terms, _safety = propagate(env, belief.particles, action, rng)
    w = reweight(belief.weights, observation_logliks(env, obs, nxt, action))
    return nxt, w


def systematic_resample_indices(weights: np.ndarray, rng: Rng) -> np.ndarray:
    """Index vector of a systematic resample: one uniform offset, stratified positions."""
    n = len(weights)
    positions = (np.arange(n) + rng.random()) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0  # guard against cumulative rounding
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def systematic_resample(belief: WeightedParticleBelief, rng: Rng) -> WeightedParticleBelief:
    """Resample to uniform weights; particle i is copied ~ n*weights[i] times."""
    idx = systematic_resample_indices(belief.weights, rng)
    n = len(belief)
    return WeightedParticleBelief(
        _take(belief.particles, idx),
        np.full(n, 1.0 / n),
        belief.resample_threshold,
        _validated=True,
    )
