"""Random-number generation contract.

Every stochastic operation in the toolkit draws from a generator passed in by
the caller; nothing reads global random state.  The shipped generator is
numpy's ``Generator`` over the PCG64 bit generator, seeded through
``numpy.random.SeedSequence``.  Episode streams are derived as
``SeedSequence(entropy=(seed, episode_index))`` so that any (seed, episode)
pair maps to the same stream on every backend, serial or parallel.

Generators are single-owner: share a seed, never a generator.  To hand
independent streams to sub-tasks, split with :func:`split` (SeedSequence
spawning) instead of reusing the parent.
"""

from __future__ import annotations

import numpy as np

Rng = np.random.Generator

BIT_GENERATOR = "PCG64"


def make_rng(seed: int) -> Rng:
    """Root generator for a bare integer seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def episode_rng(seed: int, episode_index: int) -> Rng:
    """The canonical per-episode stream for (seed, episode_index)."""
    ss = np.random.SeedSequence(entropy=(int(seed), int(episode_index)))
    return np.random.Generator(np.random.PCG64(ss))


def split(rng: Rng, n: int) -> list[Rng]:
    """Split ``rng`` into ``n`` independent child generators."""
    return list(rng.spawn(n))
