"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's counter-based Philox4x64 bit generator. Philox output is a pure
function of (key, counter), so a given seed reproduces the same stream on any
platform. Independent sub-streams are keyed by a tuple of integers, e.g.
``make_rng(master_seed, pair_id, STREAM_NOISE)``, which is expanded through
numpy's ``SeedSequence``.
"""

from __future__ import annotations

import numpy as np

# stream tags; appended to the seed tuple so sub-streams never collide
STREAM_IC = 1
STREAM_NOISE = 2
STREAM_RESERVOIR = 3
STREAM_POWER_ITERATION = 4
STREAM_PERTURBATION = 5
STREAM_REFERENCE = 6


def make_rng(*key: int) -> np.random.Generator:
    """Return a Philox-backed generator for the integer key ``key``."""
    if not key:
        raise ValueError("make_rng needs at least one integer")
    entropy = [int(k) for k in key]
    if any(k < 0 for k in entropy):
        raise ValueError(f"seed components must be nonnegative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
