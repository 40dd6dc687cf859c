"""Reproducible random streams: one counter-based generator per (seed, stream index)."""

from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for the stream identified by ``(seed, *keys)``.

    Streams with different keys are statistically independent, and a stream
    does not depend on how many other streams were drawn before it.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))
