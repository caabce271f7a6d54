"""Deterministic random stream derivation.

Every random draw in a scenario comes from its own generator keyed by
``(seed, purpose, entity index, task index)``. Streams are independent, so
evaluation order (and any added instrumentation) cannot perturb draws, and the
same key always replays the same values.
"""

from __future__ import annotations

import numpy as np

# purpose tags; each distinct kind of draw gets its own stream family
TASKS = 0
SOURCE_REPORT = 1
NODE_TAMPER = 2
PRESENCE = 3
PUBLIC_KEY = 4
COORDINATED_TAMPER = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, *key)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng([seed, *key])
