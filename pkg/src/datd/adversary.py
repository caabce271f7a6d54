"""Behavior models for data sources and oracle nodes.

The interesting profile is the high-value attacker: it reports honestly
(truth plus relative Gaussian noise) whenever the task's transaction value is
at or below its threshold, and scales the price by a uniform tamper factor on
tasks above it. Nodes relay their first-stage estimate unmodified when honest;
the same tamper law applies to the estimate when they defect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HONEST = "honest"
HIGH_VALUE_ATTACKER = "high-value-attacker"

_KINDS = (HONEST, HIGH_VALUE_ATTACKER)
_DIRECTIONS = ("down", "symmetric")


@dataclass(frozen=True)
class BehaviorProfile:
    kind: str = HONEST
    tamper_range: float = 0.0
    high_value_threshold: float = 100.0
    noise_fraction: float = 0.01
    direction: str = "down"

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown behavior kind {self.kind!r}")
        if self.tamper_range < 0.0:
            raise ValueError("tamper_range must be non-negative")
        if self.noise_fraction < 0.0:
            raise ValueError("noise_fraction must be non-negative")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"unknown tamper direction {self.direction!r}")


def honest(noise_fraction: float = 0.01) -> BehaviorProfile:
    return BehaviorProfile(kind=HONEST, noise_fraction=noise_fraction)


def attacker(
    tamper_range: float,
    *,
    high_value_threshold: float = 100.0,
    noise_fraction: float = 0.01,
    direction: str = "down",
) -> BehaviorProfile:
    return BehaviorProfile(
        kind=HIGH_VALUE_ATTACKER,
        tamper_range=tamper_range,
        high_value_threshold=high_value_threshold,
        noise_fraction=noise_fraction,
        direction=direction,
    )


def _tamper_factor(profile: BehaviorProfile, rng: np.random.Generator) -> float:
    u = float(rng.uniform(0.0, profile.tamper_range))
    if profile.direction == "symmetric" and rng.random() < 0.5:
        return 1.0 + u
    return 1.0 - u


def report(
    profile: BehaviorProfile,
    truth: float,
    task_value: float,
    rng: np.random.Generator,
) -> float:
    """A data source's reported price for a task with ground truth ``truth``."""
    if truth <= 0.0:
        raise ValueError("truth must be positive")
    if profile.kind == HONEST or task_value <= profile.high_value_threshold:
        return truth * (1.0 + float(rng.normal(0.0, profile.noise_fraction)))
    return truth * _tamper_factor(profile, rng)


def node_report(
    profile: BehaviorProfile,
    first_td_estimate: float,
    task_value: float,
    rng: np.random.Generator,
) -> float:
    """What a node submits for its first-stage estimate.

    Honest nodes relay the estimate exactly (reporting noise belongs to
    sources); a defecting node scales it by the tamper factor.
    """
    if profile.kind == HONEST or task_value <= profile.high_value_threshold:
        return first_td_estimate
    return first_td_estimate * _tamper_factor(profile, rng)
