"""Worked-example verification of the value-aware TD round.

One five-source round with pinned priors exercises every intermediate of the
engine: provisional truth, estimated next credibilities, blended weight,
final truth, per-source log distances at the final truth, and the committed
credibilities. ``checks`` recomputes the round through the public tdcore
operations and compares each intermediate against its expected value at a
fixed tolerance; the CLI renders the result as a table and the service
returns it as JSON.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tdcore import (
    CredibilityLedger,
    Observation,
    TDConfig,
    aggregate,
    aggregation_weights,
    estimate_next_credibility,
    run_datd_round,
)

TOLERANCE = 1e-3

GAMMA = 0.5
TASK_VALUE = 8.0
PRIOR_CREDIBILITY = (0.8, 0.8, 0.8, 0.95, 0.95)
PRIOR_CPEC = 2.5
REPORTS = (1.0, 1.0, 1.0, 0.5, 0.4)

EXPECTED_PROVISIONAL_TRUTH = 0.757
EXPECTED_NEXT_CREDIBILITY = (0.617, 0.617, 0.617, 0.598, 0.480)
EXPECTED_WEIGHT_S5 = 0.715
EXPECTED_FINAL_TRUTH = 0.774
EXPECTED_LOG_DISTANCE = (0.265, 0.265, 0.265, -0.015, -0.464)
EXPECTED_COMMITTED_CREDIBILITY = (0.641, 0.641, 0.641, 0.574, 0.462)

_SOURCES = ("s1", "s2", "s3", "s4", "s5")


@dataclass(frozen=True)
class GoldenCheck:
    """One recomputed intermediate beside its expected value."""

    name: str
    expected: float
    actual: float
    tolerance: float
    passed: bool


def _check(name: str, expected: float, actual: float) -> GoldenCheck:
    return GoldenCheck(
        name=name,
        expected=expected,
        actual=actual,
        tolerance=TOLERANCE,
        passed=abs(actual - expected) <= TOLERANCE,
    )


def _prior_ledger() -> CredibilityLedger:
    ledger = CredibilityLedger()
    for source, credibility in zip(_SOURCES, PRIOR_CREDIBILITY):
        # equal counters make the participation rate exactly 1
        ledger.seed(
            source,
            credibility=credibility,
            cpec=PRIOR_CPEC,
            participation_count=3,
            tasks_seen=3,
        )
    return ledger


def checks() -> list[GoldenCheck]:
    """Recompute the worked example and compare every pinned intermediate."""
    observations = [
        Observation(source, value) for source, value in zip(_SOURCES, REPORTS)
    ]
    ledger = _prior_ledger()

    provisional = aggregate(
        observations, {s: ledger.entry(s).credibility for s in _SOURCES}
    )
    next_credibility = estimate_next_credibility(observations, ledger, TASK_VALUE)
    weights = aggregation_weights(ledger, next_credibility, GAMMA)
    estimate, committed = run_datd_round(
        observations, ledger, TASK_VALUE, TDConfig(gamma=GAMMA)
    )

    out = [_check("provisional_truth", EXPECTED_PROVISIONAL_TRUTH, provisional)]
    for source, expected in zip(_SOURCES, EXPECTED_NEXT_CREDIBILITY):
        out.append(
            _check(f"next_credibility_{source}", expected, next_credibility[source])
        )
    out.append(_check("aggregation_weight_s5", EXPECTED_WEIGHT_S5, weights["s5"]))
    out.append(_check("final_truth", EXPECTED_FINAL_TRUTH, estimate.value))
    for source, expected in zip(_SOURCES, EXPECTED_LOG_DISTANCE):
        out.append(
            _check(
                f"log_distance_{source}",
                expected,
                estimate.breakdown.log_distance[source],
            )
        )
    for source, expected in zip(_SOURCES, EXPECTED_COMMITTED_CREDIBILITY):
        out.append(
            _check(
                f"committed_credibility_{source}",
                expected,
                committed.entry(source).credibility,
            )
        )
    return out


def all_passed(results: list[GoldenCheck]) -> bool:
    return all(check.passed for check in results)
