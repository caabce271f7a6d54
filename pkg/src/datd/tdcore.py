"""Core truth-discovery mathematics.

Two engines over the same primitives:

* ``run_baseline_round`` -- classic iterative TD: aggregate reports weighted by
  historical credibility, then update each source's credibility from this
  round's deviations with the task value held at 1.
* ``run_datd_round`` -- value-aware TD: an estimate pass predicts each source's
  next-round credibility from a provisional truth, the aggregation weight
  blends history with that prediction (``gamma``), and the committed update
  scales the honesty signal by the task's transaction value.

All functions are pure: the ledger passed in is never mutated; round functions
return an updated copy. Per-source reductions iterate in ascending source-id
order so identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import (
    DegenerateWeightsError,
    EmptyRoundError,
    LogDomainError,
    NoTasksError,
)

# clamp bounds inside (0, 1); the logistic function saturates to exactly
# 0.0/1.0 in float64 well before its math does, and ledger credibilities must
# stay strictly interior. The lower bound is kept at the normal-float scale
# rather than the subnormal edge so that products like gamma * credibility
# cannot underflow to an exact zero weight downstream.
_INTERIOR_LO = 1e-308
_INTERIOR_HI = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class Observation:
    """One source's reported value for one task."""

    source: str
    value: float
    present: bool = True


@dataclass
class LedgerEntry:
    """Running credibility state for one entity.

    ``cpec`` is the lifetime sum of committed per-round value-weighted
    contributions; ``participation_count``/``tasks_seen`` feed the
    participation rate.
    """

    credibility: float = 0.5
    cpec: float = 0.0
    participation_count: int = 0
    tasks_seen: int = 0


class CredibilityLedger:
    """Per-entity credibility records, keyed by entity id."""

    def __init__(self) -> None:
        self._entries: dict[str, LedgerEntry] = {}

    def seed(
        self,
        entity: str,
        *,
        credibility: float = 0.5,
        cpec: float = 0.0,
        participation_count: int = 0,
        tasks_seen: int = 0,
    ) -> LedgerEntry:
        """Insert (or replace) an entry with explicit prior state."""
        if not 0.0 < credibility < 1.0:
            raise ValueError("credibility must lie strictly in (0, 1)")
        if participation_count < 0 or tasks_seen < 0:
            raise ValueError("counters must be non-negative")
        if participation_count > tasks_seen:
            raise ValueError("participation_count cannot exceed tasks_seen")
        entry = LedgerEntry(credibility, cpec, participation_count, tasks_seen)
        self._entries[entity] = entry
        return entry

    def ensure(self, entity: str) -> LedgerEntry:
        """Return the entry for ``entity``, creating a fresh one if absent."""
        entry = self._entries.get(entity)
        if entry is None:
            entry = LedgerEntry()
            self._entries[entity] = entry
        return entry

    def entry(self, entity: str) -> LedgerEntry:
        return self._entries[entity]

    def entry_or_default(self, entity: str) -> LedgerEntry:
        """Entry for ``entity``, or a detached fresh-entity default."""
        entry = self._entries.get(entity)
        return entry if entry is not None else LedgerEntry()

    def entities(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> list[tuple[str, LedgerEntry]]:
        return [(entity, self._entries[entity]) for entity in self.entities()]

    def copy(self) -> "CredibilityLedger":
        clone = CredibilityLedger()
        for entity, entry in self._entries.items():
            clone._entries[entity] = replace(entry)
        return clone

    def __contains__(self, entity: str) -> bool:
        return entity in self._entries

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class TDConfig:
    """Knobs for one TD round."""

    gamma: float = 0.5
    deviation_floor: float = 1e-12
    max_iterations: int = 50
    truth_tolerance: float = 1e-9
    single_pass: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.deviation_floor <= 0.0:
            raise ValueError("deviation_floor must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.truth_tolerance <= 0.0:
            raise ValueError("truth_tolerance must be positive")


@dataclass
class RoundBreakdown:
    """Per-source intermediates of one committed round.

    ``estimated_next_credibility`` and ``aggregation_weight`` come from the
    estimate pass that fixed the final weights; the deviation chain
    (``raw_deviation`` .. ``pec``) is re-evaluated at the final truth, which is
    what the committed ledger update used. The baseline engine has no separate
    estimate pass, so there it carries the committed credibilities.
    """

    raw_deviation: dict[str, float] = field(default_factory=dict)
    normalized_deviation: dict[str, float] = field(default_factory=dict)
    log_distance: dict[str, float] = field(default_factory=dict)
    pec: dict[str, float] = field(default_factory=dict)
    estimated_next_credibility: dict[str, float] = field(default_factory=dict)
    aggregation_weight: dict[str, float] = field(default_factory=dict)
    rms_deviation: float = 0.0


@dataclass
class TruthEstimate:
    value: float
    iterations_used: int
    breakdown: RoundBreakdown


def _sigmoid(z: float) -> float:
    # evaluated exp-of-negative only; clamped to the open interval
    if z >= 0.0:
        out = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        out = e / (1.0 + e)
    if out <= 0.0:
        return _INTERIOR_LO
    if out >= 1.0:
        return _INTERIOR_HI
    return out


def _present_values(observations: Iterable[Observation]) -> dict[str, float]:
    """Present observations as an id-ascending value map."""
    values: dict[str, float] = {}
    for obs in sorted(observations, key=lambda o: o.source):
        if not obs.present:
            continue
        if not math.isfinite(obs.value):
            raise ValueError(f"non-finite value from source {obs.source!r}")
        values[obs.source] = obs.value
    return values


def aggregate(
    observations: Iterable[Observation], weights: Mapping[str, float]
) -> float:
    """Weighted mean of present values, weight-sum denominator.

    The result is clamped into the envelope of present values so the convex
    combination contract survives float rounding.
    """
    values = _present_values(observations)
    if not values:
        raise EmptyRoundError("no present observations to aggregate")
    numerator = 0.0
    denominator = 0.0
    for source, value in values.items():
        w = weights[source]
        if not w > 0.0:
            raise DegenerateWeightsError(
                f"weight for source {source!r} must be positive"
            )
        numerator += w * value
        denominator += w
    if denominator <= 0.0:
        raise DegenerateWeightsError("weight sum is zero")
    return min(max(numerator / denominator, min(values.values())), max(values.values()))


def raw_deviations(
    observations: Iterable[Observation], truth: float
) -> dict[str, float]:
    """Absolute distance of each present value from ``truth``."""
    if not math.isfinite(truth):
        raise ValueError("truth must be finite")
    return {s: abs(v - truth) for s, v in _present_values(observations).items()}


def normalize_deviations(
    raw: Mapping[str, float], floor: float
) -> dict[str, float]:
    """Deviations as shares of their sum, floored below by ``floor``.

    If every deviation is at or below the floor the round carries no ranking
    signal and the shares collapse to uniform 1/n.
    """
    if floor <= 0.0:
        raise ValueError("floor must be positive")
    if not raw:
        raise EmptyRoundError("no deviations to normalize")
    ordered = {s: raw[s] for s in sorted(raw)}
    for s, v in ordered.items():
        if v < 0.0:
            raise ValueError(f"negative deviation for source {s!r}")
    n = len(ordered)
    if all(v <= floor for v in ordered.values()):
        return {s: 1.0 / n for s in ordered}
    clamped = {s: max(v, floor) for s, v in ordered.items()}
    total = sum(clamped.values())
    return {s: v / total for s, v in clamped.items()}


def rms_deviation(normalized: Mapping[str, float]) -> float:
    """Root mean square of the normalized deviations."""
    if not normalized:
        raise EmptyRoundError("no deviations")
    total = 0.0
    for s in sorted(normalized):
        v = normalized[s]
        total += v * v
    return math.sqrt(total / len(normalized))


def log_distance(normalized_s: float, rms: float) -> float:
    """log2(rms) - log2(normalized_s); positive iff the source beat the RMS."""
    if normalized_s <= 0.0 or rms <= 0.0:
        raise LogDomainError("log distance needs positive inputs")
    return math.log2(rms) - math.log2(normalized_s)


def pec(log_dist: float, task_value: float) -> float:
    """Per-round potential economic contribution: distance scaled by value."""
    return log_dist * task_value


def participation_rate(participation_count: int, tasks_seen: int) -> float:
    """Fraction of seen tasks the entity contributed to, in [0, 1]."""
    if tasks_seen == 0:
        raise NoTasksError("entity has seen no tasks")
    if participation_count < 0 or participation_count > tasks_seen:
        raise ValueError("participation_count must lie in [0, tasks_seen]")
    return participation_count / tasks_seen


def update_credibility(
    participation: float, cpec: float, task_value: float
) -> float:
    """Logistic map of the participation-weighted, value-scaled contribution.

    Exactly 0.5 at cpec = 0. Saturated results are clamped to the nearest
    float64 values strictly inside (0, 1).
    """
    if task_value <= 0.0:
        raise ValueError("task_value must be positive")
    return _sigmoid(participation * cpec / task_value)


@dataclass
class _PassResult:
    raw: dict[str, float]
    normalized: dict[str, float]
    rms: float
    log_dist: dict[str, float]
    pec: dict[str, float]
    rho: dict[str, float]
    next_credibility: dict[str, float]


def _credibility_pass(
    values: Mapping[str, float],
    entries: Mapping[str, LedgerEntry],
    truth: float,
    task_value: float,
    floor: float,
) -> _PassResult:
    """Deviation chain at ``truth`` plus the per-source credibility it implies.

    Participation counters are taken as including the current task. Does not
    mutate anything.
    """
    raw = {s: abs(v - truth) for s, v in values.items()}
    normalized = normalize_deviations(raw, floor)
    rms = rms_deviation(normalized)
    probe = next(iter(normalized.values()))
    if all(v == probe for v in normalized.values()):
        # equal evidence carries no ranking signal
        log_dist = {s: 0.0 for s in normalized}
    else:
        log_dist = {s: log_distance(normalized[s], rms) for s in normalized}
    contribution = {s: pec(log_dist[s], task_value) for s in normalized}
    rho: dict[str, float] = {}
    next_credibility: dict[str, float] = {}
    for s in values:
        entry = entries[s]
        rho[s] = (entry.participation_count + 1) / (entry.tasks_seen + 1)
        next_credibility[s] = update_credibility(
            rho[s], entry.cpec + contribution[s], task_value
        )
    return _PassResult(raw, normalized, rms, log_dist, contribution, rho, next_credibility)


def estimate_next_credibility(
    observations: Iterable[Observation],
    ledger: CredibilityLedger,
    task_value: float,
    *,
    floor: float = 1e-12,
) -> dict[str, float]:
    """Predict each present source's post-round credibility.

    Aggregates with the ledger credibilities as weights, then evaluates the
    deviation chain against that provisional truth. The ledger is not mutated;
    unknown sources are treated as fresh entities.
    """
    if task_value <= 0.0:
        raise ValueError("task_value must be positive")
    values = _present_values(observations)
    if not values:
        raise EmptyRoundError("no present observations")
    entries = {s: ledger.entry_or_default(s) for s in values}
    credibilities = {s: entries[s].credibility for s in values}
    provisional = aggregate(observations, credibilities)
    return _credibility_pass(
        values, entries, provisional, task_value, floor
    ).next_credibility


def aggregation_weights(
    ledger: CredibilityLedger,
    next_credibility: Mapping[str, float],
    gamma: float,
) -> dict[str, float]:
    """Blend historical credibility with the predicted next credibility."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return {
        s: gamma * ledger.entry_or_default(s).credibility + (1.0 - gamma) * r_next
        for s, r_next in sorted(next_credibility.items())
    }


def _commit(
    ledger: CredibilityLedger,
    observations: Iterable[Observation],
    final: _PassResult,
) -> None:
    """Apply one round's committed update to ``ledger`` in place."""
    for obs in sorted(observations, key=lambda o: o.source):
        entry = ledger.ensure(obs.source)
        if obs.present and obs.source in final.pec:
            entry.cpec += final.pec[obs.source]
            entry.participation_count += 1
            entry.tasks_seen += 1
            entry.credibility = final.next_credibility[obs.source]
        else:
            entry.tasks_seen += 1


def run_datd_round(
    observations: Iterable[Observation],
    ledger: CredibilityLedger,
    task_value: float,
    config: TDConfig,
) -> tuple[TruthEstimate, CredibilityLedger]:
    """One value-aware TD round: estimate pass, blended weights, commit.

    Returns the truth estimate and an updated ledger copy; the input ledger is
    untouched, so a raising round has no side effects. With ``single_pass``
    off, the estimate/aggregate pair iterates against the latest truth until
    the relative truth change drops below ``truth_tolerance`` or
    ``max_iterations`` is hit. Exactly one ledger commit happens either way,
    re-evaluating the deviation chain at the final truth.
    """
    observations = list(observations)
    if task_value <= 0.0:
        raise ValueError("task_value must be positive")
    values = _present_values(observations)
    if not values:
        raise EmptyRoundError("no present observations")

    work = ledger.copy()
    for obs in observations:
        work.ensure(obs.source)
    entries = {s: work.entry(s) for s in values}
    credibilities = {s: entries[s].credibility for s in values}

    previous_truth = aggregate(observations, credibilities)
    iterations = 0
    while True:
        estimate_pass = _credibility_pass(
            values, entries, previous_truth, task_value, config.deviation_floor
        )
        weights = {
            s: config.gamma * credibilities[s]
            + (1.0 - config.gamma) * estimate_pass.next_credibility[s]
            for s in values
        }
        truth = aggregate(observations, weights)
        iterations += 1
        if config.single_pass:
            break
        if abs(truth - previous_truth) <= config.truth_tolerance * max(1.0, abs(truth)):
            break
        if iterations >= config.max_iterations:
            break
        previous_truth = truth

    final = _credibility_pass(
        values, entries, truth, task_value, config.deviation_floor
    )
    _commit(work, observations, final)

    breakdown = RoundBreakdown(
        raw_deviation=final.raw,
        normalized_deviation=final.normalized,
        log_distance=final.log_dist,
        pec=final.pec,
        estimated_next_credibility=estimate_pass.next_credibility,
        aggregation_weight=weights,
        rms_deviation=final.rms,
    )
    return TruthEstimate(truth, iterations, breakdown), work


def run_baseline_round(
    observations: Iterable[Observation],
    ledger: CredibilityLedger,
    config: TDConfig,
) -> tuple[TruthEstimate, CredibilityLedger]:
    """One classic TD round: history-only weights, value held at 1.

    No estimate pass and no future term; the committed update runs the same
    deviation/sigmoid machinery with the task value fixed to 1.
    """
    observations = list(observations)
    values = _present_values(observations)
    if not values:
        raise EmptyRoundError("no present observations")

    work = ledger.copy()
    for obs in observations:
        work.ensure(obs.source)
    entries = {s: work.entry(s) for s in values}
    weights = {s: entries[s].credibility for s in values}

    truth = aggregate(observations, weights)
    final = _credibility_pass(values, entries, truth, 1.0, config.deviation_floor)
    _commit(work, observations, final)

    breakdown = RoundBreakdown(
        raw_deviation=final.raw,
        normalized_deviation=final.normalized,
        log_distance=final.log_dist,
        pec=final.pec,
        estimated_next_credibility=final.next_credibility,
        aggregation_weight=weights,
        rms_deviation=final.rms,
    )
    return TruthEstimate(truth, 1, breakdown), work
