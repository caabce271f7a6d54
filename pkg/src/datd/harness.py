"""Scenario execution: task streams, paired scheme runs, metrics, sweeps.

The same task stream and the same adversary draws feed every scheme: all
randomness is keyed by (seed, purpose, entity, task) and never by scheme, so
a DATD run and a baseline run of one config are attacked identically and
their metrics are directly comparable task by task.
"""

import dataclasses
import math
import statistics
from dataclasses import dataclass, field

from . import rng as streams
from .adversary import attacker, honest, node_report, report
from .config import (
    ScenarioConfig,
    malicious_nodes,
    malicious_sources,
    node_ids,
    source_ids,
)
from .errors import NoSuchNodeError, UndefinedRatioError
from .protocol import OracleProtocol, Task
from .tdcore import Observation, RoundBreakdown, TDConfig

SCHEMES = ("datd", "baseline")
SWEEP_PARAMS = ("beta", "omega", "gamma", "tau")

# Reported prices are treated as quantized to this tick: deviations smaller
# than one tick are indistinguishable from agreement, so they are floored
# before normalization instead of feeding log-scale credibility swings.
PRICE_TICK = 0.05

PER_TASK_COLUMNS = [
    "task_id",
    "task_value",
    "is_high_value",
    "truth",
    "estimate_datd",
    "estimate_baseline",
    "deviation_datd",
    "deviation_baseline",
    "loss_datd",
    "loss_baseline",
    "weight_ratio_datd",
    "weight_ratio_baseline",
]
CREDIBILITY_COLUMNS = [
    "task_id",
    "stage",
    "entity_id",
    "is_malicious",
    "scheme",
    "credibility",
    "cpec",
]
WEIGHT_COLUMNS = ["task_id", "stage", "entity_id", "scheme", "weight"]
SWEEP_COLUMNS = ["param", "value", "scheme", "seeds"] + [
    f"{metric}_{stat}"
    for metric in ("total_deviation", "rmse", "total_loss")
    for stat in ("mean", "q25", "median", "q75")
]


@dataclass(frozen=True)
class ScenarioTask:
    task_id: int
    truth: float
    value: float
    is_high_value: bool


@dataclass
class SchemeRun:
    """One scheme's full pass over a task stream.

    ``first_history`` / ``second_history`` hold per-task ledger snapshots:
    the observer node's private view of the sources, and the contract
    ledger's view of the nodes. Every node queries the sources itself, so
    the observer stands in for the first stage the way a single tracked node
    would in a deployment. ``source_reports`` maps, per task, each node to
    the reports it received.
    """

    scheme: str
    observer: str
    protocol: OracleProtocol
    records: list = field(default_factory=list)
    source_reports: list = field(default_factory=list)
    first_history: list = field(default_factory=list)
    second_history: list = field(default_factory=list)


@dataclass
class TaskMetrics:
    """Per-task outcome, per scheme; a failed round leaves None entries."""

    task_id: int
    task_value: float
    is_high_value: bool
    truth: float
    estimate: dict
    deviation: dict
    loss: dict
    weight_ratio: dict


@dataclass
class PairedResult:
    config: ScenarioConfig
    tasks: list
    runs: dict
    metrics: list


def generate_tasks(config: ScenarioConfig) -> list:
    """The deterministic task stream for a config: truth, value, value class."""
    tasks = []
    for idx in range(config.n_tasks):
        gen = streams.stream(config.seed, streams.TASKS, idx)
        truth = gen.uniform(*config.truth_range)
        while truth <= 0.0:
            truth = gen.uniform(*config.truth_range)
        is_high = bool(gen.random() < config.tau)
        lo, hi = config.high_value_range if is_high else config.low_value_range
        value = gen.uniform(lo, hi)
        tasks.append(ScenarioTask(idx, float(truth), float(value), is_high))
    return tasks


def _profiles(config: ScenarioConfig, ids, bad):
    out = {}
    for entity in ids:
        if entity in bad:
            out[entity] = attacker(
                config.omega,
                high_value_threshold=config.high_value_threshold,
                noise_fraction=config.noise_fraction,
                direction=config.direction,
            )
        else:
            out[entity] = honest(config.noise_fraction)
    return out


def _is_present(config: ScenarioConfig, entity_index: int, task_id: int) -> bool:
    if config.dropout <= 0.0:
        return True
    gen = streams.stream(config.seed, streams.PRESENCE, entity_index, task_id)
    return bool(gen.random() >= config.dropout)


def run_scheme(config: ScenarioConfig, scheme: str, tasks=None) -> SchemeRun:
    """Run one scheme end to end over the config's task stream."""
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if tasks is None:
        tasks = generate_tasks(config)
    sources = source_ids(config)
    nodes = node_ids(config)
    source_profiles = _profiles(config, sources, malicious_sources(config))
    node_profiles = _profiles(config, nodes, malicious_nodes(config))
    bad_nodes = malicious_nodes(config)
    keys = {
        node: streams.stream(config.seed, streams.PUBLIC_KEY, j).bytes(32)
        for j, node in enumerate(nodes)
    }
    protocol = OracleProtocol(
        nodes,
        scheme=scheme,
        td_config=TDConfig(gamma=config.gamma, deviation_floor=PRICE_TICK),
        public_keys=keys,
    )
    run = SchemeRun(scheme=scheme, observer=nodes[0], protocol=protocol)

    for task in tasks:
        source_present = [
            _is_present(config, i, task.task_id) for i in range(config.n_sources)
        ]
        any_sources = any(source_present)

        execution = protocol.publish_task(
            Task(task_id=task.task_id, value=task.value, sources=tuple(sources)),
            callback=f"consumer-{task.task_id}",
        )
        committed = {}
        reports = {}
        if any_sources:
            for j, node in enumerate(nodes):
                if not _is_present(config, config.n_sources + j, task.task_id):
                    continue
                # each node queries the sources itself, so its copy of a
                # report carries its own draw; absent sources are down for
                # every node alike
                gen = streams.stream(
                    config.seed, streams.SOURCE_REPORT, j, task.task_id
                )
                observations = []
                node_view = {}
                for i, source in enumerate(sources):
                    if source_present[i]:
                        value = float(
                            report(
                                source_profiles[source], task.truth, task.value, gen
                            )
                        )
                        node_view[source] = value
                        observations.append(Observation(source, value))
                    else:
                        observations.append(Observation(source, 0.0, present=False))
                reports[node] = node_view
                estimate = protocol.first_td(node, execution.event, observations)
                if config.coordinated and node in bad_nodes:
                    gen = streams.stream(
                        config.seed, streams.COORDINATED_TAMPER, task.task_id
                    )
                else:
                    gen = streams.stream(
                        config.seed, streams.NODE_TAMPER, j, task.task_id
                    )
                committed[node] = float(
                    node_report(node_profiles[node], estimate.value, task.value, gen)
                )
                execution.commit(node, committed[node])
        execution.begin_reveal()
        for node, value in committed.items():
            execution.reveal(node, value)
        record = protocol.finalize(execution)

        run.records.append(record)
        run.source_reports.append(reports)
        run.first_history.append(
            {
                s: (entry.credibility, entry.cpec)
                for s, entry in protocol.source_ledger(run.observer).items()
            }
        )
        run.second_history.append(
            {
                n: (entry.credibility, entry.cpec)
                for n, entry in protocol.contract_ledger.items()
            }
        )
    return run


def weight_ratio(breakdown: RoundBreakdown, honest_set, malicious_set) -> float:
    """Mean aggregation weight of present honest entities over malicious ones."""
    weights = breakdown.aggregation_weight
    honest_w = [weights[e] for e in sorted(honest_set) if e in weights]
    malicious_w = [weights[e] for e in sorted(malicious_set) if e in weights]
    if not honest_w or not malicious_w:
        raise UndefinedRatioError("both sides need at least one present entity")
    return (sum(honest_w) / len(honest_w)) / (sum(malicious_w) / len(malicious_w))


def _metrics(config, tasks, runs) -> list:
    bad_nodes = malicious_nodes(config)
    honest_nodes = set(node_ids(config)) - bad_nodes
    metrics = []
    for i, task in enumerate(tasks):
        estimate = {s: None for s in SCHEMES}
        deviation = {s: None for s in SCHEMES}
        loss = {s: None for s in SCHEMES}
        ratio = {s: None for s in SCHEMES}
        for scheme, run in runs.items():
            record = run.records[i]
            if record.failed:
                continue
            estimate[scheme] = record.final_truth
            deviation[scheme] = abs(task.truth - record.final_truth)
            loss[scheme] = deviation[scheme] * task.value
            try:
                ratio[scheme] = weight_ratio(
                    record.second_breakdown, honest_nodes, bad_nodes
                )
            except UndefinedRatioError:
                ratio[scheme] = None
        metrics.append(
            TaskMetrics(
                task_id=task.task_id,
                task_value=task.value,
                is_high_value=task.is_high_value,
                truth=task.truth,
                estimate=estimate,
                deviation=deviation,
                loss=loss,
                weight_ratio=ratio,
            )
        )
    return metrics


def run_schemes(config: ScenarioConfig, schemes) -> PairedResult:
    tasks = generate_tasks(config)
    runs = {scheme: run_scheme(config, scheme, tasks) for scheme in schemes}
    return PairedResult(config, tasks, runs, _metrics(config, tasks, runs))


def run_paired(config: ScenarioConfig) -> PairedResult:
    """Both schemes over one task stream with identical adversary draws."""
    return run_schemes(config, SCHEMES)


def run_single(config: ScenarioConfig, scheme: str) -> PairedResult:
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return run_schemes(config, (scheme,))


# -- aggregate metrics ---------------------------------------------------------


def _samples(metrics, scheme, key):
    return [
        getattr(m, key)[scheme] for m in metrics if getattr(m, key)[scheme] is not None
    ]


def total_deviation(metrics, scheme: str) -> float:
    return sum(_samples(metrics, scheme, "deviation"))


def total_loss(metrics, scheme: str) -> float:
    return sum(_samples(metrics, scheme, "loss"))


def run_rmse(metrics, scheme: str) -> float:
    devs = _samples(metrics, scheme, "deviation")
    if not devs:
        return 0.0
    return math.sqrt(sum(d * d for d in devs) / len(devs))


def high_value_metrics(metrics, scheme: str):
    """(RMSE of deviation, total loss) over the high-value tasks only."""
    high = [m for m in metrics if m.is_high_value]
    devs = [m.deviation[scheme] for m in high if m.deviation[scheme] is not None]
    losses = [m.loss[scheme] for m in high if m.loss[scheme] is not None]
    if not devs:
        return None, None
    rmse = math.sqrt(sum(d * d for d in devs) / len(devs))
    return rmse, sum(losses)


# -- row builders --------------------------------------------------------------


def per_task_rows(result: PairedResult) -> list:
    rows = []
    for m in result.metrics:
        rows.append(
            {
                "task_id": m.task_id,
                "task_value": m.task_value,
                "is_high_value": m.is_high_value,
                "truth": m.truth,
                "estimate_datd": m.estimate["datd"],
                "estimate_baseline": m.estimate["baseline"],
                "deviation_datd": m.deviation["datd"],
                "deviation_baseline": m.deviation["baseline"],
                "loss_datd": m.loss["datd"],
                "loss_baseline": m.loss["baseline"],
                "weight_ratio_datd": m.weight_ratio["datd"],
                "weight_ratio_baseline": m.weight_ratio["baseline"],
            }
        )
    return rows


def credibility_rows(result: PairedResult) -> list:
    bad_sources = malicious_sources(result.config)
    bad_nodes = malicious_nodes(result.config)
    rows = []
    for i, task in enumerate(result.tasks):
        for stage, bad, history_key in (
            ("first", bad_sources, "first_history"),
            ("second", bad_nodes, "second_history"),
        ):
            entities = sorted(
                set().union(
                    *(getattr(run, history_key)[i].keys() for run in result.runs.values())
                )
            )
            for entity in entities:
                for scheme, run in result.runs.items():
                    snap = getattr(run, history_key)[i].get(entity)
                    if snap is None:
                        continue
                    credibility, cpec = snap
                    rows.append(
                        {
                            "task_id": task.task_id,
                            "stage": stage,
                            "entity_id": entity,
                            "is_malicious": entity in bad,
                            "scheme": scheme,
                            "credibility": credibility,
                            "cpec": cpec,
                        }
                    )
    return rows


def weights_rows(result: PairedResult) -> list:
    rows = []
    for i, task in enumerate(result.tasks):
        for stage in ("first", "second"):
            per_scheme = {}
            for scheme, run in result.runs.items():
                record = run.records[i]
                if stage == "first":
                    breakdown = record.first_breakdowns.get(run.observer)
                else:
                    breakdown = record.second_breakdown
                if breakdown is not None:
                    per_scheme[scheme] = breakdown.aggregation_weight
            entities = sorted(set().union(*per_scheme.values())) if per_scheme else []
            for entity in entities:
                for scheme, weights in per_scheme.items():
                    if entity not in weights:
                        continue
                    rows.append(
                        {
                            "task_id": task.task_id,
                            "stage": stage,
                            "entity_id": entity,
                            "scheme": scheme,
                            "weight": weights[entity],
                        }
                    )
    return rows


# -- sweeps and traces ---------------------------------------------------------


def _quartiles(samples):
    if len(samples) == 1:
        return samples[0], samples[0], samples[0]
    q25, q50, q75 = statistics.quantiles(samples, n=4, method="inclusive")
    return q25, q50, q75


def sweep(config: ScenarioConfig, parameter: str, values, n_seeds: int) -> list:
    """Paired replicas for each parameter value; one summary row per scheme.

    Replica k runs at seed config.seed + k so rows are reproducible from the
    base config alone.
    """
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMS}, got {parameter!r}")
    if not values:
        raise ValueError("values must be non-empty")
    if n_seeds < 1:
        raise ValueError("n_seeds must be positive")
    rows = []
    for value in values:
        samples = {
            scheme: {"total_deviation": [], "rmse": [], "total_loss": []}
            for scheme in SCHEMES
        }
        for k in range(n_seeds):
            replica = dataclasses.replace(
                config, **{parameter: float(value)}, seed=config.seed + k
            )
            result = run_paired(replica)
            for scheme in SCHEMES:
                samples[scheme]["total_deviation"].append(
                    total_deviation(result.metrics, scheme)
                )
                samples[scheme]["rmse"].append(run_rmse(result.metrics, scheme))
                samples[scheme]["total_loss"].append(
                    total_loss(result.metrics, scheme)
                )
        for scheme in SCHEMES:
            row = {
                "param": parameter,
                "value": float(value),
                "scheme": scheme,
                "seeds": n_seeds,
            }
            for metric, series in samples[scheme].items():
                mean = sum(series) / len(series)
                q25, q50, q75 = _quartiles(series)
                row[f"{metric}_mean"] = mean
                row[f"{metric}_q25"] = q25
                row[f"{metric}_median"] = q50
                row[f"{metric}_q75"] = q75
            rows.append(row)
    return rows


def first_td_trace(config: ScenarioConfig, node_id: str) -> dict:
    """Per-task first-stage deviation series for one node, per scheme."""
    if node_id not in node_ids(config):
        raise NoSuchNodeError(f"unknown node {node_id!r}")
    result = run_paired(config)
    trace = {}
    for scheme, run in result.runs.items():
        series = []
        for task, record in zip(result.tasks, run.records):
            estimate = record.first_estimates.get(node_id)
            series.append(None if estimate is None else abs(task.truth - estimate))
        trace[scheme] = series
    return trace
