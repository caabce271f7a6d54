"""Two-stage oracle round flow: per-node estimation, commit-reveal, settlement.

A task names a source set and carries a transaction value. Each node first
aggregates the source reports against its own private credibility ledger, then
binds itself to that estimate with a hash commitment. Once the commit window
closes, nodes reveal; a reveal is accepted only if it reproduces the committed
digest under the node's public key, which makes copying another node's
published reveal useless. Accepted reveals feed a second aggregation round
against the shared contract ledger, and the settled value is handed to the
requesting callback.

The chain itself is modeled as an in-process event log: ``OracleProtocol``
keeps one ``RoundRecord`` per finalized task.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    DuplicateCommitError,
    DuplicateRevealError,
    InvalidTaskError,
    NoCommitmentError,
    NoSourcesError,
    NoSuchNodeError,
    PhaseViolationError,
    RoundFailedError,
)
from .tdcore import (
    CredibilityLedger,
    Observation,
    RoundBreakdown,
    TDConfig,
    TruthEstimate,
    run_baseline_round,
    run_datd_round,
)

SCHEMES = ("datd", "baseline")


def canonical_value(value: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(value))


def commitment_digest(value: float, public_key: bytes) -> bytes:
    """SHA-256 over the canonical value and the lowercase hex of the key."""
    preimage = f"{canonical_value(value)}|{public_key.hex()}".encode("ascii")
    return hashlib.sha256(preimage).digest()


def _default_public_key(node: str) -> bytes:
    return hashlib.sha256(b"datd-node-key:" + node.encode("utf-8")).digest()


@dataclass(frozen=True)
class Task:
    task_id: int
    value: float
    sources: tuple


@dataclass(frozen=True)
class RequestEvent:
    """On-chain request record produced by publishing a task."""

    task_id: int
    task_value: float
    source_set: tuple
    callback: Optional[str]


@dataclass(frozen=True)
class Commitment:
    node: str
    digest: bytes


@dataclass(frozen=True)
class CallbackDelivery:
    task_id: int
    callback: str
    value: float


@dataclass
class RoundRecord:
    """Everything one finalized task left behind on the event log."""

    request: RequestEvent
    first_estimates: dict = field(default_factory=dict)
    first_breakdowns: dict = field(default_factory=dict)
    commitments: dict = field(default_factory=dict)
    accepted_reveals: dict = field(default_factory=dict)
    final_truth: Optional[float] = None
    second_breakdown: Optional[RoundBreakdown] = None
    delivery: Optional[CallbackDelivery] = None
    failed: bool = False


class TaskExecution:
    """Phase machine for one published task: commit, then reveal, then done.

    Commits are only legal before ``begin_reveal`` and reveals only after;
    anything else raises with a phase-violation code. A reveal that fails
    digest verification is not an error, it is simply rejected: the node
    burned its one reveal attempt.
    """

    def __init__(self, protocol: "OracleProtocol", event: RequestEvent):
        self._protocol = protocol
        self.event = event
        self.phase = "commit"
        self.commitments: dict = {}
        self.accepted: dict = {}
        self._revealed: set = set()
        self.first_estimates: dict = {}
        self.first_breakdowns: dict = {}

    def commit(self, node: str, value: float) -> Commitment:
        self._protocol._require_node(node)
        if self.phase != "commit":
            raise PhaseViolationError(
                f"commit for task {self.event.task_id} arrived in {self.phase} phase"
            )
        if node in self.commitments:
            raise DuplicateCommitError(
                f"node {node!r} already committed on task {self.event.task_id}"
            )
        digest = commitment_digest(value, self._protocol.public_key(node))
        commitment = Commitment(node=node, digest=digest)
        self.commitments[node] = commitment
        return commitment

    def begin_reveal(self) -> None:
        if self.phase != "commit":
            raise PhaseViolationError("reveal window already opened")
        self.phase = "reveal"

    def reveal(self, node: str, value: float, public_key: Optional[bytes] = None) -> bool:
        self._protocol._require_node(node)
        if self.phase != "reveal":
            raise PhaseViolationError(
                f"reveal for task {self.event.task_id} arrived in {self.phase} phase"
            )
        if node not in self.commitments:
            raise NoCommitmentError(
                f"node {node!r} never committed on task {self.event.task_id}"
            )
        if node in self._revealed:
            raise DuplicateRevealError(
                f"node {node!r} already revealed on task {self.event.task_id}"
            )
        self._revealed.add(node)
        key = public_key if public_key is not None else self._protocol.public_key(node)
        accepted = commitment_digest(value, key) == self.commitments[node].digest
        if accepted:
            self.accepted[node] = value
        return accepted


class OracleProtocol:
    """Round engine over a fixed node roster and one shared contract ledger.

    Each node carries a private ledger scoring the data sources it reads; the
    contract ledger scores the nodes themselves by their accepted reveals.
    ``scheme`` selects the aggregation rule for both stages: value-weighted
    (``"datd"``) or history-only (``"baseline"``).
    """

    def __init__(
        self,
        node_ids: Sequence[str],
        scheme: str = "datd",
        td_config: Optional[TDConfig] = None,
        public_keys: Optional[Mapping[str, bytes]] = None,
    ):
        nodes = sorted(node_ids)
        if not nodes:
            raise ValueError("node roster must not be empty")
        if len(set(nodes)) != len(nodes):
            raise ValueError("node ids must be unique")
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        self.node_ids = tuple(nodes)
        self.scheme = scheme
        self.td_config = td_config if td_config is not None else TDConfig()
        self._public_keys = {
            node: (public_keys[node] if public_keys else _default_public_key(node))
            for node in nodes
        }
        self._source_ledgers = {node: CredibilityLedger() for node in nodes}
        self._contract_ledger = CredibilityLedger()
        self._executions: dict = {}
        self.records: list = []

    # -- roster ------------------------------------------------------------

    def _require_node(self, node: str) -> None:
        if node not in self._public_keys:
            raise NoSuchNodeError(f"unknown node {node!r}")

    def public_key(self, node: str) -> bytes:
        self._require_node(node)
        return self._public_keys[node]

    def source_ledger(self, node: str) -> CredibilityLedger:
        """The named node's private ledger over data sources."""
        self._require_node(node)
        return self._source_ledgers[node]

    @property
    def contract_ledger(self) -> CredibilityLedger:
        """The shared ledger scoring nodes by their accepted reveals."""
        return self._contract_ledger

    # -- round operations ----------------------------------------------------

    def publish_task(self, task: Task, callback: Optional[str] = None) -> TaskExecution:
        if not task.sources:
            raise NoSourcesError(f"task {task.task_id} names no sources")
        if not task.value > 0.0:
            raise InvalidTaskError(
                f"task {task.task_id} value must be positive, got {task.value!r}"
            )
        if task.task_id in self._executions:
            raise InvalidTaskError(f"task id {task.task_id} already published")
        event = RequestEvent(
            task_id=task.task_id,
            task_value=task.value,
            source_set=tuple(task.sources),
            callback=callback,
        )
        execution = TaskExecution(self, event)
        self._executions[task.task_id] = execution
        return execution

    def _run_scheme_round(
        self,
        observations: Iterable[Observation],
        ledger: CredibilityLedger,
        task_value: float,
    ):
        if self.scheme == "baseline":
            return run_baseline_round(observations, ledger, self.td_config)
        return run_datd_round(observations, ledger, task_value, self.td_config)

    def first_td(
        self,
        node: str,
        event: RequestEvent,
        observations: Iterable[Observation],
    ) -> TruthEstimate:
        """Run the node's private aggregation round over the source reports.

        Commits the node's source ledger; other nodes' ledgers and the
        contract ledger are untouched.
        """
        self._require_node(node)
        execution = self._executions.get(event.task_id)
        if execution is None:
            raise InvalidTaskError(f"task id {event.task_id} was never published")
        estimate, updated = self._run_scheme_round(
            observations, self._source_ledgers[node], event.task_value
        )
        self._source_ledgers[node] = updated
        execution.first_estimates[node] = estimate.value
        execution.first_breakdowns[node] = estimate.breakdown
        return estimate

    def second_td(
        self, event: RequestEvent, accepted: Mapping[str, float]
    ) -> TruthEstimate:
        """Aggregate accepted reveals against the contract ledger.

        Every roster node appears in the round: accepted revealers as present
        observations, everyone else as absent, so sitting out still counts
        against participation. Zero accepted reveals fail the round.
        """
        if not accepted:
            raise RoundFailedError(
                f"task {event.task_id} has no accepted reveals to settle"
            )
        observations = [
            Observation(node, accepted[node]) if node in accepted
            else Observation(node, 0.0, present=False)
            for node in self.node_ids
        ]
        estimate, updated = self._run_scheme_round(
            observations, self._contract_ledger, event.task_value
        )
        self._contract_ledger = updated
        return estimate

    def finalize(self, execution: TaskExecution) -> RoundRecord:
        """Close the round: settle accepted reveals and log the record.

        A round with zero accepted reveals is recorded as failed; no ledger
        moves and no callback fires, so the task simply never happened as far
        as the score-keeping is concerned.
        """
        if execution.phase != "reveal":
            raise PhaseViolationError(
                f"finalize for task {execution.event.task_id} arrived in "
                f"{execution.phase} phase"
            )
        execution.phase = "done"
        record = RoundRecord(
            request=execution.event,
            first_estimates=dict(execution.first_estimates),
            first_breakdowns=dict(execution.first_breakdowns),
            commitments=dict(execution.commitments),
            accepted_reveals=dict(execution.accepted),
        )
        if not execution.accepted:
            record.failed = True
        else:
            estimate = self.second_td(execution.event, execution.accepted)
            record.final_truth = estimate.value
            record.second_breakdown = estimate.breakdown
            if execution.event.callback is not None:
                record.delivery = CallbackDelivery(
                    task_id=execution.event.task_id,
                    callback=execution.event.callback,
                    value=estimate.value,
                )
        self.records.append(record)
        return record
