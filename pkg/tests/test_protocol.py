"""Protocol tests: task lifecycle, commit-reveal, phase machine, isolation."""

import hashlib
import itertools
import random

import pytest

from datd.errors import (
    DuplicateCommitError,
    DuplicateRevealError,
    InvalidTaskError,
    NoCommitmentError,
    NoSourcesError,
    NoSuchNodeError,
    PhaseViolationError,
    RoundFailedError,
)
from datd.protocol import (
    OracleProtocol,
    Task,
    canonical_value,
    commitment_digest,
)
from datd.tdcore import Observation, TDConfig


def make_protocol(n_nodes=3, scheme="datd"):
    return OracleProtocol(
        node_ids=[f"n{i:02d}" for i in range(n_nodes)],
        scheme=scheme,
        td_config=TDConfig(gamma=0.5),
    )


def source_obs(values):
    return [Observation(f"s{i:02d}", v) for i, v in enumerate(values)]


class TestPublishTask:
    def test_event_carries_task_fields_verbatim(self):
        protocol = make_protocol()
        task = Task(task_id=7, value=8.0, sources=("s1", "s2", "s3", "s4", "s5"))
        execution = protocol.publish_task(task, callback="consumer-7")
        event = execution.event
        assert event.task_id == 7
        assert event.task_value == 8.0
        assert event.source_set == ("s1", "s2", "s3", "s4", "s5")
        assert event.callback == "consumer-7"

    def test_empty_source_set_rejected(self):
        protocol = make_protocol()
        with pytest.raises(NoSourcesError):
            protocol.publish_task(Task(task_id=0, value=5.0, sources=()))

    def test_zero_value_rejected(self):
        protocol = make_protocol()
        with pytest.raises(InvalidTaskError):
            protocol.publish_task(Task(task_id=0, value=0.0, sources=("s1",)))


class TestCommitmentDigest:
    def test_deterministic(self):
        key = bytes(range(32))
        assert commitment_digest(49.75, key) == commitment_digest(49.75, key)

    def test_last_bit_changes_digest(self):
        import math

        key = bytes(range(32))
        v = 49.75
        assert commitment_digest(v, key) != commitment_digest(
            math.nextafter(v, 100.0), key
        )

    def test_preimage_format(self):
        key = b"\xab" * 32
        expected = hashlib.sha256(b"0.1|" + key.hex().encode()).digest()
        assert commitment_digest(0.1, key) == expected

    def test_canonical_value_round_trips(self):
        for v in (0.1, 1 / 3, 42.0, 1e-12, 9876.54321):
            assert float(canonical_value(v)) == v


class TestPhaseMachine:
    def test_happy_path(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(
            Task(task_id=0, value=50.0, sources=("s00", "s01"))
        )
        obs = source_obs([10.0, 10.2])
        estimates = {
            node: protocol.first_td(node, execution.event, obs).value
            for node in ("n00", "n01")
        }
        for node, value in estimates.items():
            execution.commit(node, value)
        execution.begin_reveal()
        assert execution.reveal("n00", estimates["n00"]) is True
        assert execution.reveal("n01", estimates["n01"]) is True
        record = protocol.finalize(execution)
        assert record.failed is False
        assert 10.0 <= record.final_truth <= 10.2

    def test_duplicate_commit_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        execution.commit("n00", 1.0)
        with pytest.raises(DuplicateCommitError):
            execution.commit("n00", 1.0)

    def test_commit_after_reveal_opens_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        execution.commit("n00", 1.0)
        execution.begin_reveal()
        with pytest.raises(PhaseViolationError):
            execution.commit("n01", 1.0)

    def test_reveal_during_commit_phase_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        execution.commit("n00", 1.0)
        with pytest.raises(PhaseViolationError):
            execution.reveal("n00", 1.0)

    def test_reveal_without_commitment_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        execution.commit("n00", 1.0)
        execution.begin_reveal()
        with pytest.raises(NoCommitmentError):
            execution.reveal("n01", 1.0)

    def test_duplicate_reveal_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        execution.commit("n00", 1.0)
        execution.begin_reveal()
        execution.reveal("n00", 1.0)
        with pytest.raises(DuplicateRevealError):
            execution.reveal("n00", 1.0)

    def test_unknown_node_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        with pytest.raises(NoSuchNodeError):
            execution.commit("ghost", 1.0)

    def test_exhaustive_orderings(self):
        # every interleaving of two commits and two reveals; an operation that
        # arrives out of phase must raise, and only commit-commit-reveal-reveal
        # runs the full round cleanly
        events = [("commit", "n00"), ("commit", "n01"), ("reveal", "n00"), ("reveal", "n01")]
        clean_orders = 0
        for order in set(itertools.permutations(events)):
            protocol = make_protocol(n_nodes=2)
            execution = protocol.publish_task(
                Task(task_id=0, value=5.0, sources=("s00",))
            )
            ok = True
            try:
                for op, node in order:
                    if op == "commit":
                        execution.commit(node, 3.0)
                    else:
                        if execution.phase == "commit":
                            execution.begin_reveal()
                        execution.reveal(node, 3.0)
            except (PhaseViolationError, NoCommitmentError):
                ok = False
            if ok:
                clean_orders += 1
                assert [op for op, _ in order] == ["commit", "commit", "reveal", "reveal"]
        assert clean_orders == 4  # 2 commit orders x 2 reveal orders


class TestFreeloading:
    def test_copier_rejected_in_all_constructed_cases(self):
        rng = random.Random(99)
        rejected = 0
        cases = 100
        for i in range(cases):
            protocol = make_protocol(n_nodes=2)
            execution = protocol.publish_task(
                Task(task_id=i, value=500.0, sources=("s00",))
            )
            honest_value = rng.uniform(10.0, 90.0)
            guess = honest_value * (1 + rng.uniform(0.001, 0.5))
            execution.commit("n00", honest_value)
            execution.commit("n01", guess)  # copier commits before seeing anything
            execution.begin_reveal()
            assert execution.reveal("n00", honest_value) is True
            # copier parrots the honest node's now-public reveal
            if execution.reveal("n01", honest_value) is False:
                rejected += 1
            record = protocol.finalize(execution)
            assert "n01" not in record.accepted_reveals
            assert record.final_truth == honest_value
        assert rejected == cases

    def test_tampered_public_key_rejected(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        execution.commit("n00", 2.5)
        execution.begin_reveal()
        assert execution.reveal("n00", 2.5, public_key=b"\x00" * 32) is False


class TestFirstTd:
    def test_worked_example_at_one_node(self):
        protocol = make_protocol(n_nodes=1)
        ledger = protocol.source_ledger("n00")
        for s, r in zip(("s1", "s2", "s3", "s4", "s5"), (0.8, 0.8, 0.8, 0.95, 0.95)):
            ledger.seed(s, credibility=r, cpec=2.5, participation_count=1, tasks_seen=1)
        execution = protocol.publish_task(
            Task(task_id=0, value=8.0, sources=("s1", "s2", "s3", "s4", "s5"))
        )
        obs = [
            Observation(s, v)
            for s, v in zip(("s1", "s2", "s3", "s4", "s5"), (1.0, 1.0, 1.0, 0.5, 0.4))
        ]
        estimate = protocol.first_td("n00", execution.event, obs)
        assert estimate.value == pytest.approx(0.774, abs=1e-3)

    def test_single_source(self):
        protocol = make_protocol()
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        estimate = protocol.first_td("n00", execution.event, [Observation("s00", 7.25)])
        assert estimate.value == 7.25

    def test_unknown_node(self):
        protocol = make_protocol()
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        with pytest.raises(NoSuchNodeError):
            protocol.first_td("ghost", execution.event, [Observation("s00", 1.0)])

    def test_ledger_isolation_between_nodes(self):
        protocol = make_protocol(n_nodes=3)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        before = {
            node: len(protocol.source_ledger(node)) for node in ("n00", "n01", "n02")
        }
        protocol.first_td("n01", execution.event, [Observation("s00", 3.0)])
        assert len(protocol.source_ledger("n01")) == before["n01"] + 1
        assert len(protocol.source_ledger("n00")) == before["n00"]
        assert len(protocol.source_ledger("n02")) == before["n02"]
        assert len(protocol.contract_ledger) == 0


class TestSecondTdAndCallback:
    def _run_round(self, protocol, values, task_id=0, task_value=500.0):
        execution = protocol.publish_task(
            Task(task_id=task_id, value=task_value, sources=("s00",)),
            callback="consumer",
        )
        for node, value in values.items():
            execution.commit(node, value)
        execution.begin_reveal()
        for node, value in values.items():
            execution.reveal(node, value)
        return protocol.finalize(execution)

    def test_single_accepted_reveal_wins(self):
        protocol = make_protocol(n_nodes=3)
        record = self._run_round(protocol, {"n01": 42.5})
        assert record.final_truth == 42.5
        assert record.delivery is not None
        assert record.delivery.value == 42.5

    def test_identical_reveals_zero_signal(self):
        protocol = make_protocol(n_nodes=3)
        record = self._run_round(protocol, {n: 13.0 for n in ("n00", "n01", "n02")})
        assert record.final_truth == 13.0
        assert all(d == 0.0 for d in record.second_breakdown.log_distance.values())

    def test_zero_accepted_reveals_fails_round(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(
            Task(task_id=0, value=5.0, sources=("s00",)), callback="consumer"
        )
        execution.commit("n00", 1.0)
        execution.begin_reveal()
        record = protocol.finalize(execution)
        assert record.failed is True
        assert record.final_truth is None
        assert record.delivery is None

    def test_second_td_op_raises_on_no_reveals(self):
        protocol = make_protocol(n_nodes=2)
        execution = protocol.publish_task(Task(task_id=0, value=5.0, sources=("s00",)))
        with pytest.raises(RoundFailedError):
            protocol.second_td(execution.event, {})

    def test_participation_counters_across_rounds(self):
        protocol = make_protocol(n_nodes=3)
        self._run_round(protocol, {n: 13.0 for n in ("n00", "n01", "n02")}, task_id=0)
        # n02 commits but never reveals on the second task
        execution = protocol.publish_task(
            Task(task_id=1, value=5.0, sources=("s00",))
        )
        for node in ("n00", "n01", "n02"):
            execution.commit(node, 14.0)
        execution.begin_reveal()
        execution.reveal("n00", 14.0)
        execution.reveal("n01", 14.0)
        protocol.finalize(execution)

        ledger = protocol.contract_ledger
        assert ledger.entry("n00").participation_count == 2
        assert ledger.entry("n00").tasks_seen == 2
        assert ledger.entry("n02").participation_count == 1
        assert ledger.entry("n02").tasks_seen == 2

    def test_conservation_over_random_participation(self):
        rng = random.Random(4)
        for trial in range(30):
            protocol = make_protocol(n_nodes=5)
            execution = protocol.publish_task(
                Task(task_id=trial, value=50.0, sources=("s00",))
            )
            nodes = [f"n{i:02d}" for i in range(5)]
            committers = [n for n in nodes if rng.random() < 0.7]
            for node in committers:
                execution.commit(node, 9.0)
            execution.begin_reveal()
            revealers = [n for n in committers if rng.random() < 0.7]
            for node in revealers:
                # half the revealers lie about their committed value
                value = 9.0 if rng.random() < 0.5 else 8.0
                execution.reveal(node, value)
            record = protocol.finalize(execution)
            accepted = len(record.accepted_reveals)
            assert accepted <= len(committers) <= 5
            if record.failed:
                assert record.final_truth is None

    def test_one_callback_per_successful_task(self):
        protocol = make_protocol(n_nodes=2)
        n_tasks = 10
        for i in range(n_tasks):
            self._run_round(protocol, {"n00": 5.0, "n01": 5.5}, task_id=i)
        deliveries = [r.delivery for r in protocol.records]
        assert len(deliveries) == n_tasks
        assert all(d is not None for d in deliveries)
