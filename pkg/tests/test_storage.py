"""Event log durability, corruption detection, replay, export."""

from __future__ import annotations

import json

import pytest

from generators import build_session
from scriptmeet.clock import VirtualClock
from scriptmeet.model import Comment, ExpiryPolicy, Like
from scriptmeet.session import (
    AnnotateCommand,
    IngestFinalizeCommand,
    JoinCommand,
    LiveSession,
)
from scriptmeet import storage
from scriptmeet.storage import (
    CorruptRecord,
    EventLogWriter,
    SeqGap,
    UnknownFormat,
    export,
    read_log,
    replay,
)


def write_session_log(path, builder):
    with EventLogWriter(path, builder.live.session_id, created_at=0.0) as writer:
        for event in builder.events:
            writer.append(event)


def make_small_session(ttl=180.0):
    clock = VirtualClock()
    live = LiveSession("s1", clock=clock, policy=ExpiryPolicy(ttl_seconds=ttl))
    events = []
    live.on_event = events.append
    live.submit(JoinCommand("amy", "Amy"))
    return live, clock, events


class TestAppend:
    def test_fresh_log_has_header_plus_record(self, tmp_path):
        live, _, events = make_small_session()
        path = tmp_path / "s1.events.jsonl"
        with EventLogWriter(path, "s1") as writer:
            writer.append(events[0])
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["kind"] == "header"
        assert json.loads(lines[1])["seq"] == 1

    def test_seq_gap_rejected(self, tmp_path):
        builder = build_session(seed=1, n_events=10)
        path = tmp_path / "log.events.jsonl"
        with EventLogWriter(path, "s-test") as writer:
            writer.append(builder.events[0])
            with pytest.raises(SeqGap):
                writer.append(builder.events[2])

    def test_append_resumes_after_reopen(self, tmp_path):
        builder = build_session(seed=2, n_events=20)
        path = tmp_path / "log.events.jsonl"
        with EventLogWriter(path, "s-test") as writer:
            for event in builder.events[:10]:
                writer.append(event)
        with EventLogWriter(path, "s-test") as writer:
            assert writer.last_seq == 10
            for event in builder.events[10:]:
                writer.append(event)
        _, events = read_log(path)
        assert [e.seq for e in events] == list(range(1, 21))

    def test_durability_after_ack(self, tmp_path):
        # finalized utterances fsync immediately; the record must be on
        # disk before close
        live, _, events = make_small_session()
        live.submit(IngestFinalizeCommand("b1", "amy", "hello", 0.0, 1.0))
        path = tmp_path / "log.events.jsonl"
        writer = EventLogWriter(path, "s1")
        for event in events:
            writer.append(event)
        # no close: simulate process death by abandoning the handle
        _, persisted = read_log(path)
        assert [e.type for e in persisted] == ["participant_joined", "utterance_finalized"]
        writer.close()


class TestCrashRecovery:
    def test_torn_final_line_truncated_on_reopen(self, tmp_path):
        builder = build_session(seed=3, n_events=12)
        path = tmp_path / "log.events.jsonl"
        write_session_log(path, builder)
        whole = path.read_bytes()
        torn = whole.rstrip(b"\n")
        path.write_bytes(torn[: len(torn) - 17])  # cut inside the last record
        with EventLogWriter(path, "s-test") as writer:
            assert writer.last_seq == len(builder.events) - 1
        state = replay(path)
        assert state.last_seq == len(builder.events) - 1

    def test_torn_line_fails_strict_read(self, tmp_path):
        builder = build_session(seed=3, n_events=5)
        path = tmp_path / "log.events.jsonl"
        write_session_log(path, builder)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(CorruptRecord):
            read_log(path)

    def test_mutated_record_detected_with_seq(self, tmp_path):
        builder = build_session(seed=4, n_events=12)
        path = tmp_path / "log.events.jsonl"
        write_session_log(path, builder)
        lines = path.read_text(encoding="utf-8").splitlines()
        record = json.loads(lines[5])  # event seq 5
        record["wall_time"] = record["wall_time"] + 1000.0  # mutate, keep old crc
        lines[5] = json.dumps(record, sort_keys=True, separators=(",", ":"))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(CorruptRecord) as err:
            replay(path)
        assert err.value.seq == 5


class TestReplay:
    def test_empty_body_is_empty_session(self, tmp_path):
        path = tmp_path / "log.events.jsonl"
        EventLogWriter(path, "s-empty").close()
        state = replay(path)
        assert state.last_seq == 0 and state.bubbles == {}

    def test_replay_equals_live_state(self, tmp_path):
        builder = build_session(seed=5, n_events=2000)
        path = tmp_path / "log.events.jsonl"
        write_session_log(path, builder)
        assert replay(path).canonical() == builder.live.state.canonical()

    def test_round_trip_for_many_seeds(self, tmp_path):
        for seed in range(6):
            builder = build_session(seed=seed, n_events=100)
            path = tmp_path / f"log{seed}.events.jsonl"
            write_session_log(path, builder)
            assert replay(path).canonical() == builder.live.state.canonical()


class TestSnapshots:
    def test_snapshot_file_round_trip(self, tmp_path):
        builder = build_session(seed=6, n_events=50)
        path = tmp_path / "s.snapshot.json"
        storage.write_snapshot(path, builder.live.state)
        loaded = storage.read_snapshot(path)
        assert loaded == builder.live.state.to_dict()


class TestExport:
    def test_plain_text_line_format(self, tmp_path):
        live, _, events = make_small_session()
        live.submit(IngestFinalizeCommand("b1", "amy", "hello", 65.0, 66.5))
        path = tmp_path / "log.events.jsonl"
        with EventLogWriter(path, "s1") as writer:
            for event in events:
                writer.append(event)
        doc = export(path, "text")
        assert "[01:05] Amy: hello" in doc.splitlines()

    def test_empty_session_is_header_only(self, tmp_path):
        path = tmp_path / "log.events.jsonl"
        EventLogWriter(path, "s-empty").close()
        lines = export(path, "text").splitlines()
        assert all(line.startswith("#") for line in lines)

    def test_private_comment_absent_for_non_author(self, tmp_path):
        live, _, events = make_small_session()
        live.submit(JoinCommand("bob", "Bob"))
        live.submit(IngestFinalizeCommand("b1", "amy", "hello", 0.0, 1.0))
        live.submit(AnnotateCommand(author="amy", bubble_id="b1", body=Comment("for my eyes", private=True)))
        path = tmp_path / "log.events.jsonl"
        with EventLogWriter(path, "s1") as writer:
            for event in events:
                writer.append(event)
        as_bob = export(path, "json", viewer="bob")
        as_amy = export(path, "json", viewer="amy")
        anonymous = export(path, "json")
        assert "for my eyes" not in as_bob
        assert "for my eyes" in as_amy
        assert "for my eyes" not in anonymous

    def test_hidden_bubbles_flagged_not_lost(self, tmp_path):
        live, clock, events = make_small_session(ttl=5.0)
        live.submit(IngestFinalizeCommand("b1", "amy", "fading words", 0.0, 1.0))
        live.submit(IngestFinalizeCommand("b2", "amy", "pinned words", 0.0, 2.0))
        live.submit(AnnotateCommand(author="amy", bubble_id="b2", body=Like()))
        clock.advance(10.0)
        assert live.tick() is not None
        path = tmp_path / "log.events.jsonl"
        with EventLogWriter(path, "s1") as writer:
            for event in events:
                writer.append(event)
        doc = json.loads(export(path, "json"))
        by_id = {b["bubble_id"]: b for b in doc["transcript"]["bubbles"]}
        assert by_id["b1"]["hidden"] is True
        assert by_id["b2"]["hidden"] is False
        assert by_id["b1"]["text"] == "fading words"
        # the plain transcript keeps hidden bubbles too: it is the record
        text = export(path, "text")
        assert "fading words" in text

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "log.events.jsonl"
        EventLogWriter(path, "s1").close()
        with pytest.raises(UnknownFormat):
            export(path, "pdf")

    def test_minutes_roll_past_an_hour(self, tmp_path):
        live, _, events = make_small_session()
        live.submit(IngestFinalizeCommand("b1", "amy", "late words", 3700.0, 3701.0))
        path = tmp_path / "log.events.jsonl"
        with EventLogWriter(path, "s1") as writer:
            for event in events:
                writer.append(event)
        assert "[61:40] Amy: late words" in export(path, "text")
