"""Wire protocol: framing round-trips, fuzz safety, resume, client fold."""

from __future__ import annotations

import json
import random

import pytest

from generators import MESSAGE_KINDS, build_session, random_message
from scriptmeet.events import canonical_json
from scriptmeet.projection import display_names, project_state, render_event
from scriptmeet.protocol import (
    ClientHello,
    ClientPing,
    ClientReplica,
    DecodeError,
    ResumeRequired,
    ServerEvent,
    ServerPong,
    ServerWelcome,
    decode,
    encode,
    plan_resume,
)
from scriptmeet.session import SessionState


class TestRoundTrip:
    def test_ping_pong_round_trip(self):
        assert decode(encode(ClientPing())) == ClientPing()
        assert decode(encode(ServerPong())) == ServerPong()

    @pytest.mark.parametrize("kind", MESSAGE_KINDS)
    def test_random_messages_round_trip(self, kind):
        rng = random.Random(hash(kind) & 0xFFFF)
        for _ in range(200):
            msg = random_message(rng, kind)
            assert decode(encode(msg)) == msg

    def test_unknown_fields_are_ignored(self):
        frame = json.loads(encode(ClientHello("t1", "Amy")))
        frame["future_extension"] = {"x": 1}
        assert decode(json.dumps(frame)) == ClientHello("t1", "Amy")

    def test_frames_are_single_line_utf8_json(self):
        frame = encode(random_message(random.Random(1), "event"))
        parsed = json.loads(frame)
        assert parsed["schema_version"] == 1


class TestDecodeErrors:
    def test_truncated_frame(self):
        frame = encode(ClientHello("t1", "Amy"))
        with pytest.raises(DecodeError):
            decode(frame[: len(frame) // 2])
        # decoder is stateless: the next intact frame still decodes
        assert decode(frame) == ClientHello("t1", "Amy")

    @pytest.mark.parametrize(
        "frame",
        [
            "",
            "null",
            "[]",
            '"json string"',
            "{}",
            '{"schema_version": 2, "kind": "ping"}',
            '{"schema_version": 1}',
            '{"schema_version": 1, "kind": "nope"}',
            '{"schema_version": 1, "kind": "hello", "token": 5, "display_name": "x"}',
            '{"schema_version": 1, "kind": "subscribe", "session_id": "s", "from_seq": "x"}',
            '{"schema_version": 1, "kind": "subscribe", "session_id": "s", "from_seq": true}',
            '{"schema_version": 1, "kind": "command", "command": {"type": "annotate"}}',
            '{"schema_version": 1, "kind": "command", "command": {"type": "annotate", "bubble_id": "b", "annotation_kind": "highlight", "body": {"color": "mauve", "start": 0, "end": 1}}}',
            '{"schema_version": 1, "kind": "event", "seq": 1, "delta": 3}',
            b"\xff\xfe garbage bytes",
        ],
    )
    def test_malformed_frames_raise_decode_error(self, frame):
        with pytest.raises(DecodeError):
            decode(frame)

    def test_fuzz_never_raises_anything_else(self):
        rng = random.Random(99)
        base = [encode(random_message(rng, k)) for k in MESSAGE_KINDS for _ in range(5)]
        ok = 0
        for i in range(3000):
            frame = base[i % len(base)]
            mode = rng.randrange(4)
            if mode == 0:
                frame = frame[: rng.randrange(len(frame) + 1)]
            elif mode == 1:
                pos = rng.randrange(len(frame))
                frame = frame[:pos] + chr(rng.randrange(32, 1000)) + frame[pos + 1 :]
            elif mode == 2:
                frame = bytes(rng.randrange(256) for _ in range(rng.randrange(60)))
            try:
                result = decode(frame)
                ok += 1
                assert result is not None
            except DecodeError:
                pass
        assert ok > 0  # some mutations still parse; that is fine


class TestPlanResume:
    def test_from_seq_equal_last_seq_empty_backlog_no_snapshot(self):
        builder = build_session(seed=3, n_events=40)
        plan = plan_resume(40, builder.live.last_seq, builder.live.backlog_events())
        assert not plan.use_snapshot and plan.events == ()

    def test_three_missed_events_within_window(self):
        builder = build_session(seed=3, n_events=40)
        last = builder.live.last_seq
        plan = plan_resume(last - 3, last, builder.live.backlog_events())
        assert not plan.use_snapshot
        assert [e.seq for e in plan.events] == [last - 2, last - 1, last]

    def test_older_than_window_takes_snapshot_path(self):
        rng = random.Random(5)
        from generators import SessionBuilder

        builder = SessionBuilder(rng)
        builder.live.backlog = type(builder.live.backlog)(maxlen=10)  # tiny window
        builder.run(60)
        plan = plan_resume(5, builder.live.last_seq, builder.live.backlog_events())
        assert plan.use_snapshot

    def test_negative_from_seq_rejected(self):
        with pytest.raises(ValueError):
            plan_resume(-1, 10, [])


def fold_for_viewer(events, viewer, check_each_seq=True):
    """Feed rendered deltas to a ClientReplica alongside the server fold,
    asserting the projections agree at every sequence number."""
    state = SessionState("s-test")
    replica = ClientReplica()
    replica.apply(ServerWelcome(session_id="s-test", last_seq=0, snapshot=project_state(state, viewer)))
    for event in events:
        state.apply(event)
        delta = render_event(event, display_names(state), viewer)
        replica.apply(ServerEvent(seq=event.seq, delta=delta))
        if check_each_seq:
            assert canonical_json(replica.view()) == canonical_json(project_state(state, viewer))
    return state, replica


class TestClientReplica:
    def test_fold_equivalence_at_every_seq(self):
        builder = build_session(seed=11, n_events=200, private_text="sealed")
        for viewer in builder.users:
            fold_for_viewer(builder.events, viewer)

    def test_duplicate_event_is_noop(self):
        builder = build_session(seed=12, n_events=60)
        viewer = builder.users[0]
        state, replica = fold_for_viewer(builder.events, viewer, check_each_seq=False)
        names = display_names(state)
        last = builder.events[-1]
        before = canonical_json(replica.view())
        replica.apply(ServerEvent(seq=last.seq, delta=render_event(last, names, viewer)))
        assert canonical_json(replica.view()) == before

    def test_gap_triggers_resume(self):
        builder = build_session(seed=13, n_events=30)
        viewer = builder.users[0]
        replica = ClientReplica()
        replica.apply(
            ServerWelcome(
                session_id="s-test",
                last_seq=0,
                snapshot=project_state(SessionState("s-test"), viewer),
            )
        )
        state = SessionState("s-test")
        state.apply(builder.events[0])
        replica.apply(ServerEvent(seq=1, delta=render_event(builder.events[0], display_names(state), viewer)))
        with pytest.raises(ResumeRequired):
            replica.apply(ServerEvent(seq=5, delta={"type": "redacted"}))

    def test_backlog_and_snapshot_paths_converge(self):
        builder = build_session(seed=14, n_events=150, private_text="sealed")
        events = builder.events
        viewer = builder.users[1]
        cut = 70
        # client applied everything up to `cut`, then disconnected
        state, replica = fold_for_viewer(events[:cut], viewer, check_each_seq=False)
        for event in events[cut:]:
            state.apply(event)
        names = display_names(state)
        final = canonical_json(project_state(state, viewer))

        # backlog path
        plan = plan_resume(cut, state.last_seq, events)
        assert not plan.use_snapshot
        replica.apply(ServerWelcome(session_id="s-test", last_seq=state.last_seq, snapshot=None))
        for event in plan.events:
            replica.apply(ServerEvent(seq=event.seq, delta=render_event(event, names, viewer)))
        assert canonical_json(replica.view()) == final

        # snapshot path from a fresh replica
        fresh = ClientReplica()
        fresh.apply(
            ServerWelcome(
                session_id="s-test", last_seq=state.last_seq, snapshot=project_state(state, viewer)
            )
        )
        assert canonical_json(fresh.view()) == final
