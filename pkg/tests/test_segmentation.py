"""Segmenter: silence-gap utterance splitting, flushing, script replay."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scriptmeet.clock import VirtualClock
from scriptmeet.segmentation import (
    OutOfOrderToken,
    ParseError,
    SegmentFinalized,
    SegmentInterim,
    Segmenter,
    SegmenterConfig,
    TimedToken,
    read_script,
    replay_source,
)


def split_by_gaps(tokens, threshold):
    """Independent oracle: scan one speaker's tokens and split at gaps
    >= threshold. Returns (words, t_start, t_end) per utterance."""
    utterances = []
    current: list[TimedToken] = []
    for tok in tokens:
        if current and tok.t - current[-1].t >= threshold:
            utterances.append(current)
            current = []
        current.append(tok)
    if current:
        utterances.append(current)
    return [
        (" ".join(t.word for t in u), u[0].t, u[-1].t)
        for u in utterances
    ]


def drive(tokens, config=None):
    seg = Segmenter(config or SegmenterConfig())
    events = []
    for tok in tokens:
        events.extend(seg.feed(tok))
    events.extend(seg.flush_all())
    return events


def finalized(events):
    return [e for e in events if isinstance(e, SegmentFinalized)]


def test_gap_splits_utterances():
    tokens = [
        TimedToken("amy", "hello", 0.0),
        TimedToken("amy", "world", 0.3),
        TimedToken("amy", "ok", 1.5),
    ]
    expected = split_by_gaps(tokens, 0.7)
    assert expected == [("hello world", 0.0, 0.3), ("ok", 1.5, 1.5)]
    got = [(f.text, f.t_start, f.t_end) for f in finalized(drive(tokens))]
    assert got == expected


def test_empty_stream_no_events():
    assert drive([]) == []


def test_interleaved_speakers_get_distinct_bubbles():
    # Simultaneous speech lands in different bubbles, one open per speaker.
    tokens = [
        TimedToken("amy", "we", 0.0),
        TimedToken("bob", "no", 0.1),
        TimedToken("amy", "should", 0.2),
        TimedToken("bob", "wait", 0.3),
    ]
    seg = Segmenter()
    events = []
    for tok in tokens:
        events.extend(seg.feed(tok))
    assert seg.open_speakers() == {"amy", "bob"}
    finals = finalized(seg.flush_all())
    assert {f.speaker: f.text for f in finals} == {"amy": "we should", "bob": "no wait"}
    assert len({f.bubble_id for f in finals}) == 2


def test_out_of_order_token_rejected():
    seg = Segmenter()
    seg.feed(TimedToken("amy", "b", 2.0))
    with pytest.raises(OutOfOrderToken):
        seg.feed(TimedToken("amy", "a", 1.0))
    # equal timestamps are fine (non-decreasing contract)
    seg.feed(TimedToken("amy", "c", 2.0))


def test_flush_single_token_utterance():
    seg = Segmenter()
    seg.feed(TimedToken("amy", "bye", 10.0))
    finals = finalized(seg.flush("amy"))
    assert [(f.text, f.t_start, f.t_end) for f in finals] == [("bye", 10.0, 10.0)]


def test_flush_without_open_utterance():
    assert Segmenter().flush("amy") == []


def test_flush_twice_is_idempotent():
    seg = Segmenter()
    seg.feed(TimedToken("amy", "bye", 10.0))
    assert finalized(seg.flush("amy")) != []
    assert seg.flush("amy") == []


def test_poll_finalizes_after_trailing_silence():
    seg = Segmenter(SegmenterConfig(silence_threshold=0.7))
    seg.feed(TimedToken("amy", "done", 1.0))
    assert seg.poll(1.6) == []
    finals = finalized(seg.poll(1.7))
    assert [f.text for f in finals] == ["done"]
    assert seg.poll(99.0) == []


def test_interim_rate_limit_and_first_token_emit():
    config = SegmenterConfig(silence_threshold=5.0, interim_emit_interval=0.5)
    seg = Segmenter(config)
    events = seg.feed(TimedToken("amy", "a", 0.0))
    assert [type(e) for e in events] == [SegmentInterim]
    assert seg.feed(TimedToken("amy", "b", 0.2)) == []  # inside the interval
    events = seg.feed(TimedToken("amy", "c", 0.5))
    assert [e.text for e in events] == ["a b c"]


def test_finalization_emits_catch_up_interim():
    # The last interim for an utterance must equal its finalized text even
    # when the rate limiter swallowed the latest words.
    config = SegmenterConfig(silence_threshold=1.0, interim_emit_interval=10.0)
    seg = Segmenter(config)
    events = []
    events += seg.feed(TimedToken("amy", "a", 0.0))
    events += seg.feed(TimedToken("amy", "b", 0.1))
    events += seg.flush("amy")
    interims = [e.text for e in events if isinstance(e, SegmentInterim)]
    finals = [e.text for e in events if isinstance(e, SegmentFinalized)]
    assert finals == ["a b"]
    assert interims[-1] == "a b"


def test_config_validation():
    with pytest.raises(ValueError):
        SegmenterConfig(silence_threshold=0)
    with pytest.raises(ValueError):
        SegmenterConfig(interim_emit_interval=-1)


# --- script files ---------------------------------------------------------


def test_read_script_three_lines(tmp_path):
    path = tmp_path / "demo.script"
    path.write_text(
        "# a comment line\n"
        "amy\t0.0\thello\n"
        "amy\t0.4\tworld\n"
        "\n"
        "bob\t1.0\they\n",
        encoding="utf-8",
    )
    tokens = read_script(path)
    assert tokens == [
        TimedToken("amy", "hello", 0.0),
        TimedToken("amy", "world", 0.4),
        TimedToken("bob", "hey", 1.0),
    ]


def test_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.script"
    path.write_text("amy\t0.0\thello\namy\tnotatime\tworld\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        read_script(path)
    assert err.value.line_no == 2


def test_parse_error_on_missing_fields(tmp_path):
    path = tmp_path / "bad.script"
    path.write_text("amy 0.0 hello\n", encoding="utf-8")  # spaces, not tabs
    with pytest.raises(ParseError) as err:
        read_script(path)
    assert err.value.line_no == 1


def test_replay_source_paced_on_virtual_clock(tmp_path):
    path = tmp_path / "paced.script"
    path.write_text("amy\t0.0\tone\namy\t1.0\ttwo\n", encoding="utf-8")
    clock = VirtualClock()
    emitted_at = []
    for _ in replay_source(path, clock=clock):
        emitted_at.append(clock.now())
    assert len(emitted_at) == 2
    assert emitted_at[1] - emitted_at[0] == pytest.approx(1.0, abs=1e-9)


def test_replay_source_unpaced(tmp_path):
    path = tmp_path / "plain.script"
    path.write_text("amy\t3.5\tword\n", encoding="utf-8")
    assert list(replay_source(path)) == [TimedToken("amy", "word", 3.5)]


# --- properties -----------------------------------------------------------

token_streams = st.lists(
    st.tuples(
        st.sampled_from(["amy", "bob", "cat"]),
        st.sampled_from(["hi", "so", "well", "right", "ok"]),
        st.floats(min_value=0, max_value=30),
    ),
    max_size=60,
)


def _to_tokens(raw):
    """Sort per speaker by time so the per-speaker monotonicity holds."""
    per_speaker: dict[str, list[float]] = {}
    for speaker, _, t in raw:
        per_speaker.setdefault(speaker, []).append(t)
    for times in per_speaker.values():
        times.sort()
    cursor = {s: 0 for s in per_speaker}
    tokens = []
    for speaker, word, _ in raw:
        tokens.append(TimedToken(speaker, word, per_speaker[speaker][cursor[speaker]]))
        cursor[speaker] += 1
    return tokens


@settings(max_examples=150)
@given(raw=token_streams, threshold=st.floats(min_value=0.2, max_value=3.0))
def test_partition_property(raw, threshold):
    tokens = _to_tokens(raw)
    config = SegmenterConfig(silence_threshold=threshold, interim_emit_interval=0.5)
    events = drive(tokens, config)
    finals = finalized(events)
    for speaker in {t.speaker for t in tokens}:
        speaker_tokens = [t for t in tokens if t.speaker == speaker]
        expected = split_by_gaps(speaker_tokens, threshold)
        got = [(f.text, f.t_start, f.t_end) for f in finals if f.speaker == speaker]
        assert got == expected
        # concatenation reproduces the stream, no token in two utterances
        assert " ".join(w for w, _, _ in expected).split() == [t.word for t in speaker_tokens]


@settings(max_examples=150)
@given(raw=token_streams, threshold=st.floats(min_value=0.2, max_value=3.0))
def test_threshold_soundness_and_interim_convergence(raw, threshold):
    tokens = _to_tokens(raw)
    config = SegmenterConfig(silence_threshold=threshold, interim_emit_interval=0.4)
    seg = Segmenter(config)
    last_interim: dict[str, str] = {}
    finals = []
    for tok in tokens:
        for event in seg.feed(tok):
            if isinstance(event, SegmentInterim):
                last_interim[event.bubble_id] = event.text
            else:
                finals.append(event)
    for event in seg.flush_all():
        if isinstance(event, SegmentInterim):
            last_interim[event.bubble_id] = event.text
        else:
            finals.append(event)
    by_speaker: dict[str, list[TimedToken]] = {}
    for tok in tokens:
        by_speaker.setdefault(tok.speaker, []).append(tok)
    for f in finals:
        # no internal gap >= threshold
        times = [t.t for t in by_speaker[f.speaker] if f.t_start <= t.t <= f.t_end]
        for a, b in zip(times, times[1:]):
            assert b - a < threshold
        # the last interim text equals the finalized text
        assert last_interim[f.bubble_id] == f.text
