"""Turns timed word streams into interim updates and finalized utterances.

Segmentation rule: a gap of at least silence_threshold seconds between two
consecutive tokens of the same speaker closes the open utterance and opens
a new one. Each speaker has at most one open utterance, so concurrent
speakers always land in distinct bubbles.

Sources are append-only word streams; recognizer-style hypothesis
retraction is out of scope, so interim text only grows within an utterance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .clock import Clock

DEFAULT_SILENCE_THRESHOLD = 0.7
DEFAULT_INTERIM_EMIT_INTERVAL = 0.5


class SegmentationError(Exception):
    pass


class OutOfOrderToken(SegmentationError):
    """Token timestamp precedes the speaker's latest token."""


class ParseError(SegmentationError):
    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class TimedToken:
    speaker: str
    word: str
    t: float  # seconds from session start


@dataclass(frozen=True)
class SegmenterConfig:
    silence_threshold: float = DEFAULT_SILENCE_THRESHOLD
    interim_emit_interval: float = DEFAULT_INTERIM_EMIT_INTERVAL

    def __post_init__(self) -> None:
        if self.silence_threshold <= 0:
            raise ValueError("silence_threshold must be positive")
        if self.interim_emit_interval <= 0:
            raise ValueError("interim_emit_interval must be positive")


@dataclass(frozen=True)
class SegmentInterim:
    bubble_id: str
    speaker: str
    text: str
    t_start: float


@dataclass(frozen=True)
class SegmentFinalized:
    bubble_id: str
    speaker: str
    text: str
    t_start: float
    t_end: float


SegmentEvent = SegmentInterim | SegmentFinalized


@dataclass
class _OpenUtterance:
    bubble_id: str
    words: list[str]
    t_start: float
    t_last: float
    last_emit_t: float
    last_emit_text: str = ""

    def text(self) -> str:
        return " ".join(self.words)


class Segmenter:
    """Single-threaded per-session segmenter; feed it from one ordered queue."""

    def __init__(self, config: SegmenterConfig | None = None, bubble_prefix: str = "b") -> None:
        self.config = config or SegmenterConfig()
        self._open: dict[str, _OpenUtterance] = {}
        self._last_t: dict[str, float] = {}
        self._counter = 0
        self._prefix = bubble_prefix

    def _next_bubble_id(self) -> str:
        self._counter += 1
        return f"{self._prefix}{self._counter:04d}"

    def feed(self, token: TimedToken) -> list[SegmentEvent]:
        """Consume one token; returns zero or more segment events.

        Raises OutOfOrderToken if the token is earlier than the speaker's
        previous token. Interim updates are rate-limited to
        interim_emit_interval, except that the first token of an utterance
        and the catch-up emitted at finalization always go out.
        """
        last_t = self._last_t.get(token.speaker)
        if last_t is not None and token.t < last_t:
            raise OutOfOrderToken(
                f"token at t={token.t} precedes previous t={last_t} for {token.speaker!r}"
            )
        self._last_t[token.speaker] = token.t

        events: list[SegmentEvent] = []
        utt = self._open.get(token.speaker)
        if utt is not None and token.t - utt.t_last >= self.config.silence_threshold:
            events.extend(self._close(token.speaker))
            utt = None

        if utt is None:
            utt = _OpenUtterance(
                bubble_id=self._next_bubble_id(),
                words=[token.word],
                t_start=token.t,
                t_last=token.t,
                last_emit_t=token.t,
            )
            self._open[token.speaker] = utt
            utt.last_emit_text = utt.text()
            events.append(SegmentInterim(utt.bubble_id, token.speaker, utt.last_emit_text, utt.t_start))
            return events

        utt.words.append(token.word)
        utt.t_last = token.t
        if token.t - utt.last_emit_t >= self.config.interim_emit_interval:
            utt.last_emit_t = token.t
            utt.last_emit_text = utt.text()
            events.append(SegmentInterim(utt.bubble_id, token.speaker, utt.last_emit_text, utt.t_start))
        return events

    def _finalize(self, speaker: str) -> SegmentFinalized:
        utt = self._open.pop(speaker)
        return SegmentFinalized(utt.bubble_id, speaker, utt.text(), utt.t_start, utt.t_last)

    def _catch_up_interim(self, speaker: str) -> SegmentInterim | None:
        # Last interim must equal the finalized text; emit one if it lags.
        utt = self._open[speaker]
        if utt.last_emit_text == utt.text():
            return None
        utt.last_emit_text = utt.text()
        return SegmentInterim(utt.bubble_id, speaker, utt.last_emit_text, utt.t_start)

    def _close(self, speaker: str) -> list[SegmentEvent]:
        events: list[SegmentEvent] = []
        catch_up = self._catch_up_interim(speaker)
        if catch_up is not None:
            events.append(catch_up)
        events.append(self._finalize(speaker))
        return events

    def flush(self, speaker: str) -> list[SegmentEvent]:
        """Finalize the speaker's open utterance, if any. Idempotent."""
        if speaker not in self._open:
            return []
        return self._close(speaker)

    def flush_all(self) -> list[SegmentEvent]:
        events: list[SegmentEvent] = []
        for speaker in list(self._open):
            events.extend(self._close(speaker))
        return events

    def poll(self, now: float) -> list[SegmentEvent]:
        """Finalize utterances whose trailing silence reached the threshold.

        Live sessions call this on a timer; gap detection inside feed() only
        fires when the same speaker produces another token.
        """
        events: list[SegmentEvent] = []
        for speaker, utt in list(self._open.items()):
            if now - utt.t_last >= self.config.silence_threshold:
                events.extend(self._close(speaker))
        return events

    def open_speakers(self) -> set[str]:
        return set(self._open)


def parse_script_line(line: str, line_no: int) -> TimedToken | None:
    """One script line: `speaker<TAB>t_seconds<TAB>word`. None for blanks/comments."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    parts = line.rstrip("\n").split("\t", 2)
    if len(parts) != 3:
        raise ParseError(line_no, f"expected 3 tab-separated fields, got {len(parts)}")
    speaker, t_text, word = parts
    if not speaker:
        raise ParseError(line_no, "empty speaker field")
    try:
        t = float(t_text)
    except ValueError:
        raise ParseError(line_no, f"bad timestamp {t_text!r}") from None
    if not word:
        raise ParseError(line_no, "empty word field")
    return TimedToken(speaker=speaker, word=word, t=t)


def read_script(path: str | Path) -> list[TimedToken]:
    """Parse a whole script file; raises ParseError with the offending line number."""
    tokens: list[TimedToken] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            token = parse_script_line(line, line_no)
            if token is not None:
                tokens.append(token)
    return tokens


def replay_source(
    path: str | Path, clock: Clock | None = None
) -> Iterator[TimedToken]:
    """Yield script tokens in file order, optionally paced on a clock.

    With a clock, emission of token i is delayed until the clock has
    advanced by (t_i - t_0) since the first emission, mimicking a live
    recognizer. Without one, tokens stream immediately.
    """
    tokens = read_script(path)
    if clock is None:
        yield from tokens
        return
    if not tokens:
        return
    origin = clock.now() - tokens[0].t
    for token in tokens:
        delay = (origin + token.t) - clock.now()
        if delay > 0:
            clock.sleep(delay)
        yield token
