"""Authoritative per-session state machine.

State is exclusively the fold of the event log: commands are validated,
turned into exactly one gap-free sequence-numbered event, and applied.
Replaying the same log therefore reproduces the same state bit for bit
(canonical serialization), which persistence and reconnection rely on.

Concurrency contract: one writer per session. Many producers may build
commands, but a single owning loop calls submit()/tick(). Snapshots are
independent copies, safe to hand to any thread.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Any, Callable

from . import model
from .clock import Clock, VirtualClock
from .events import (
    AnnotationApplied,
    AnnotationRemoved,
    BubblesHidden,
    EventPayload,
    InterimUpdate,
    ParticipantJoined,
    ParticipantLeft,
    SessionEvent,
    UtteranceFinalized,
    annotation_to_dict,
    canonical_json,
)
from .model import Annotation, AnnotationBody, BubbleState, ExpiryPolicy, TranscriptBubble

DEFAULT_BACKLOG_WINDOW = 1000


class SessionError(Exception):
    pass


class UnknownSession(SessionError):
    pass


class EmptyName(SessionError):
    pass


class UnknownParticipant(SessionError):
    pass


class StaleReference(SessionError):
    """Command targets an entity that was deleted (or never existed)."""


class InvalidIngest(SessionError):
    """Segmenter output that contradicts the bubble lifecycle."""


@dataclass(frozen=True)
class Participant:
    token: str
    display_name: str
    active: bool = True


@dataclass(frozen=True)
class JoinCommand:
    token: str
    display_name: str


@dataclass(frozen=True)
class LeaveCommand:
    token: str


@dataclass(frozen=True)
class AnnotateCommand:
    author: str
    bubble_id: str
    body: AnnotationBody
    command_ref: str | None = None


@dataclass(frozen=True)
class RemoveAnnotationCommand:
    author: str
    annotation_id: str
    command_ref: str | None = None


@dataclass(frozen=True)
class IngestInterimCommand:
    bubble_id: str
    speaker: str
    text: str
    t_start: float


@dataclass(frozen=True)
class IngestFinalizeCommand:
    bubble_id: str
    speaker: str
    text: str
    t_start: float
    t_end: float


Command = (
    JoinCommand
    | LeaveCommand
    | AnnotateCommand
    | RemoveAnnotationCommand
    | IngestInterimCommand
    | IngestFinalizeCommand
)


class SessionState:
    """Mutable fold target; all mutation happens in apply()."""

    def __init__(self, session_id: str) -> None:
        self.session_id = session_id
        self.participants: dict[str, Participant] = {}
        self.bubbles: dict[str, TranscriptBubble] = {}
        self.annotations: dict[str, Annotation] = {}
        self.bubble_annotations: dict[str, list[str]] = {}
        self.removed_annotations: set[str] = set()
        self.last_seq = 0

    def apply(self, event: SessionEvent) -> None:
        """Fold one event into the state. Events are trusted: validation
        happened at submit time and must not be repeated here, otherwise
        replay could diverge from the live application."""
        p = event.payload
        if isinstance(p, ParticipantJoined):
            self.participants[p.token] = Participant(p.token, p.display_name, active=True)
        elif isinstance(p, ParticipantLeft):
            existing = self.participants[p.token]
            self.participants[p.token] = replace(existing, active=False)
        elif isinstance(p, InterimUpdate):
            bubble = self.bubbles.get(p.bubble_id)
            if bubble is None:
                self.bubbles[p.bubble_id] = model.new_interim_bubble(
                    p.bubble_id, p.speaker, p.text, p.t_start
                )
            else:
                self.bubbles[p.bubble_id] = model.update_interim_text(bubble, p.text)
        elif isinstance(p, UtteranceFinalized):
            self.bubbles[p.bubble_id] = model.finalize_bubble(
                self.bubbles.get(p.bubble_id),
                bubble_id=p.bubble_id,
                speaker=p.speaker,
                text=p.text,
                t_start=p.t_start,
                t_end=p.t_end,
                finalized_at=event.wall_time,
                seq=event.seq,
            )
        elif isinstance(p, AnnotationApplied):
            ann = p.annotation
            self.bubbles[ann.bubble_id] = model.apply_annotation(self.bubbles[ann.bubble_id], ann)
            self.annotations[ann.annotation_id] = ann
            self.bubble_annotations.setdefault(ann.bubble_id, []).append(ann.annotation_id)
        elif isinstance(p, AnnotationRemoved):
            self.annotations.pop(p.annotation_id)
            self.bubble_annotations[p.bubble_id].remove(p.annotation_id)
            self.removed_annotations.add(p.annotation_id)
        elif isinstance(p, BubblesHidden):
            for bid in p.bubble_ids:
                self.bubbles[bid] = model.hide_bubble(self.bubbles[bid])
        else:
            raise SessionError(f"unknown payload {type(p).__name__}")
        self.last_seq = event.seq

    def copy(self) -> "SessionState":
        # Values are frozen dataclasses, so shallow container copies suffice.
        dup = SessionState(self.session_id)
        dup.participants = dict(self.participants)
        dup.bubbles = dict(self.bubbles)
        dup.annotations = dict(self.annotations)
        dup.bubble_annotations = {k: list(v) for k, v in self.bubble_annotations.items()}
        dup.removed_annotations = set(self.removed_annotations)
        dup.last_seq = self.last_seq
        return dup

    def ordered_bubbles(self, include_hidden: bool = False) -> list[TranscriptBubble]:
        """Bubbles in transcript order: creation time, ties by id."""
        bubbles = [
            b
            for b in self.bubbles.values()
            if include_hidden or b.state is not BubbleState.HIDDEN
        ]
        bubbles.sort(key=lambda b: (b.t_start, b.bubble_id))
        return bubbles

    def annotations_for(self, bubble_id: str) -> list[Annotation]:
        return [self.annotations[aid] for aid in self.bubble_annotations.get(bubble_id, ())]

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "last_seq": self.last_seq,
            "participants": {
                t: {"display_name": p.display_name, "active": p.active}
                for t, p in self.participants.items()
            },
            "bubbles": {bid: _bubble_to_dict(b) for bid, b in self.bubbles.items()},
            "annotations": {aid: annotation_to_dict(a) for aid, a in self.annotations.items()},
            "removed_annotations": sorted(self.removed_annotations),
        }

    def canonical(self) -> str:
        return canonical_json(self.to_dict())


def _bubble_to_dict(b: TranscriptBubble) -> dict[str, Any]:
    return {
        "bubble_id": b.bubble_id,
        "speaker": b.speaker,
        "state": b.state.value,
        "text": b.text,
        "revisions": [{"editor": r.editor, "text": r.text, "seq": r.seq} for r in b.revisions],
        "t_start": b.t_start,
        "t_end": b.t_end,
        "finalized_at": b.finalized_at,
        "ever_interacted": b.ever_interacted,
    }


def replay_events(session_id: str, events: list[SessionEvent]) -> SessionState:
    state = SessionState(session_id)
    for event in events:
        if event.seq != state.last_seq + 1:
            raise SessionError(f"sequence gap: expected {state.last_seq + 1}, got {event.seq}")
        state.apply(event)
    return state


class LiveSession:
    """Wraps a SessionState with command validation, seq assignment,
    the expiry sweep, dedup of client retries, and a resume backlog."""

    def __init__(
        self,
        session_id: str,
        clock: Clock | None = None,
        policy: ExpiryPolicy | None = None,
        backlog_window: int = DEFAULT_BACKLOG_WINDOW,
        on_event: Callable[[SessionEvent], None] | None = None,
    ) -> None:
        self.state = SessionState(session_id)
        self.clock = clock or VirtualClock()
        self.policy = policy or ExpiryPolicy()
        self.backlog: deque[SessionEvent] = deque(maxlen=backlog_window)
        self.on_event = on_event
        self.created_at = self.clock.now()
        self._last_tick = float("-inf")
        self._seen_refs: dict[tuple[str, str], int] = {}

    @property
    def session_id(self) -> str:
        return self.state.session_id

    @property
    def last_seq(self) -> int:
        return self.state.last_seq

    def submit(self, command: Command) -> SessionEvent | None:
        """Validate and apply one command.

        Returns the appended event, or None when a client retry (same
        author and command_ref) was already applied. Rejections raise and
        append nothing, leaving no sequence gap.
        """
        ref = getattr(command, "command_ref", None)
        author = getattr(command, "author", None)
        if ref is not None and author is not None:
            prior = self._seen_refs.get((author, ref))
            if prior is not None:
                return None
        payload = self._validate(command)
        event = self._append(payload)
        if ref is not None and author is not None:
            self._seen_refs[(author, ref)] = event.seq
        return event

    def _validate(self, command: Command) -> EventPayload:
        state = self.state
        if isinstance(command, JoinCommand):
            if not command.display_name.strip():
                raise EmptyName("display_name is empty")
            if not command.token:
                raise SessionError("token is empty")
            return ParticipantJoined(command.token, command.display_name)
        if isinstance(command, LeaveCommand):
            if command.token not in state.participants:
                raise UnknownParticipant(command.token)
            return ParticipantLeft(command.token)
        if isinstance(command, AnnotateCommand):
            if command.author not in state.participants:
                raise UnknownParticipant(command.author)
            bubble = state.bubbles.get(command.bubble_id)
            if bubble is None:
                raise model.UnknownBubble(command.bubble_id)
            seq = state.last_seq + 1
            ann = Annotation(
                annotation_id=f"a{seq}",
                bubble_id=command.bubble_id,
                author=command.author,
                body=command.body,
                seq=seq,
            )
            model.validate_annotation(bubble, ann)
            return AnnotationApplied(ann)
        if isinstance(command, RemoveAnnotationCommand):
            if command.author not in state.participants:
                raise UnknownParticipant(command.author)
            ann = state.annotations.get(command.annotation_id)
            if ann is None:
                raise StaleReference(command.annotation_id)
            model.check_removal(ann, command.author)
            private = isinstance(ann.body, model.Comment) and ann.body.private
            return AnnotationRemoved(
                annotation_id=ann.annotation_id,
                bubble_id=ann.bubble_id,
                author=ann.author,
                kind=ann.kind,
                private=private,
                remover=command.author,
            )
        if isinstance(command, IngestInterimCommand):
            bubble = state.bubbles.get(command.bubble_id)
            if bubble is not None and (
                bubble.state is not BubbleState.INTERIM or bubble.speaker != command.speaker
            ):
                raise InvalidIngest(f"bubble {command.bubble_id} cannot take interim text")
            return InterimUpdate(command.bubble_id, command.speaker, command.text, command.t_start)
        if isinstance(command, IngestFinalizeCommand):
            bubble = state.bubbles.get(command.bubble_id)
            if bubble is not None and (
                bubble.state is not BubbleState.INTERIM or bubble.speaker != command.speaker
            ):
                raise InvalidIngest(f"bubble {command.bubble_id} cannot be finalized")
            if command.t_end < command.t_start:
                raise InvalidIngest("t_end precedes t_start")
            return UtteranceFinalized(
                command.bubble_id, command.speaker, command.text, command.t_start, command.t_end
            )
        raise SessionError(f"unknown command {type(command).__name__}")

    def _append(self, payload: EventPayload) -> SessionEvent:
        event = SessionEvent(self.state.last_seq + 1, self.clock.now(), payload)
        # Write-ahead: persist first; applying a validated event cannot fail,
        # so state never runs ahead of the durable log.
        if self.on_event is not None:
            self.on_event(event)
        self.state.apply(event)
        self.backlog.append(event)
        return event

    def tick(self, now: float | None = None) -> SessionEvent | None:
        """Run one expiry sweep; appends a single BubblesHidden event when
        anything expires. Safe to call on any cadence; time regressions are
        clamped so the sweep clock stays monotone."""
        if now is None:
            now = self.clock.now()
        now = max(now, self._last_tick)
        self._last_tick = now
        expired = model.sweep_expiry(self.state.bubbles.values(), now, self.policy)
        if not expired:
            return None
        return self._append(BubblesHidden(tuple(sorted(expired))))

    def snapshot(self) -> SessionState:
        """Independent state image tagged with last_seq; applying later
        events to it converges with the live state."""
        return self.state.copy()

    def backlog_events(self) -> list[SessionEvent]:
        return list(self.backlog)
