"""Session events: the sole source of truth for session state.

Every state change is one immutable, sequence-numbered event. Payloads are
self-contained (ids minted at submit time are embedded), which is what
makes replay deterministic and lets old backlog events be rendered for a
viewer without consulting current state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .model import Annotation, AnnotationBody, Comment, Edit, Highlight, Like, Tag


@dataclass(frozen=True)
class ParticipantJoined:
    token: str
    display_name: str


@dataclass(frozen=True)
class ParticipantLeft:
    token: str


@dataclass(frozen=True)
class InterimUpdate:
    bubble_id: str
    speaker: str
    text: str
    t_start: float


@dataclass(frozen=True)
class UtteranceFinalized:
    bubble_id: str
    speaker: str
    text: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class AnnotationApplied:
    annotation: Annotation


@dataclass(frozen=True)
class AnnotationRemoved:
    # Carries the removed annotation's metadata so the event renders for a
    # viewer (privacy, ownership) long after the annotation left the state.
    annotation_id: str
    bubble_id: str
    author: str
    kind: str
    private: bool
    remover: str


@dataclass(frozen=True)
class BubblesHidden:
    bubble_ids: tuple[str, ...]


EventPayload = (
    ParticipantJoined
    | ParticipantLeft
    | InterimUpdate
    | UtteranceFinalized
    | AnnotationApplied
    | AnnotationRemoved
    | BubblesHidden
)

EVENT_TYPES = {
    ParticipantJoined: "participant_joined",
    ParticipantLeft: "participant_left",
    InterimUpdate: "interim_update",
    UtteranceFinalized: "utterance_finalized",
    AnnotationApplied: "annotation_applied",
    AnnotationRemoved: "annotation_removed",
    BubblesHidden: "bubbles_hidden",
}


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    wall_time: float
    payload: EventPayload

    @property
    def type(self) -> str:
        return EVENT_TYPES[type(self.payload)]


class EventCodecError(ValueError):
    pass


def canonical_json(obj: Any) -> str:
    """Stable serialization: sorted keys, no whitespace, raw unicode."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def body_to_dict(body: AnnotationBody) -> dict[str, Any]:
    if isinstance(body, Like):
        return {}
    if isinstance(body, Highlight):
        return {"color": body.color, "start": body.start, "end": body.end}
    if isinstance(body, Tag):
        return {"label": body.label}
    if isinstance(body, Comment):
        return {"text": body.text, "private": body.private}
    if isinstance(body, Edit):
        return {"new_text": body.new_text}
    raise EventCodecError(f"unknown annotation body {type(body).__name__}")


def body_from_dict(kind: str, data: dict[str, Any]) -> AnnotationBody:
    try:
        if kind == "like":
            return Like()
        if kind == "highlight":
            return Highlight(color=data["color"], start=int(data["start"]), end=int(data["end"]))
        if kind == "tag":
            return Tag(label=data["label"])
        if kind == "comment":
            return Comment(text=data["text"], private=bool(data["private"]))
        if kind == "edit":
            return Edit(new_text=data["new_text"])
    except KeyError as exc:
        raise EventCodecError(f"annotation body missing field {exc}") from None
    raise EventCodecError(f"unknown annotation kind {kind!r}")


def annotation_to_dict(ann: Annotation) -> dict[str, Any]:
    return {
        "annotation_id": ann.annotation_id,
        "bubble_id": ann.bubble_id,
        "author": ann.author,
        "kind": ann.kind,
        "body": body_to_dict(ann.body),
        "seq": ann.seq,
    }


def annotation_from_dict(data: dict[str, Any]) -> Annotation:
    try:
        return Annotation(
            annotation_id=data["annotation_id"],
            bubble_id=data["bubble_id"],
            author=data["author"],
            body=body_from_dict(data["kind"], data["body"]),
            seq=int(data["seq"]),
        )
    except KeyError as exc:
        raise EventCodecError(f"annotation missing field {exc}") from None


def payload_to_dict(payload: EventPayload) -> dict[str, Any]:
    if isinstance(payload, ParticipantJoined):
        return {"token": payload.token, "display_name": payload.display_name}
    if isinstance(payload, ParticipantLeft):
        return {"token": payload.token}
    if isinstance(payload, InterimUpdate):
        return {
            "bubble_id": payload.bubble_id,
            "speaker": payload.speaker,
            "text": payload.text,
            "t_start": payload.t_start,
        }
    if isinstance(payload, UtteranceFinalized):
        return {
            "bubble_id": payload.bubble_id,
            "speaker": payload.speaker,
            "text": payload.text,
            "t_start": payload.t_start,
            "t_end": payload.t_end,
        }
    if isinstance(payload, AnnotationApplied):
        return {"annotation": annotation_to_dict(payload.annotation)}
    if isinstance(payload, AnnotationRemoved):
        return {
            "annotation_id": payload.annotation_id,
            "bubble_id": payload.bubble_id,
            "author": payload.author,
            "kind": payload.kind,
            "private": payload.private,
            "remover": payload.remover,
        }
    if isinstance(payload, BubblesHidden):
        return {"bubble_ids": list(payload.bubble_ids)}
    raise EventCodecError(f"unknown payload {type(payload).__name__}")


def payload_from_dict(event_type: str, data: dict[str, Any]) -> EventPayload:
    try:
        if event_type == "participant_joined":
            return ParticipantJoined(token=data["token"], display_name=data["display_name"])
        if event_type == "participant_left":
            return ParticipantLeft(token=data["token"])
        if event_type == "interim_update":
            return InterimUpdate(
                bubble_id=data["bubble_id"],
                speaker=data["speaker"],
                text=data["text"],
                t_start=float(data["t_start"]),
            )
        if event_type == "utterance_finalized":
            return UtteranceFinalized(
                bubble_id=data["bubble_id"],
                speaker=data["speaker"],
                text=data["text"],
                t_start=float(data["t_start"]),
                t_end=float(data["t_end"]),
            )
        if event_type == "annotation_applied":
            return AnnotationApplied(annotation=annotation_from_dict(data["annotation"]))
        if event_type == "annotation_removed":
            return AnnotationRemoved(
                annotation_id=data["annotation_id"],
                bubble_id=data["bubble_id"],
                author=data["author"],
                kind=data["kind"],
                private=bool(data["private"]),
                remover=data["remover"],
            )
        if event_type == "bubbles_hidden":
            return BubblesHidden(bubble_ids=tuple(data["bubble_ids"]))
    except KeyError as exc:
        raise EventCodecError(f"{event_type} payload missing field {exc}") from None
    raise EventCodecError(f"unknown event type {event_type!r}")


def event_to_dict(event: SessionEvent) -> dict[str, Any]:
    return {
        "seq": event.seq,
        "wall_time": event.wall_time,
        "type": event.type,
        "data": payload_to_dict(event.payload),
    }


def event_from_dict(data: dict[str, Any]) -> SessionEvent:
    try:
        return SessionEvent(
            seq=int(data["seq"]),
            wall_time=float(data["wall_time"]),
            payload=payload_from_dict(data["type"], data["data"]),
        )
    except KeyError as exc:
        raise EventCodecError(f"event missing field {exc}") from None
