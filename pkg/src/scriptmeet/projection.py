"""Viewer-specific views of session state and events.

Two rules shape every outbound payload:
  - annotations are anonymous: likes, highlights, tags, and edits never
    carry the author's identity, only an `own` marker for the viewer's
    history panel; comments carry the author's display name
  - a private comment is only ever visible to its author; for everyone
    else the corresponding event renders as a content-free stub so the
    per-connection sequence stays gap-free

project_state() and render_event() are the server half; the client half
(folding rendered deltas back into a view) lives in protocol.ClientReplica
and must stay equivalent, which the test suite checks at every seq.
"""

from __future__ import annotations

from typing import Any, Mapping

from .events import (
    AnnotationApplied,
    AnnotationRemoved,
    BubblesHidden,
    InterimUpdate,
    ParticipantJoined,
    ParticipantLeft,
    SessionEvent,
    UtteranceFinalized,
)
from .model import Annotation, BubbleState, Comment, Edit, Highlight, Like, Tag, TranscriptBubble
from .session import SessionState

REDACTED = {"type": "redacted"}


def project_annotation(
    ann: Annotation, names: Mapping[str, str], viewer: str | None
) -> dict[str, Any] | None:
    """Viewer's view of one annotation; None when it must not be shown."""
    own = viewer is not None and ann.author == viewer
    out: dict[str, Any] = {
        "annotation_id": ann.annotation_id,
        "seq": ann.seq,
        "kind": ann.kind,
        "bubble_id": ann.bubble_id,
        "own": own,
    }
    body = ann.body
    if isinstance(body, Like):
        return out
    if isinstance(body, Highlight):
        out.update(color=body.color, start=body.start, end=body.end)
        return out
    if isinstance(body, Tag):
        out["label"] = body.label
        return out
    if isinstance(body, Comment):
        if body.private and not own:
            return None
        out.update(
            text=body.text,
            private=body.private,
            author_name=names.get(ann.author, ann.author),
        )
        return out
    if isinstance(body, Edit):
        out["new_text"] = body.new_text
        return out
    raise TypeError(f"unknown annotation body {type(body).__name__}")


def _project_bubble(
    bubble: TranscriptBubble,
    annotations: list[Annotation],
    names: Mapping[str, str],
    viewer: str | None,
    include_hidden: bool,
) -> dict[str, Any]:
    anns = []
    for ann in sorted(annotations, key=lambda a: a.seq):
        projected = project_annotation(ann, names, viewer)
        if projected is not None:
            anns.append(projected)
    out: dict[str, Any] = {
        "bubble_id": bubble.bubble_id,
        "speaker": bubble.speaker,
        "speaker_name": names.get(bubble.speaker, bubble.speaker),
        "state": bubble.state.value,
        "text": bubble.text,
        "t_start": bubble.t_start,
        "t_end": bubble.t_end,
        "own": viewer is not None and bubble.speaker == viewer,
        "annotations": anns,
    }
    if include_hidden:
        out["hidden"] = bubble.state is BubbleState.HIDDEN
    return out


def display_names(state: SessionState) -> dict[str, str]:
    return {t: p.display_name for t, p in state.participants.items()}


def project_state(
    state: SessionState, viewer: str | None, include_hidden: bool = False
) -> dict[str, Any]:
    """Self-contained viewer snapshot: what this viewer is allowed to see.

    Hidden bubbles are dropped from the live view; exports pass
    include_hidden to keep them, flagged, so nothing is silently lost.
    """
    names = display_names(state)
    return {
        "session_id": state.session_id,
        "last_seq": state.last_seq,
        "participants": [
            {"token": p.token, "display_name": p.display_name, "active": p.active}
            for _, p in sorted(state.participants.items())
        ],
        "bubbles": [
            _project_bubble(b, state.annotations_for(b.bubble_id), names, viewer, include_hidden)
            for b in state.ordered_bubbles(include_hidden=include_hidden)
        ],
    }


def render_event(
    event: SessionEvent, names: Mapping[str, str], viewer: str | None
) -> dict[str, Any]:
    """Minimal per-viewer delta for one event.

    Self-contained by construction: uses only the event payload plus the
    display-name map, so backlog events render correctly long after the
    state has moved on.
    """
    p = event.payload
    if isinstance(p, ParticipantJoined):
        return {"type": "participant_joined", "token": p.token, "display_name": p.display_name}
    if isinstance(p, ParticipantLeft):
        return {"type": "participant_left", "token": p.token}
    if isinstance(p, InterimUpdate):
        return {
            "type": "interim",
            "bubble_id": p.bubble_id,
            "speaker": p.speaker,
            "speaker_name": names.get(p.speaker, p.speaker),
            "text": p.text,
            "t_start": p.t_start,
            "own": viewer is not None and p.speaker == viewer,
        }
    if isinstance(p, UtteranceFinalized):
        return {
            "type": "finalized",
            "bubble_id": p.bubble_id,
            "speaker": p.speaker,
            "speaker_name": names.get(p.speaker, p.speaker),
            "text": p.text,
            "t_start": p.t_start,
            "t_end": p.t_end,
            "own": viewer is not None and p.speaker == viewer,
        }
    if isinstance(p, AnnotationApplied):
        projected = project_annotation(p.annotation, names, viewer)
        if projected is None:
            return dict(REDACTED)
        return {"type": "annotation", "bubble_id": p.annotation.bubble_id, "annotation": projected}
    if isinstance(p, AnnotationRemoved):
        if p.private and (viewer is None or p.author != viewer):
            return dict(REDACTED)
        return {
            "type": "annotation_removed",
            "annotation_id": p.annotation_id,
            "bubble_id": p.bubble_id,
        }
    if isinstance(p, BubblesHidden):
        return {"type": "hidden", "bubble_ids": list(p.bubble_ids)}
    raise TypeError(f"unknown payload {type(p).__name__}")
