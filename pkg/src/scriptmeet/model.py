"""Domain model for the collaborative transcript.

The unit of the transcript is a bubble: one utterance by one speaker. A
bubble starts interim (text still growing), becomes finalized (stable text
plus start/end times), and may later be hidden by expiry. Participants
attach annotations to bubbles; any annotation permanently pins its bubble
so the expiry sweep never hides it.

Everything here is transport- and storage-free. Bubbles and annotations
are frozen dataclasses; the operations are pure functions returning
updated copies, so a returned value is always a safe snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

DEFAULT_TTL_SECONDS = 180.0

HIGHLIGHT_COLORS = ("yellow", "green", "blue", "pink")


class ModelError(Exception):
    """Base for domain rule violations."""


class UnknownBubble(ModelError):
    pass


class HiddenBubble(ModelError):
    """Annotations on an already-hidden bubble are rejected."""


class InvalidRange(ModelError):
    pass


class UnknownColor(ModelError):
    pass


class EmptyTagLabel(ModelError):
    pass


class EditOnInterim(ModelError):
    """Edits are only allowed once a bubble's text has stabilized."""


class NotAnnotationAuthor(ModelError):
    pass


class EditNotRemovable(ModelError):
    """Revision history is permanent; edit annotations cannot be deleted."""


class BubbleState(str, Enum):
    INTERIM = "interim"
    FINALIZED = "finalized"
    HIDDEN = "hidden"


@dataclass(frozen=True)
class UserToken:
    """Opaque per-client identity; all attribution keys off the token."""

    token: str
    display_name: str

    def __post_init__(self) -> None:
        if not self.token:
            raise ValueError("token must be non-empty")
        if not self.display_name.strip():
            raise ValueError("display_name must be non-empty")


@dataclass(frozen=True)
class Revision:
    editor: str
    text: str
    seq: int


@dataclass(frozen=True)
class TranscriptBubble:
    """One utterance by one speaker.

    Invariants:
      - interim bubbles have no t_end and no finalized_at
      - hidden implies previously finalized with ever_interacted False
      - revisions are append-only; text equals the last revision's text
    """

    bubble_id: str
    speaker: str
    state: BubbleState
    text: str
    revisions: tuple[Revision, ...]
    t_start: float
    t_end: float | None = None
    finalized_at: float | None = None
    ever_interacted: bool = False


@dataclass(frozen=True)
class Like:
    pass


@dataclass(frozen=True)
class Highlight:
    color: str
    start: int
    end: int  # exclusive


@dataclass(frozen=True)
class Tag:
    label: str


@dataclass(frozen=True)
class Comment:
    text: str
    private: bool = False


@dataclass(frozen=True)
class Edit:
    new_text: str


AnnotationBody = Like | Highlight | Tag | Comment | Edit

KIND_LIKE = "like"
KIND_HIGHLIGHT = "highlight"
KIND_TAG = "tag"
KIND_COMMENT = "comment"
KIND_EDIT = "edit"

ANNOTATION_KINDS = (KIND_LIKE, KIND_HIGHLIGHT, KIND_COMMENT, KIND_TAG, KIND_EDIT)

_BODY_KIND = {Like: KIND_LIKE, Highlight: KIND_HIGHLIGHT, Tag: KIND_TAG, Comment: KIND_COMMENT, Edit: KIND_EDIT}


def kind_of_body(body: "AnnotationBody") -> str:
    return _BODY_KIND[type(body)]


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    bubble_id: str
    author: str
    body: AnnotationBody
    seq: int

    @property
    def kind(self) -> str:
        return _BODY_KIND[type(self.body)]


@dataclass(frozen=True)
class ExpiryPolicy:
    ttl_seconds: float = DEFAULT_TTL_SECONDS

    def __post_init__(self) -> None:
        if self.ttl_seconds <= 0:
            raise ValueError("ttl_seconds must be positive")


def new_interim_bubble(bubble_id: str, speaker: str, text: str, t_start: float) -> TranscriptBubble:
    return TranscriptBubble(
        bubble_id=bubble_id,
        speaker=speaker,
        state=BubbleState.INTERIM,
        text=text,
        revisions=(),
        t_start=t_start,
    )


def update_interim_text(bubble: TranscriptBubble, text: str) -> TranscriptBubble:
    if bubble.state is not BubbleState.INTERIM:
        raise ModelError(f"bubble {bubble.bubble_id} is not interim")
    return replace(bubble, text=text)


def finalize_bubble(
    bubble: TranscriptBubble | None,
    *,
    bubble_id: str,
    speaker: str,
    text: str,
    t_start: float,
    t_end: float,
    finalized_at: float,
    seq: int,
) -> TranscriptBubble:
    """Stabilize a bubble's text and start its expiry clock.

    Revision 0 is the as-transcribed text; the expiry clock runs from
    finalized_at, not from the first interim token. Pins acquired while
    interim are preserved.
    """
    if t_end < t_start:
        raise ModelError("t_end must not precede t_start")
    if bubble is not None and bubble.state is not BubbleState.INTERIM:
        raise ModelError(f"bubble {bubble_id} already finalized")
    ever = bubble.ever_interacted if bubble is not None else False
    return TranscriptBubble(
        bubble_id=bubble_id,
        speaker=speaker,
        state=BubbleState.FINALIZED,
        text=text,
        revisions=(Revision(editor=speaker, text=text, seq=seq),),
        t_start=t_start,
        t_end=t_end,
        finalized_at=finalized_at,
        ever_interacted=ever,
    )


def validate_annotation(bubble: TranscriptBubble, ann: Annotation) -> None:
    """Raise the matching ModelError if ann cannot be applied to bubble."""
    if bubble.state is BubbleState.HIDDEN:
        raise HiddenBubble(f"bubble {bubble.bubble_id} is hidden")
    body = ann.body
    if isinstance(body, Edit):
        if bubble.state is BubbleState.INTERIM:
            raise EditOnInterim(f"bubble {bubble.bubble_id} is still interim")
    elif isinstance(body, Highlight):
        if body.color not in HIGHLIGHT_COLORS:
            raise UnknownColor(f"{body.color!r} is not one of {HIGHLIGHT_COLORS}")
        if not (0 <= body.start < body.end <= len(bubble.text)):
            raise InvalidRange(
                f"[{body.start},{body.end}) outside text of length {len(bubble.text)}"
            )
    elif isinstance(body, Tag):
        if not body.label.strip():
            raise EmptyTagLabel("tag label is empty after trimming")


def apply_annotation(bubble: TranscriptBubble, ann: Annotation) -> TranscriptBubble:
    """Apply one annotation; returns the updated bubble.

    Any accepted annotation pins the bubble (ever_interacted); an edit also
    appends a revision and replaces the current text.
    """
    validate_annotation(bubble, ann)
    if isinstance(ann.body, Edit):
        revs = bubble.revisions + (Revision(editor=ann.author, text=ann.body.new_text, seq=ann.seq),)
        return replace(bubble, text=ann.body.new_text, revisions=revs, ever_interacted=True)
    return replace(bubble, ever_interacted=True)


def check_removal(ann: Annotation, remover: str) -> None:
    """Authors may delete their own like/highlight/tag/comment; never edits."""
    if isinstance(ann.body, Edit):
        raise EditNotRemovable(f"annotation {ann.annotation_id} is an edit")
    if ann.author != remover:
        raise NotAnnotationAuthor(f"annotation {ann.annotation_id} belongs to another author")


def hide_bubble(bubble: TranscriptBubble) -> TranscriptBubble:
    if bubble.state is BubbleState.HIDDEN:
        return bubble
    if bubble.state is not BubbleState.FINALIZED or bubble.ever_interacted:
        raise ModelError(f"bubble {bubble.bubble_id} is not eligible for hiding")
    return replace(bubble, state=BubbleState.HIDDEN)


def sweep_expiry(
    bubbles: Iterable[TranscriptBubble], now: float, policy: ExpiryPolicy
) -> set[str]:
    """Ids of exactly the finalized, never-interacted bubbles whose TTL elapsed.

    Hiding is soft: callers transition the returned ids via hide_bubble and
    keep the content in the event log. Re-sweeping hidden bubbles is a no-op.
    """
    expired: set[str] = set()
    for b in bubbles:
        if b.state is not BubbleState.FINALIZED or b.ever_interacted:
            continue
        assert b.finalized_at is not None
        if now - b.finalized_at >= policy.ttl_seconds:
            expired.add(b.bubble_id)
    return expired


def tag_counts(annotations: Iterable[Annotation]) -> dict[str, int]:
    """Live tag counts by exact label (case-sensitive)."""
    counts: dict[str, int] = {}
    for ann in annotations:
        if isinstance(ann.body, Tag):
            counts[ann.body.label] = counts.get(ann.body.label, 0) + 1
    return counts


def like_count(annotations: Iterable[Annotation]) -> int:
    return sum(1 for ann in annotations if isinstance(ann.body, Like))
