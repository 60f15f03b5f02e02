"""Wire contract between server and clients.

Frames are UTF-8 JSON, one message per WebSocket text frame, versioned by
a top-level schema_version integer (currently 1). Unknown fields in
received frames are ignored for forward compatibility; unknown kinds and
wrong versions are decode errors. A malformed frame never takes the
connection down: the caller answers with a reject and keeps reading.

The machine-readable schema lives at docs/ws_protocol_v1.schema.json.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Sequence

from . import model, session
from .events import SessionEvent, body_from_dict, body_to_dict, EventCodecError
from .model import AnnotationBody

SCHEMA_VERSION = 1


class DecodeError(Exception):
    def __init__(self, position: int, reason: str) -> None:
        super().__init__(f"at {position}: {reason}")
        self.position = position
        self.reason = reason


# --- client -> server ---------------------------------------------------


@dataclass(frozen=True)
class ClientHello:
    token: str
    display_name: str


@dataclass(frozen=True)
class ClientSubscribe:
    session_id: str
    from_seq: int


@dataclass(frozen=True)
class CommandSpeak:
    text: str


@dataclass(frozen=True)
class CommandAnnotate:
    bubble_id: str
    body: AnnotationBody


@dataclass(frozen=True)
class CommandRemoveAnnotation:
    annotation_id: str


@dataclass(frozen=True)
class CommandLeave:
    pass


CommandPayload = CommandSpeak | CommandAnnotate | CommandRemoveAnnotation | CommandLeave


@dataclass(frozen=True)
class ClientCommand:
    command: CommandPayload
    command_ref: str | None = None


@dataclass(frozen=True)
class ClientPing:
    pass


ClientMessage = ClientHello | ClientSubscribe | ClientCommand | ClientPing


# --- server -> client ---------------------------------------------------


@dataclass(frozen=True)
class ServerWelcome:
    session_id: str
    last_seq: int
    # None on the backlog path: the client keeps its state and applies the
    # events that follow; a dict is a full viewer snapshot to reset from.
    snapshot: dict[str, Any] | None = None


@dataclass(frozen=True)
class ServerEvent:
    seq: int
    delta: dict[str, Any]
    # Echoed only on the authoring connection so optimistic UI can reconcile.
    command_ref: str | None = None


@dataclass(frozen=True)
class ServerReject:
    command_ref: str | None
    error_code: str
    message: str


@dataclass(frozen=True)
class ServerPong:
    pass


ServerMessage = ServerWelcome | ServerEvent | ServerReject | ServerPong

Message = ClientMessage | ServerMessage

# Wire error codes for per-command rejections.
ERROR_CODES: dict[type[Exception], str] = {
    model.UnknownBubble: "unknown_bubble",
    model.HiddenBubble: "hidden_bubble",
    model.InvalidRange: "invalid_range",
    model.UnknownColor: "unknown_color",
    model.EmptyTagLabel: "empty_tag_label",
    model.EditOnInterim: "edit_on_interim",
    model.NotAnnotationAuthor: "not_annotation_author",
    model.EditNotRemovable: "edit_not_removable",
    session.UnknownSession: "unknown_session",
    session.EmptyName: "empty_name",
    session.UnknownParticipant: "unknown_participant",
    session.StaleReference: "stale_reference",
    session.InvalidIngest: "invalid_ingest",
}


def error_code_for(exc: Exception) -> str:
    for klass, code in ERROR_CODES.items():
        if isinstance(exc, klass):
            return code
    return "internal_error"


# --- encode -------------------------------------------------------------


def encode(msg: Message) -> str:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if isinstance(msg, ClientHello):
        out.update(kind="hello", token=msg.token, display_name=msg.display_name)
    elif isinstance(msg, ClientSubscribe):
        out.update(kind="subscribe", session_id=msg.session_id, from_seq=msg.from_seq)
    elif isinstance(msg, ClientCommand):
        out.update(kind="command", command=_command_to_dict(msg.command))
        if msg.command_ref is not None:
            out["command_ref"] = msg.command_ref
    elif isinstance(msg, ClientPing):
        out["kind"] = "ping"
    elif isinstance(msg, ServerWelcome):
        out.update(
            kind="welcome",
            session_id=msg.session_id,
            last_seq=msg.last_seq,
            snapshot=msg.snapshot,
        )
    elif isinstance(msg, ServerEvent):
        out.update(kind="event", seq=msg.seq, delta=msg.delta)
        if msg.command_ref is not None:
            out["command_ref"] = msg.command_ref
    elif isinstance(msg, ServerReject):
        out.update(
            kind="reject",
            command_ref=msg.command_ref,
            error_code=msg.error_code,
            message=msg.message,
        )
    elif isinstance(msg, ServerPong):
        out["kind"] = "pong"
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    return json.dumps(out, ensure_ascii=False)


def _command_to_dict(cmd: CommandPayload) -> dict[str, Any]:
    if isinstance(cmd, CommandSpeak):
        return {"type": "speak", "text": cmd.text}
    if isinstance(cmd, CommandAnnotate):
        return {
            "type": "annotate",
            "bubble_id": cmd.bubble_id,
            "annotation_kind": model.kind_of_body(cmd.body),
            "body": body_to_dict(cmd.body),
        }
    if isinstance(cmd, CommandRemoveAnnotation):
        return {"type": "remove_annotation", "annotation_id": cmd.annotation_id}
    if isinstance(cmd, CommandLeave):
        return {"type": "leave"}
    raise TypeError(f"cannot encode command {type(cmd).__name__}")


# --- decode -------------------------------------------------------------


def decode(frame: str | bytes) -> Message:
    """Parse one frame; raises DecodeError and nothing else on bad input."""
    if isinstance(frame, bytes):
        try:
            frame = frame.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(exc.start, "invalid utf-8") from None
    try:
        data = json.loads(frame)
    except json.JSONDecodeError as exc:
        raise DecodeError(exc.pos, exc.msg) from None
    if not isinstance(data, dict):
        raise DecodeError(0, "frame is not a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DecodeError(0, f"unsupported schema_version {version!r}")
    kind = data.get("kind")
    try:
        if kind == "hello":
            return ClientHello(token=_str(data, "token"), display_name=_str(data, "display_name"))
        if kind == "subscribe":
            return ClientSubscribe(
                session_id=_str(data, "session_id"), from_seq=_int(data, "from_seq")
            )
        if kind == "command":
            ref = data.get("command_ref")
            if ref is not None and not isinstance(ref, str):
                raise DecodeError(0, "command_ref must be a string")
            return ClientCommand(command=_command_from_dict(data.get("command")), command_ref=ref)
        if kind == "ping":
            return ClientPing()
        if kind == "welcome":
            snapshot = data.get("snapshot")
            if snapshot is not None and not isinstance(snapshot, dict):
                raise DecodeError(0, "snapshot must be an object or null")
            return ServerWelcome(
                session_id=_str(data, "session_id"),
                last_seq=_int(data, "last_seq"),
                snapshot=snapshot,
            )
        if kind == "event":
            delta = data.get("delta")
            if not isinstance(delta, dict):
                raise DecodeError(0, "delta must be an object")
            ref = data.get("command_ref")
            if ref is not None and not isinstance(ref, str):
                raise DecodeError(0, "command_ref must be a string")
            return ServerEvent(seq=_int(data, "seq"), delta=delta, command_ref=ref)
        if kind == "reject":
            ref = data.get("command_ref")
            if ref is not None and not isinstance(ref, str):
                raise DecodeError(0, "command_ref must be a string")
            return ServerReject(
                command_ref=ref,
                error_code=_str(data, "error_code"),
                message=_str(data, "message"),
            )
        if kind == "pong":
            return ServerPong()
    except DecodeError:
        raise
    except (EventCodecError, ValueError, TypeError) as exc:
        raise DecodeError(0, str(exc)) from None
    raise DecodeError(0, f"unknown message kind {kind!r}")


def _str(data: dict[str, Any], key: str) -> str:
    value = data.get(key)
    if not isinstance(value, str):
        raise DecodeError(0, f"{key} must be a string")
    return value


def _int(data: dict[str, Any], key: str) -> int:
    value = data.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise DecodeError(0, f"{key} must be an integer")
    return value


def _command_from_dict(data: Any) -> CommandPayload:
    if not isinstance(data, dict):
        raise DecodeError(0, "command must be an object")
    ctype = data.get("type")
    if ctype == "speak":
        return CommandSpeak(text=_str(data, "text"))
    if ctype == "annotate":
        kind = _str(data, "annotation_kind")
        body_data = data.get("body")
        if not isinstance(body_data, dict):
            raise DecodeError(0, "annotation body must be an object")
        body = body_from_dict(kind, body_data)
        if isinstance(body, model.Highlight) and body.color not in model.HIGHLIGHT_COLORS:
            raise DecodeError(0, f"unknown highlight color {body.color!r}")
        return CommandAnnotate(bubble_id=_str(data, "bubble_id"), body=body)
    if ctype == "remove_annotation":
        return CommandRemoveAnnotation(annotation_id=_str(data, "annotation_id"))
    if ctype == "leave":
        return CommandLeave()
    raise DecodeError(0, f"unknown command type {ctype!r}")


# --- reconnection -------------------------------------------------------


@dataclass(frozen=True)
class ResumePlan:
    """What to send a subscriber that claims to have applied from_seq.

    Backlog path: snapshot stays None and `events` carries exactly
    from_seq+1 .. last_seq. Snapshot path: the caller attaches a fresh
    viewer snapshot and `events` is empty. Either path converges the
    client to last_seq.
    """

    use_snapshot: bool
    events: tuple[SessionEvent, ...] = ()


def plan_resume(from_seq: int, last_seq: int, backlog: Sequence[SessionEvent]) -> ResumePlan:
    if from_seq < 0:
        raise ValueError("from_seq must be >= 0")
    if from_seq > last_seq:
        # Client is ahead of us (stale session id reuse?): resync via snapshot.
        return ResumePlan(use_snapshot=True)
    if from_seq == last_seq:
        return ResumePlan(use_snapshot=False)
    if not backlog or backlog[0].seq > from_seq + 1:
        return ResumePlan(use_snapshot=True)
    missed = tuple(e for e in backlog if e.seq > from_seq)
    return ResumePlan(use_snapshot=False, events=missed)


# --- reference client ---------------------------------------------------


class ResumeRequired(Exception):
    """Raised on a sequence gap; the client should re-subscribe."""


class ClientReplica:
    """Client-side fold of Welcome/Event messages into a viewer state.

    This is the reference implementation of the client contract: applying
    a Welcome then every Event reproduces the server's viewer projection
    at every seq. Duplicate events (seq already applied) are no-ops.
    """

    def __init__(self) -> None:
        self.session_id: str | None = None
        self.last_seq = 0
        self.participants: dict[str, dict[str, Any]] = {}
        self.bubbles: dict[str, dict[str, Any]] = {}

    def apply(self, msg: ServerMessage) -> None:
        if isinstance(msg, ServerWelcome):
            self._apply_welcome(msg)
        elif isinstance(msg, ServerEvent):
            self._apply_event(msg)

    def _apply_welcome(self, msg: ServerWelcome) -> None:
        self.session_id = msg.session_id
        if msg.snapshot is None:
            return
        self.participants = {
            p["token"]: {"display_name": p["display_name"], "active": p["active"]}
            for p in msg.snapshot["participants"]
        }
        self.bubbles = {}
        for bubble in msg.snapshot["bubbles"]:
            entry = dict(bubble)
            entry["annotations"] = {a["annotation_id"]: dict(a) for a in bubble["annotations"]}
            self.bubbles[bubble["bubble_id"]] = entry
        self.last_seq = msg.snapshot["last_seq"]

    def _apply_event(self, msg: ServerEvent) -> None:
        if msg.seq <= self.last_seq:
            return  # duplicate delivery
        if msg.seq != self.last_seq + 1:
            raise ResumeRequired(f"expected seq {self.last_seq + 1}, got {msg.seq}")
        delta = msg.delta
        dtype = delta["type"]
        if dtype == "participant_joined":
            self.participants[delta["token"]] = {
                "display_name": delta["display_name"],
                "active": True,
            }
        elif dtype == "participant_left":
            self.participants[delta["token"]]["active"] = False
        elif dtype in ("interim", "finalized"):
            bubble = self.bubbles.get(delta["bubble_id"])
            if bubble is None:
                bubble = {
                    "bubble_id": delta["bubble_id"],
                    "speaker": delta["speaker"],
                    "speaker_name": delta["speaker_name"],
                    "state": "interim",
                    "text": "",
                    "t_start": delta["t_start"],
                    "t_end": None,
                    "own": delta["own"],
                    "annotations": {},
                }
                self.bubbles[delta["bubble_id"]] = bubble
            bubble["text"] = delta["text"]
            if dtype == "finalized":
                bubble["state"] = "finalized"
                bubble["t_end"] = delta["t_end"]
        elif dtype == "annotation":
            ann = dict(delta["annotation"])
            bubble = self.bubbles[delta["bubble_id"]]
            bubble["annotations"][ann["annotation_id"]] = ann
            if ann["kind"] == "edit":
                bubble["text"] = ann["new_text"]
        elif dtype == "annotation_removed":
            self.bubbles[delta["bubble_id"]]["annotations"].pop(delta["annotation_id"], None)
        elif dtype == "hidden":
            for bid in delta["bubble_ids"]:
                self.bubbles.pop(bid, None)
        elif dtype == "redacted":
            pass  # content withheld from this viewer; seq still advances
        else:
            raise ResumeRequired(f"unknown delta type {dtype!r}")
        self.last_seq = msg.seq

    def view(self) -> dict[str, Any]:
        """Same shape as projection.project_state for equivalence checks."""
        bubbles = sorted(self.bubbles.values(), key=lambda b: (b["t_start"], b["bubble_id"]))
        return {
            "session_id": self.session_id,
            "last_seq": self.last_seq,
            "participants": [
                {"token": t, "display_name": p["display_name"], "active": p["active"]}
                for t, p in sorted(self.participants.items())
            ],
            "bubbles": [
                {
                    "bubble_id": b["bubble_id"],
                    "speaker": b["speaker"],
                    "speaker_name": b["speaker_name"],
                    "state": b["state"],
                    "text": b["text"],
                    "t_start": b["t_start"],
                    "t_end": b["t_end"],
                    "own": b["own"],
                    "annotations": sorted(b["annotations"].values(), key=lambda a: a["seq"]),
                }
                for b in bubbles
            ],
        }
