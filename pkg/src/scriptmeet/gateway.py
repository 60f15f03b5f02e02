"""Process entry point: session lifecycle over HTTP, live traffic over /ws.

Concurrency layout: every connection gets a reader (the endpoint coroutine)
and a writer task draining its outbox; every session has one consumer task
applying commands in arrival order, so command application is serialized
per session by construction. A ticker per session drives the expiry sweep
and trailing-silence finalization. Everything runs on one asyncio loop;
the only cross-thread access is VirtualClock, which locks internally.
"""

from __future__ import annotations

import asyncio
import logging
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from . import protocol, storage
from .clock import Clock, WallClock
from .config import ServerConfig, ensure_writable_data_dir
from .events import SessionEvent
from .model import ExpiryPolicy
from .projection import display_names, project_state, render_event
from .protocol import (
    ClientCommand,
    ClientHello,
    ClientPing,
    ClientSubscribe,
    CommandAnnotate,
    CommandLeave,
    CommandRemoveAnnotation,
    CommandSpeak,
    DecodeError,
    ServerEvent,
    ServerPong,
    ServerReject,
    ServerWelcome,
    plan_resume,
)
from .segmentation import Segmenter, SegmenterConfig, SegmentFinalized, TimedToken
from .session import (
    AnnotateCommand,
    Command,
    JoinCommand,
    LeaveCommand,
    LiveSession,
    RemoveAnnotationCommand,
    IngestFinalizeCommand,
    IngestInterimCommand,
    SessionError,
)

logger = logging.getLogger(__name__)

SNAPSHOT_EVERY = 500


class StorageUnavailable(Exception):
    pass


@dataclass
class Subscriber:
    token: str
    outbox: asyncio.Queue


@dataclass
class _Job:
    kind: str  # "command" | "speak" | "tick"
    payload: Any = None
    author: str | None = None
    origin: int | None = None  # connection id, for command_ref echo
    command_ref: str | None = None
    future: asyncio.Future | None = None


class SessionRuntime:
    """Owns one session: its state machine, log, segmenter, and fanout."""

    def __init__(self, session_id: str, config: ServerConfig, clock: Clock, data_dir: Path) -> None:
        self.session_id = session_id
        self.config = config
        self.clock = clock
        self.log_path = data_dir / f"{session_id}{storage.LOG_SUFFIX}"
        self.snapshot_path = data_dir / f"{session_id}{storage.SNAPSHOT_SUFFIX}"
        self.writer = storage.EventLogWriter(self.log_path, session_id, created_at=clock.now())
        self.live = LiveSession(
            session_id,
            clock=clock,
            policy=ExpiryPolicy(ttl_seconds=config.ttl_seconds),
            backlog_window=config.backlog_window,
            on_event=self._persist,
        )
        self.segmenter = Segmenter(SegmenterConfig(silence_threshold=config.silence_threshold))
        self.epoch = clock.now()
        self.queue: asyncio.Queue[_Job] = asyncio.Queue()
        self.subscribers: dict[int, Subscriber] = {}
        self._since_snapshot = 0
        self._tasks: list[asyncio.Task] = []

    def start(self) -> None:
        self._tasks = [
            asyncio.create_task(self._consume(), name=f"session-{self.session_id}"),
            asyncio.create_task(self._tick_forever(), name=f"ticker-{self.session_id}"),
        ]

    async def stop(self) -> None:
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            try:
                await task
            except (asyncio.CancelledError, Exception):
                pass
        self.writer.close()

    def _persist(self, event: SessionEvent) -> None:
        self.writer.append(event)
        self._since_snapshot += 1
        if self._since_snapshot >= SNAPSHOT_EVERY:
            self._since_snapshot = 0
            try:
                storage.write_snapshot(self.snapshot_path, self.live.state)
            except storage.StorageError:
                logger.warning("snapshot write failed for %s", self.session_id, exc_info=True)

    # --- single-writer loop ------------------------------------------

    async def _consume(self) -> None:
        while True:
            job = await self.queue.get()
            try:
                self._handle(job)
            except Exception as exc:
                if job.future is not None and not job.future.done():
                    job.future.set_exception(exc)
                else:
                    logger.exception("unhandled error in session %s", self.session_id)

    def _handle(self, job: _Job) -> None:
        if job.kind == "command":
            event = self.live.submit(job.payload)
            if event is not None:
                self._broadcast(event, origin=job.origin, command_ref=job.command_ref)
            if job.future is not None:
                job.future.set_result(event)
        elif job.kind == "speak":
            self._handle_speak(job)
        elif job.kind == "tick":
            self._handle_tick(job.payload)
        else:
            raise SessionError(f"unknown job {job.kind}")

    def _handle_speak(self, job: _Job) -> None:
        words = str(job.payload).split()
        t = self.clock.now() - self.epoch
        seg_events = []
        for word in words:
            seg_events.extend(self.segmenter.feed(TimedToken(job.author or "", word, t)))
        applied = []
        for seg in seg_events:
            applied.append(self._apply_segment(seg, origin=job.origin, command_ref=job.command_ref))
        if job.future is not None:
            job.future.set_result(applied)

    def _apply_segment(self, seg, origin=None, command_ref=None) -> SessionEvent | None:
        if isinstance(seg, SegmentFinalized):
            cmd: Command = IngestFinalizeCommand(seg.bubble_id, seg.speaker, seg.text, seg.t_start, seg.t_end)
        else:
            cmd = IngestInterimCommand(seg.bubble_id, seg.speaker, seg.text, seg.t_start)
        event = self.live.submit(cmd)
        if event is not None:
            self._broadcast(event, origin=origin, command_ref=command_ref)
        return event

    def _handle_tick(self, now: float) -> None:
        for seg in self.segmenter.poll(now - self.epoch):
            self._apply_segment(seg)
        event = self.live.tick(now)
        if event is not None:
            self._broadcast(event)

    async def _tick_forever(self) -> None:
        while True:
            await asyncio.sleep(self.config.tick_interval)
            self.queue.put_nowait(_Job(kind="tick", payload=self.clock.now()))

    def _broadcast(self, event: SessionEvent, origin: int | None = None, command_ref: str | None = None) -> None:
        names = display_names(self.live.state)
        for conn_id, sub in self.subscribers.items():
            delta = render_event(event, names, sub.token)
            ref = command_ref if origin is not None and conn_id == origin else None
            sub.outbox.put_nowait(ServerEvent(seq=event.seq, delta=delta, command_ref=ref))

    # --- entry points for handlers -----------------------------------

    async def run_command(
        self,
        command: Command,
        origin: int | None = None,
        command_ref: str | None = None,
    ) -> SessionEvent | None:
        future = asyncio.get_running_loop().create_future()
        self.queue.put_nowait(
            _Job(kind="command", payload=command, origin=origin, command_ref=command_ref, future=future)
        )
        return await future

    async def run_speak(
        self, author: str, text: str, origin: int | None = None, command_ref: str | None = None
    ) -> list[SessionEvent | None]:
        future = asyncio.get_running_loop().create_future()
        self.queue.put_nowait(
            _Job(
                kind="speak",
                payload=text,
                author=author,
                origin=origin,
                command_ref=command_ref,
                future=future,
            )
        )
        return await future

    def subscribe(self, conn_id: int, token: str, from_seq: int, outbox: asyncio.Queue) -> None:
        """Attach a connection and queue its welcome and missed events.

        Runs without awaits, so it is atomic against the session loop: the
        subscriber sees either the snapshot/backlog or the live broadcast
        for every seq, never both and never neither.
        """
        plan = plan_resume(from_seq, self.live.last_seq, self.live.backlog_events())
        snapshot = None
        if plan.use_snapshot:
            snapshot = project_state(self.live.state, token)
        outbox.put_nowait(
            ServerWelcome(session_id=self.session_id, last_seq=self.live.last_seq, snapshot=snapshot)
        )
        names = display_names(self.live.state)
        for event in plan.events:
            outbox.put_nowait(ServerEvent(seq=event.seq, delta=render_event(event, names, token)))
        self.subscribers[conn_id] = Subscriber(token=token, outbox=outbox)

    def unsubscribe(self, conn_id: int) -> None:
        self.subscribers.pop(conn_id, None)

    def is_participant(self, token: str) -> bool:
        return token in self.live.state.participants


class SessionRegistry:
    def __init__(self, config: ServerConfig, clock: Clock) -> None:
        self.config = config
        self.clock = clock
        self.sessions: dict[str, SessionRuntime] = {}
        self.data_dir = Path(config.data_dir)

    def create(self) -> SessionRuntime:
        session_id = uuid.uuid4().hex[:12]
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            runtime = SessionRuntime(session_id, self.config, self.clock, self.data_dir)
        except (OSError, storage.IoFailure) as exc:
            raise StorageUnavailable(str(exc)) from exc
        runtime.start()
        self.sessions[session_id] = runtime
        return runtime

    def get(self, session_id: str) -> SessionRuntime | None:
        return self.sessions.get(session_id)

    async def close_all(self) -> None:
        for runtime in self.sessions.values():
            await runtime.stop()


def create_app(config: ServerConfig | None = None, clock: Clock | None = None, static_dir: str | Path | None = None) -> FastAPI:
    """Build the ASGI app. Tests inject a VirtualClock and a short tick
    interval to drive three-minute behavior in milliseconds."""
    config = config or ServerConfig()
    clock = clock or WallClock()
    ensure_writable_data_dir(config)
    registry = SessionRegistry(config, clock)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        await registry.close_all()

    app = FastAPI(title="scriptmeet", lifespan=lifespan)
    app.state.registry = registry
    app.state.clock = clock

    @app.post("/sessions")
    async def create_session(request: Request) -> JSONResponse:
        try:
            runtime = registry.create()
        except StorageUnavailable as exc:
            return JSONResponse({"error": "storage_unavailable", "message": str(exc)}, status_code=503)
        join_url = f"{str(request.base_url).rstrip('/')}/?session={runtime.session_id}"
        return JSONResponse(
            {"session_id": runtime.session_id, "join_url": join_url}, status_code=201
        )

    @app.post("/sessions/{session_id}/join")
    async def join_session(session_id: str, body: dict) -> JSONResponse:
        runtime = registry.get(session_id)
        if runtime is None:
            return JSONResponse({"error": "unknown_session"}, status_code=404)
        display_name = str(body.get("display_name", ""))
        token = uuid.uuid4().hex
        try:
            await runtime.run_command(JoinCommand(token=token, display_name=display_name))
        except SessionError as exc:
            return JSONResponse(
                {"error": protocol.error_code_for(exc), "message": str(exc)}, status_code=400
            )
        return JSONResponse(
            {"session_id": session_id, "token": token, "display_name": display_name}, status_code=201
        )

    @app.get("/sessions/{session_id}/export")
    async def export_session(session_id: str, format: str = "text", viewer: str | None = None):
        runtime = registry.get(session_id)
        if runtime is None:
            return JSONResponse({"error": "unknown_session"}, status_code=404)
        if format not in storage.EXPORT_FORMATS:
            return JSONResponse({"error": "unknown_format"}, status_code=400)
        state = runtime.live.snapshot()
        if format == "text":
            return PlainTextResponse(storage.export_text(runtime.writer.header, state))
        return Response(
            storage.export_json(runtime.writer.header, state, viewer),
            media_type="application/json",
        )

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        conn_id = id(ws)
        outbox: asyncio.Queue = asyncio.Queue()
        hello: ClientHello | None = None
        runtime: SessionRuntime | None = None

        async def write_loop() -> None:
            while True:
                msg = await outbox.get()
                await ws.send_text(protocol.encode(msg))

        writer = asyncio.create_task(write_loop())
        try:
            while True:
                frame = await ws.receive_text()
                try:
                    msg = protocol.decode(frame)
                except DecodeError as exc:
                    outbox.put_nowait(ServerReject(None, "decode_error", str(exc)))
                    continue

                if isinstance(msg, ClientPing):
                    outbox.put_nowait(ServerPong())
                elif isinstance(msg, ClientHello):
                    if hello is not None:
                        outbox.put_nowait(
                            ServerReject(None, "protocol_error", "hello already received")
                        )
                    else:
                        hello = msg
                elif isinstance(msg, ClientSubscribe):
                    if hello is None:
                        outbox.put_nowait(ServerReject(None, "protocol_error", "hello required"))
                        continue
                    target = registry.get(msg.session_id)
                    if target is None:
                        outbox.put_nowait(ServerReject(None, "unknown_session", msg.session_id))
                        continue
                    if not target.is_participant(hello.token):
                        outbox.put_nowait(
                            ServerReject(None, "unknown_participant", "join over HTTP first")
                        )
                        continue
                    if msg.from_seq < 0:
                        outbox.put_nowait(ServerReject(None, "protocol_error", "from_seq < 0"))
                        continue
                    if runtime is not None:
                        runtime.unsubscribe(conn_id)
                    runtime = target
                    runtime.subscribe(conn_id, hello.token, msg.from_seq, outbox)
                elif isinstance(msg, ClientCommand):
                    if hello is None or runtime is None:
                        outbox.put_nowait(
                            ServerReject(msg.command_ref, "protocol_error", "subscribe first")
                        )
                        continue
                    await _dispatch_command(runtime, hello.token, conn_id, msg, outbox)
        except WebSocketDisconnect:
            pass
        finally:
            writer.cancel()
            if runtime is not None:
                runtime.unsubscribe(conn_id)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app


async def _dispatch_command(
    runtime: SessionRuntime,
    token: str,
    conn_id: int,
    msg: ClientCommand,
    outbox: asyncio.Queue,
) -> None:
    cmd = msg.command
    try:
        if isinstance(cmd, CommandSpeak):
            await runtime.run_speak(token, cmd.text, origin=conn_id, command_ref=msg.command_ref)
        elif isinstance(cmd, CommandAnnotate):
            await runtime.run_command(
                AnnotateCommand(
                    author=token,
                    bubble_id=cmd.bubble_id,
                    body=cmd.body,
                    command_ref=msg.command_ref,
                ),
                origin=conn_id,
                command_ref=msg.command_ref,
            )
        elif isinstance(cmd, CommandRemoveAnnotation):
            await runtime.run_command(
                RemoveAnnotationCommand(
                    author=token, annotation_id=cmd.annotation_id, command_ref=msg.command_ref
                ),
                origin=conn_id,
                command_ref=msg.command_ref,
            )
        elif isinstance(cmd, CommandLeave):
            await runtime.run_command(LeaveCommand(token=token), origin=conn_id, command_ref=msg.command_ref)
        else:
            outbox.put_nowait(ServerReject(msg.command_ref, "protocol_error", "unknown command"))
    except Exception as exc:
        # Rejections are per-command; the connection stays up.
        outbox.put_nowait(ServerReject(msg.command_ref, protocol.error_code_for(exc), str(exc)))
