#!/usr/bin/env python3
"""Feed the UI's recorded command frames through the real server.

The frontend test suite writes the frames it would send for each of the
five interactions (plus the speak that creates the target bubble) to
test/out/commands.json. This script replays them verbatim over a real
/ws connection and then checks the session's event log: every command
must have produced exactly one event of the expected kind.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from scriptmeet.clock import VirtualClock
from scriptmeet.config import ServerConfig
from scriptmeet.gateway import create_app
from scriptmeet import storage


def fail(msg: str) -> int:
    print(f"FAIL: {msg}", file=sys.stderr)
    return 1


def main(argv: list[str]) -> int:
    if len(argv) != 1:
        print("usage: verify_ui_commands.py <commands.json>", file=sys.stderr)
        return 2
    payload = json.loads(Path(argv[0]).read_text(encoding="utf-8"))
    speak_frame = payload["speak"]
    annotate_frames = payload["interactions"]
    if len(annotate_frames) != 5:
        return fail(f"expected 5 interaction frames, got {len(annotate_frames)}")

    tmp = Path(argv[0]).resolve().parent / "server-data"
    clock = VirtualClock()
    config = ServerConfig(data_dir=str(tmp), tick_interval=0.02, ttl_seconds=180.0)
    app = create_app(config, clock=clock)
    with TestClient(app) as client:
        sid = client.post("/sessions").json()["session_id"]
        token = client.post(
            f"/sessions/{sid}/join", json={"display_name": "UI Tester"}
        ).json()["token"]
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"schema_version": 1, "kind": "hello", "token": token, "display_name": "UI Tester"}))
            ws.send_text(json.dumps({"schema_version": 1, "kind": "subscribe", "session_id": sid, "from_seq": 1}))
            welcome = json.loads(ws.receive_text())
            if welcome["kind"] != "welcome":
                return fail(f"expected welcome, got {welcome['kind']}")

            ws.send_text(json.dumps(speak_frame))
            frame = json.loads(ws.receive_text())
            if frame.get("delta", {}).get("type") != "interim":
                return fail(f"speak did not open a bubble: {frame}")
            clock.advance(1.0)  # trailing silence finalizes the utterance
            bubble_id = None
            while bubble_id is None:
                frame = json.loads(ws.receive_text())
                if frame.get("delta", {}).get("type") == "finalized":
                    bubble_id = frame["delta"]["bubble_id"]
            print(f"speak -> bubble {bubble_id} finalized")

            expected_kinds = []
            for command_frame in annotate_frames:
                if command_frame["command"]["bubble_id"] != bubble_id:
                    return fail(
                        f"UI built commands for {command_frame['command']['bubble_id']}, server created {bubble_id}"
                    )
                ws.send_text(json.dumps(command_frame))
                reply = json.loads(ws.receive_text())
                if reply["kind"] == "reject":
                    return fail(f"server rejected {command_frame}: {reply}")
                if reply["delta"]["type"] != "annotation":
                    return fail(f"expected annotation event, got {reply['delta']['type']}")
                if reply.get("command_ref") != command_frame["command_ref"]:
                    return fail("command_ref was not echoed to the authoring connection")
                kind = command_frame["command"]["annotation_kind"]
                if reply["delta"]["annotation"]["kind"] != kind:
                    return fail(f"kind mismatch for {kind}")
                expected_kinds.append(kind)
                print(f"{kind} -> one event (seq {reply['seq']})")

        log_path = tmp / f"{sid}{storage.LOG_SUFFIX}"
        _, events = storage.read_log(log_path)
        logged = [
            e.payload.annotation.kind for e in events if e.type == "annotation_applied"
        ]
        if logged != expected_kinds:
            return fail(f"server log has {logged}, expected {expected_kinds}")
        if sorted(set(logged)) != sorted(["like", "highlight", "comment", "tag", "edit"]):
            return fail(f"five distinct kinds expected, log has {logged}")
    print("PASS: five interactions -> five events, verified against the server log")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
