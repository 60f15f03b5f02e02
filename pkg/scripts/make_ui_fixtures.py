#!/usr/bin/env python3
"""Record randomized session streams as frontend test fixtures.

Each fixture carries, for one viewer: the initial welcome (empty
snapshot), every event frame exactly as the server renders it, a final
welcome whose snapshot was taken at last_seq, and the reference client's
final view. The frontend store must fold the stream to the same view.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "tests"))

from generators import build_session  # noqa: E402
from scriptmeet.projection import display_names, project_state, render_event  # noqa: E402
from scriptmeet.protocol import ClientReplica, ServerEvent, ServerWelcome, encode  # noqa: E402
from scriptmeet.session import SessionState  # noqa: E402


def record(seed: int, n_events: int, viewer_index: int) -> dict:
    builder = build_session(seed=seed, n_events=n_events, private_text="PRIV!fx")
    viewer = builder.users[viewer_index % len(builder.users)]
    state = SessionState("s-test")
    replica = ClientReplica()

    welcome0 = ServerWelcome("s-test", 0, snapshot=project_state(state, viewer))
    replica.apply(welcome0)
    frames = []
    for event in builder.events:
        state.apply(event)
        delta = render_event(event, display_names(state), viewer)
        msg = ServerEvent(seq=event.seq, delta=delta)
        replica.apply(msg)
        frames.append(json.loads(encode(msg)))
    final_welcome = ServerWelcome("s-test", state.last_seq, snapshot=project_state(state, viewer))
    return {
        "seed": seed,
        "viewer": viewer,
        "welcome0": json.loads(encode(welcome0)),
        "events": frames,
        "final_welcome": json.loads(encode(final_welcome)),
        "final_view": replica.view(),
    }


def main() -> int:
    out_dir = REPO / "frontend" / "test" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(20):
        fixture = record(seed=8100 + i, n_events=40 + 13 * i, viewer_index=i)
        path = out_dir / f"stream_{i:02d}.json"
        path.write_text(json.dumps(fixture, ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"wrote {path.relative_to(REPO)} ({len(fixture['events'])} events)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
