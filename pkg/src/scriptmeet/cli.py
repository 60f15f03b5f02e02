"""Command line interface.

Subcommands: serve, replay, metrics, usage, slices, export. Everything but
serve is read-only over a stored event log. Exit codes: 0 on success, 2 on
usage errors (argparse's convention), 1 on data errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import analytics, storage
from .config import ConfigError, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scriptmeet")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the collaboration server")
    serve.add_argument("--listen", dest="listen_address", help="host:port (default 127.0.0.1:8700)")
    serve.add_argument("--ttl-seconds", dest="ttl_seconds", type=float, help="bubble expiry TTL")
    serve.add_argument("--silence-threshold", dest="silence_threshold", type=float)
    serve.add_argument("--tick-interval", dest="tick_interval", type=float)
    serve.add_argument("--backlog-window", dest="backlog_window", type=int)
    serve.add_argument("--data-dir", dest="data_dir")
    serve.add_argument("--static-dir", dest="static_dir", help="directory with web UI assets")

    replay = sub.add_parser("replay", help="rebuild state from a log and print a summary")
    replay.add_argument("log")

    metrics = sub.add_parser("metrics", help="per-user participation measures")
    metrics.add_argument("log")
    metrics.add_argument("--out", choices=["csv"], default="csv", help="output format")

    usage = sub.add_parser("usage", help="interaction usage breakdown")
    usage.add_argument("log")
    usage.add_argument("--out", choices=["csv"], default="csv", help="output format")

    slices = sub.add_parser("slices", help="dominant interaction kind per time slice")
    slices.add_argument("log")
    slices.add_argument("--n", type=int, default=analytics.DEFAULT_SLICES, help="number of slices")
    slices.add_argument("--out", choices=["csv"], default="csv", help="output format")

    export = sub.add_parser("export", help="render a stored log as a transcript document")
    export.add_argument("log")
    export.add_argument("--format", choices=list(storage.EXPORT_FORMATS), default="text")
    export.add_argument("--viewer", default=None, help="token whose view to export")

    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway import create_app

    config = load_config(
        {
            "listen_address": args.listen_address,
            "ttl_seconds": args.ttl_seconds,
            "silence_threshold": args.silence_threshold,
            "tick_interval": args.tick_interval,
            "backlog_window": args.backlog_window,
            "data_dir": args.data_dir,
        }
    )
    app = create_app(config, static_dir=args.static_dir)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    state = storage.replay(args.log)
    finalized = sum(1 for b in state.bubbles.values() if b.t_end is not None)
    hidden = sum(1 for b in state.bubbles.values() if b.state.value == "hidden")
    print(f"session: {state.session_id}")
    print(f"events: {state.last_seq}")
    print(f"participants: {len(state.participants)}")
    print(f"bubbles: {len(state.bubbles)} ({finalized} finalized, {hidden} hidden)")
    print(f"annotations: {len(state.annotations)} live, {len(state.removed_annotations)} removed")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    _, events = storage.read_log(args.log)
    print(analytics.metrics_csv(analytics.participation_metrics(events)), end="")
    return 0


def _cmd_usage(args: argparse.Namespace) -> int:
    _, events = storage.read_log(args.log)
    print(analytics.usage_csv(analytics.usage_breakdown(events)), end="")
    return 0


def _cmd_slices(args: argparse.Namespace) -> int:
    _, events = storage.read_log(args.log)
    timeline = analytics.slice_timeline(events, n_slices=args.n)
    print(analytics.slices_csv(timeline), end="")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    print(storage.export(args.log, args.format, viewer=args.viewer), end="")
    return 0


_HANDLERS = {
    "serve": _cmd_serve,
    "replay": _cmd_replay,
    "metrics": _cmd_metrics,
    "usage": _cmd_usage,
    "slices": _cmd_slices,
    "export": _cmd_export,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (
        storage.StorageError,
        analytics.AnalyticsError,
        ConfigError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
