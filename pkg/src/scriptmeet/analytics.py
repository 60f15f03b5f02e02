"""Navigation aids and participation measures, all derived from session data.

Heatmap and history read a state snapshot; the participation measures,
usage breakdown, and timeline slicing fold the raw event log, so they can
run offline on stored sessions and never depend on live server state.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

from .events import AnnotationApplied, ParticipantJoined, SessionEvent, UtteranceFinalized
from .model import Tag
from .session import SessionState

DEPTH_CAP = 8

# Fixed tie-break when two kinds share a slice's top count: observed
# usage-frequency order, most used first.
KIND_PRECEDENCE = ("like", "highlight", "comment", "tag", "edit")

DEFAULT_SLICES = 40


class AnalyticsError(Exception):
    pass


class IndexOutOfRange(AnalyticsError):
    pass


class EmptySession(AnalyticsError):
    pass


@dataclass(frozen=True)
class HeatmapCell:
    bubble_id: str
    extent: int  # proportional to text length; minimum one character quantum
    depth: int  # interaction count, capped


def compute_heatmap(state: SessionState) -> list[HeatmapCell]:
    """One cell per visible bubble, in transcript order.

    Extent is the character count of the current text (the rendered-height
    proxy, clamped to at least 1); depth is the live annotation count
    capped at DEPTH_CAP so the color scale stays readable.
    """
    cells = []
    for bubble in state.ordered_bubbles():
        cells.append(
            HeatmapCell(
                bubble_id=bubble.bubble_id,
                extent=max(1, len(bubble.text)),
                depth=min(len(state.bubble_annotations.get(bubble.bubble_id, ())), DEPTH_CAP),
            )
        )
    return cells


def resolve_grid_click(grid: list[HeatmapCell], cell_index: int) -> str:
    """Cell index -> bubble id; the mapping is a bijection over visible bubbles."""
    if not 0 <= cell_index < len(grid):
        raise IndexOutOfRange(f"cell {cell_index} outside grid of {len(grid)}")
    return grid[cell_index].bubble_id


@dataclass(frozen=True)
class HistoryFilter:
    by_kind: str | None = None
    by_tag_label: str | None = None


@dataclass(frozen=True)
class HistoryItem:
    seq: int
    annotation_id: str
    bubble_id: str
    kind: str


def query_history(
    state: SessionState, viewer: str, filt: HistoryFilter | None = None
) -> list[HistoryItem]:
    """The viewer's interaction index, in seq order.

    Kind filtering indexes the viewer's own annotations. Tag-label
    filtering is content-based: it matches bubbles carrying that exact
    label regardless of who tagged them, one item per bubble (anchored at
    the first matching tag). Both filters compose as AND.
    """
    filt = filt or HistoryFilter()
    if filt.by_tag_label is not None:
        seen_bubbles: set[str] = set()
        items = []
        for ann in sorted(state.annotations.values(), key=lambda a: a.seq):
            if not isinstance(ann.body, Tag) or ann.body.label != filt.by_tag_label:
                continue
            if ann.bubble_id in seen_bubbles:
                continue
            seen_bubbles.add(ann.bubble_id)
            items.append(HistoryItem(ann.seq, ann.annotation_id, ann.bubble_id, ann.kind))
    else:
        items = [
            HistoryItem(ann.seq, ann.annotation_id, ann.bubble_id, ann.kind)
            for ann in sorted(state.annotations.values(), key=lambda a: a.seq)
            if ann.author == viewer
        ]
    if filt.by_kind is not None:
        items = [item for item in items if item.kind == filt.by_kind]
    return items


@dataclass
class ParticipationMetrics:
    token: str
    display_name: str
    verbal_turns: int = 0
    time_spoken: float = 0.0
    words_spoken: int = 0
    transcript_interactions: int = 0

    @property
    def nonverbal_total(self) -> int:
        # Chat/reaction side channels are out of scope, so the transcript
        # interactions are the whole non-verbal count.
        return self.transcript_interactions


def participation_metrics(events: Iterable[SessionEvent]) -> dict[str, ParticipationMetrics]:
    """Per-user verbal and non-verbal participation, recomputed from the log.

    Words are counted on the as-transcribed finalized text (revision 0) by
    Unicode-whitespace splitting; later edits are annotations, not speech,
    so they influence transcript_interactions instead.
    """
    metrics: dict[str, ParticipationMetrics] = {}

    def entry(token: str) -> ParticipationMetrics:
        if token not in metrics:
            metrics[token] = ParticipationMetrics(token=token, display_name=token)
        return metrics[token]

    for event in events:
        p = event.payload
        if isinstance(p, ParticipantJoined):
            entry(p.token).display_name = p.display_name
        elif isinstance(p, UtteranceFinalized):
            m = entry(p.speaker)
            m.verbal_turns += 1
            m.time_spoken += p.t_end - p.t_start
            m.words_spoken += len(p.text.split())
        elif isinstance(p, AnnotationApplied):
            entry(p.annotation.author).transcript_interactions += 1
    return metrics


@dataclass(frozen=True)
class UsageBreakdown:
    counts: dict[str, int]
    percentages: dict[str, float]
    total: int


def usage_breakdown(events: Iterable[SessionEvent]) -> UsageBreakdown:
    """Interaction counts by kind and their share of the total.

    Every kind is always reported; with zero interactions all percentages
    are 0 rather than a division error.
    """
    counts = {kind: 0 for kind in KIND_PRECEDENCE}
    for event in events:
        if isinstance(event.payload, AnnotationApplied):
            counts[event.payload.annotation.kind] += 1
    total = sum(counts.values())
    percentages = {
        kind: (100.0 * n / total) if total else 0.0 for kind, n in counts.items()
    }
    return UsageBreakdown(counts=counts, percentages=percentages, total=total)


@dataclass(frozen=True)
class SliceTimeline:
    n_slices: int
    start: float
    end: float
    dominant: tuple[str | None, ...]  # per slice; None when the slice is empty


def slice_timeline(events: Iterable[SessionEvent], n_slices: int = DEFAULT_SLICES) -> SliceTimeline:
    """Split the session into n equal-duration slices and report the most
    used interaction kind in each, ties broken by KIND_PRECEDENCE.

    Slice boundaries come from the first and last event wall times; a log
    without a positive duration has no timeline and raises EmptySession.
    """
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    events = list(events)
    if not events:
        raise EmptySession("log has no events")
    start = events[0].wall_time
    end = events[-1].wall_time
    if end <= start:
        raise EmptySession("session duration is not positive")

    width = (end - start) / n_slices
    per_slice: list[dict[str, int]] = [
        {kind: 0 for kind in KIND_PRECEDENCE} for _ in range(n_slices)
    ]
    for event in events:
        if not isinstance(event.payload, AnnotationApplied):
            continue
        index = int((event.wall_time - start) / width)
        if index >= n_slices:  # the event exactly at the end boundary
            index = n_slices - 1
        per_slice[index][event.payload.annotation.kind] += 1

    dominant: list[str | None] = []
    for counts in per_slice:
        best = max(counts.values())
        if best == 0:
            dominant.append(None)
        else:
            dominant.append(next(k for k in KIND_PRECEDENCE if counts[k] == best))
    return SliceTimeline(n_slices=n_slices, start=start, end=end, dominant=tuple(dominant))


# --- CSV rendering --------------------------------------------------------


def metrics_csv(metrics: dict[str, ParticipationMetrics]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(
        [
            "token",
            "display_name",
            "verbal_turns",
            "time_spoken_seconds",
            "words_spoken",
            "transcript_interactions",
            "nonverbal_total",
        ]
    )
    for token in sorted(metrics):
        m = metrics[token]
        writer.writerow(
            [
                m.token,
                m.display_name,
                m.verbal_turns,
                f"{m.time_spoken:.3f}",
                m.words_spoken,
                m.transcript_interactions,
                m.nonverbal_total,
            ]
        )
    return out.getvalue()


def usage_csv(usage: UsageBreakdown) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["kind", "count", "percentage"])
    for kind in KIND_PRECEDENCE:
        writer.writerow([kind, usage.counts[kind], f"{usage.percentages[kind]:.1f}"])
    return out.getvalue()


def slices_csv(timeline: SliceTimeline) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["slice", "t_from", "t_to", "dominant_kind"])
    width = (timeline.end - timeline.start) / timeline.n_slices
    for i, kind in enumerate(timeline.dominant):
        writer.writerow(
            [
                i,
                f"{timeline.start + i * width:.3f}",
                f"{timeline.start + (i + 1) * width:.3f}",
                kind or "",
            ]
        )
    return out.getvalue()
