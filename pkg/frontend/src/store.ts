// Authoritative client state: a pure fold of the server's event stream.
// No UI-local state lives here; optimistic badges are layered on top by
// the pending tracker and never touch this store. view() emits the same
// canonical shape the server uses for viewer snapshots, which is what the
// fold-equality tests compare.

import type {
  AnnotationKind,
  Delta,
  EventMsg,
  ProjectedAnnotation,
  ProjectedBubble,
  ViewerSnapshot,
  WelcomeMsg,
} from "./protocol.js";

export class GapError extends Error {}

interface BubbleEntry {
  bubble_id: string;
  speaker: string;
  speaker_name: string;
  state: "interim" | "finalized";
  text: string;
  t_start: number;
  t_end: number | null;
  own: boolean;
  annotations: Map<string, ProjectedAnnotation>;
}

export interface HeatmapCell {
  bubbleId: string;
  extent: number;
  depth: number;
}

export interface HistoryQuery {
  byKind?: AnnotationKind;
  byTagLabel?: string;
}

export const DEPTH_CAP = 8;

const codePoints = (text: string): number => [...text].length;

export class TranscriptStore {
  sessionId: string | null = null;
  lastSeq = 0;
  participants = new Map<string, { display_name: string; active: boolean }>();
  private bubbles = new Map<string, BubbleEntry>();

  applyWelcome(msg: WelcomeMsg): void {
    this.sessionId = msg.session_id;
    if (msg.snapshot === null) return; // backlog path: keep folding events
    this.participants = new Map(
      msg.snapshot.participants.map((p) => [p.token, { display_name: p.display_name, active: p.active }]),
    );
    this.bubbles = new Map(
      msg.snapshot.bubbles.map((b) => [
        b.bubble_id,
        { ...b, annotations: new Map(b.annotations.map((a) => [a.annotation_id, a])) },
      ]),
    );
    this.lastSeq = msg.snapshot.last_seq;
  }

  // Returns false for a duplicate (already-applied seq); throws GapError
  // when an event was missed, in which case the caller must resume.
  applyEvent(msg: EventMsg): boolean {
    if (msg.seq <= this.lastSeq) return false;
    if (msg.seq !== this.lastSeq + 1) {
      throw new GapError(`expected seq ${this.lastSeq + 1}, got ${msg.seq}`);
    }
    this.applyDelta(msg.delta);
    this.lastSeq = msg.seq;
    return true;
  }

  private applyDelta(delta: Delta): void {
    switch (delta.type) {
      case "participant_joined":
        this.participants.set(delta.token, { display_name: delta.display_name, active: true });
        break;
      case "participant_left": {
        const p = this.participants.get(delta.token);
        if (p) p.active = false;
        break;
      }
      case "interim":
      case "finalized": {
        let bubble = this.bubbles.get(delta.bubble_id);
        if (!bubble) {
          bubble = {
            bubble_id: delta.bubble_id,
            speaker: delta.speaker,
            speaker_name: delta.speaker_name,
            state: "interim",
            text: "",
            t_start: delta.t_start,
            t_end: null,
            own: delta.own,
            annotations: new Map(),
          };
          this.bubbles.set(delta.bubble_id, bubble);
        }
        bubble.text = delta.text;
        if (delta.type === "finalized") {
          bubble.state = "finalized";
          bubble.t_end = delta.t_end ?? null;
        }
        break;
      }
      case "annotation": {
        const bubble = this.bubbles.get(delta.bubble_id);
        if (!bubble) break;
        bubble.annotations.set(delta.annotation.annotation_id, delta.annotation);
        if (delta.annotation.kind === "edit" && delta.annotation.new_text !== undefined) {
          bubble.text = delta.annotation.new_text;
        }
        break;
      }
      case "annotation_removed":
        this.bubbles.get(delta.bubble_id)?.annotations.delete(delta.annotation_id);
        break;
      case "hidden":
        for (const id of delta.bubble_ids) this.bubbles.delete(id);
        break;
      case "redacted":
        break; // content withheld from this viewer; seq still advances
    }
  }

  orderedBubbles(): BubbleEntry[] {
    return [...this.bubbles.values()].sort((a, b) =>
      a.t_start !== b.t_start ? a.t_start - b.t_start : a.bubble_id < b.bubble_id ? -1 : 1,
    );
  }

  getBubble(bubbleId: string): BubbleEntry | undefined {
    return this.bubbles.get(bubbleId);
  }

  annotationsOf(bubbleId: string): ProjectedAnnotation[] {
    const bubble = this.bubbles.get(bubbleId);
    if (!bubble) return [];
    return [...bubble.annotations.values()].sort((a, b) => a.seq - b.seq);
  }

  likeCount(bubbleId: string): number {
    return this.annotationsOf(bubbleId).filter((a) => a.kind === "like").length;
  }

  tagCounts(bubbleId: string): Map<string, number> {
    const counts = new Map<string, number>();
    for (const a of this.annotationsOf(bubbleId)) {
      if (a.kind === "tag" && a.label !== undefined) {
        counts.set(a.label, (counts.get(a.label) ?? 0) + 1);
      }
    }
    return counts;
  }

  // One cell per visible bubble: extent tracks text length, color depth
  // tracks this viewer's visible interaction count, capped for the scale.
  heatmap(): HeatmapCell[] {
    return this.orderedBubbles().map((b) => ({
      bubbleId: b.bubble_id,
      extent: Math.max(1, codePoints(b.text)),
      depth: Math.min(b.annotations.size, DEPTH_CAP),
    }));
  }

  // The viewer's interaction index. Kind filtering walks own annotations;
  // tag-label filtering is content-based (any author), one hit per bubble.
  history(query: HistoryQuery = {}): ProjectedAnnotation[] {
    const all = this.orderedBubbles()
      .flatMap((b) => this.annotationsOf(b.bubble_id))
      .sort((a, b) => a.seq - b.seq);
    let items: ProjectedAnnotation[];
    if (query.byTagLabel !== undefined) {
      const seen = new Set<string>();
      items = all.filter((a) => {
        if (a.kind !== "tag" || a.label !== query.byTagLabel || seen.has(a.bubble_id)) return false;
        seen.add(a.bubble_id);
        return true;
      });
    } else {
      items = all.filter((a) => a.own);
    }
    if (query.byKind !== undefined) items = items.filter((a) => a.kind === query.byKind);
    return items;
  }

  // Canonical viewer state, shape-identical to the server's snapshot
  // projection (minus the envelope). The fold-equality tests deep-compare
  // this against snapshots recorded from the server.
  view(): ViewerSnapshot {
    return {
      session_id: this.sessionId ?? "",
      last_seq: this.lastSeq,
      participants: [...this.participants.entries()]
        .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
        .map(([token, p]) => ({ token, display_name: p.display_name, active: p.active })),
      bubbles: this.orderedBubbles().map((b) => ({
        bubble_id: b.bubble_id,
        speaker: b.speaker,
        speaker_name: b.speaker_name,
        state: b.state,
        text: b.text,
        t_start: b.t_start,
        t_end: b.t_end,
        own: b.own,
        annotations: this.annotationsOf(b.bubble_id),
      })) as ProjectedBubble[],
    };
  }
}
