// Interaction dispatch: every user gesture builds exactly one command
// frame with a client-generated ref, so retries are idempotent and the
// server's echo (or reject) can reconcile the optimistic badge.

import { SCHEMA_VERSION } from "./protocol.js";
import type { AnnotationKind } from "./protocol.js";

export interface CommandFrame {
  schema_version: number;
  kind: "command";
  command_ref: string;
  command: Record<string, unknown>;
}

export interface PendingBadge {
  ref: string;
  bubbleId: string;
  kind: AnnotationKind;
  label?: string;
  color?: string;
  start?: number;
  end?: number;
  text?: string;
  newText?: string;
}

export class CommandFactory {
  private n = 0;
  private readonly prefix: string;

  constructor(prefix?: string) {
    this.prefix = prefix ?? `c${Date.now().toString(36)}-`;
  }

  private frame(command: Record<string, unknown>): CommandFrame {
    this.n += 1;
    return {
      schema_version: SCHEMA_VERSION,
      kind: "command",
      command_ref: `${this.prefix}${this.n}`,
      command,
    };
  }

  speak(text: string): CommandFrame {
    return this.frame({ type: "speak", text });
  }

  like(bubbleId: string): CommandFrame {
    return this.frame({
      type: "annotate",
      bubble_id: bubbleId,
      annotation_kind: "like",
      body: {},
    });
  }

  highlight(bubbleId: string, color: string, start: number, end: number): CommandFrame {
    return this.frame({
      type: "annotate",
      bubble_id: bubbleId,
      annotation_kind: "highlight",
      body: { color, start, end },
    });
  }

  tag(bubbleId: string, label: string): CommandFrame {
    return this.frame({
      type: "annotate",
      bubble_id: bubbleId,
      annotation_kind: "tag",
      body: { label },
    });
  }

  comment(bubbleId: string, text: string, priv: boolean): CommandFrame {
    return this.frame({
      type: "annotate",
      bubble_id: bubbleId,
      annotation_kind: "comment",
      body: { text, private: priv },
    });
  }

  edit(bubbleId: string, newText: string): CommandFrame {
    return this.frame({
      type: "annotate",
      bubble_id: bubbleId,
      annotation_kind: "edit",
      body: { new_text: newText },
    });
  }

  removeAnnotation(annotationId: string): CommandFrame {
    return this.frame({ type: "remove_annotation", annotation_id: annotationId });
  }

  leave(): CommandFrame {
    return this.frame({ type: "leave" });
  }
}

export function badgeFor(frame: CommandFrame): PendingBadge | null {
  const cmd = frame.command;
  if (cmd.type !== "annotate") return null;
  const body = cmd.body as Record<string, unknown>;
  return {
    ref: frame.command_ref,
    bubbleId: cmd.bubble_id as string,
    kind: cmd.annotation_kind as AnnotationKind,
    label: body.label as string | undefined,
    color: body.color as string | undefined,
    start: body.start as number | undefined,
    end: body.end as number | undefined,
    text: body.text as string | undefined,
    newText: body.new_text as string | undefined,
  };
}

// Optimistic badges keyed by command ref. The store never sees these:
// they are dropped when the server echoes the ref back on an event, or
// rolled back (with a toast) on a reject.
export class PendingTracker {
  private pending = new Map<string, PendingBadge>();

  track(frame: CommandFrame): void {
    const badge = badgeFor(frame);
    if (badge) this.pending.set(badge.ref, badge);
  }

  settle(ref: string | undefined | null): void {
    if (ref) this.pending.delete(ref);
  }

  reject(ref: string | undefined | null): PendingBadge | null {
    if (!ref) return null;
    const badge = this.pending.get(ref) ?? null;
    this.pending.delete(ref);
    return badge;
  }

  forBubble(bubbleId: string): PendingBadge[] {
    return [...this.pending.values()].filter((b) => b.bubbleId === bubbleId);
  }

  get size(): number {
    return this.pending.size;
  }
}
