// DOM rendering. The whole panel re-renders from the store on every
// change; bubbles carry stable element ids so the heatmap and history
// can scroll them into view.

import type { HistoryQuery, TranscriptStore } from "./store.js";
import type { AnnotationKind, ProjectedAnnotation } from "./protocol.js";
import type { CommandFactory, CommandFrame, PendingBadge, PendingTracker } from "./commands.js";

export const HIGHLIGHT_COLORS = ["yellow", "green", "blue", "pink"];

export interface UiContext {
  store: TranscriptStore;
  pending: PendingTracker;
  factory: CommandFactory;
  viewerToken: string;
  send: (frame: CommandFrame) => void;
}

export function bubbleElementId(bubbleId: string): string {
  return `bubble-${bubbleId}`;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function clockLabel(seconds: number): string {
  const total = Math.floor(seconds);
  const mm = String(Math.floor(total / 60)).padStart(2, "0");
  const ss = String(total % 60).padStart(2, "0");
  return `${mm}:${ss}`;
}

// Split the bubble text into plain and highlighted runs. Offsets are code
// points (matching the server's range semantics), clamped to the current
// text because an edit may have shortened it.
export function highlightRuns(
  text: string,
  annotations: ProjectedAnnotation[],
  pendings: PendingBadge[],
): { text: string; colors: string[] }[] {
  const chars = [...text];
  const spans = annotations
    .filter((a) => a.kind === "highlight" && a.start !== undefined && a.end !== undefined)
    .map((a) => ({ start: a.start as number, end: a.end as number, color: a.color ?? "yellow" }))
    .concat(
      pendings
        .filter((p) => p.kind === "highlight" && p.start !== undefined && p.end !== undefined)
        .map((p) => ({ start: p.start as number, end: p.end as number, color: p.color ?? "yellow" })),
    )
    .map((s) => ({ ...s, start: Math.max(0, s.start), end: Math.min(chars.length, s.end) }))
    .filter((s) => s.start < s.end);
  const cuts = new Set<number>([0, chars.length]);
  for (const s of spans) {
    cuts.add(s.start);
    cuts.add(s.end);
  }
  const bounds = [...cuts].sort((a, b) => a - b);
  const runs: { text: string; colors: string[] }[] = [];
  for (let i = 0; i + 1 < bounds.length; i += 1) {
    const [lo, hi] = [bounds[i], bounds[i + 1]];
    const colors = spans.filter((s) => s.start <= lo && hi <= s.end).map((s) => s.color);
    runs.push({ text: chars.slice(lo, hi).join(""), colors });
  }
  return runs;
}

// Selection offsets in code points relative to the bubble's text node;
// null when the selection is not inside this bubble's text.
export function selectionRange(textNode: Node): { start: number; end: number } | null {
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return null;
  const range = selection.getRangeAt(0);
  if (range.startContainer !== textNode || range.endContainer !== textNode) return null;
  const content = textNode.textContent ?? "";
  const toCodePoints = (utf16: number) => [...content.slice(0, utf16)].length;
  const start = toCodePoints(Math.min(range.startOffset, range.endOffset));
  const end = toCodePoints(Math.max(range.startOffset, range.endOffset));
  return start < end ? { start, end } : null;
}

function renderBadges(ctx: UiContext, bubbleId: string, container: HTMLElement): void {
  const { store, pending } = ctx;
  const pendings = pending.forBubble(bubbleId);
  const likes = store.likeCount(bubbleId) + pendings.filter((p) => p.kind === "like").length;
  if (likes > 0) container.appendChild(el("span", "badge like-badge", `❤ ${likes}`));
  const tagCounts = store.tagCounts(bubbleId);
  for (const p of pendings) {
    if (p.kind === "tag" && p.label) tagCounts.set(p.label, (tagCounts.get(p.label) ?? 0) + 1);
  }
  for (const [label, count] of tagCounts) {
    container.appendChild(el("span", "badge tag-badge", count > 1 ? `${label} ×${count}` : label));
  }
  const comments = store
    .annotationsOf(bubbleId)
    .filter((a) => a.kind === "comment")
    .concat();
  const thread = el("div", "comments");
  for (const c of comments) {
    const line = el("div", c.private ? "comment private" : "comment");
    line.appendChild(el("span", "comment-author", c.author_name ?? "?"));
    line.appendChild(el("span", "comment-text", c.text ?? ""));
    if (c.private) line.appendChild(el("span", "comment-flag", "private"));
    thread.appendChild(line);
  }
  for (const p of pendings) {
    if (p.kind !== "comment") continue;
    const line = el("div", "comment pending");
    line.appendChild(el("span", "comment-author", "you"));
    line.appendChild(el("span", "comment-text", p.text ?? ""));
    thread.appendChild(line);
  }
  if (thread.childNodes.length > 0) container.appendChild(thread);
}

function renderToolbar(ctx: UiContext, bubbleId: string, textNode: Node): HTMLElement {
  const tools = el("div", "tools");

  const likeBtn = el("button", "tool like-btn", "❤");
  likeBtn.title = "like";
  likeBtn.onclick = () => ctx.send(ctx.factory.like(bubbleId));
  tools.appendChild(likeBtn);

  const colorPick = el("select", "color-pick") as HTMLSelectElement;
  for (const color of HIGHLIGHT_COLORS) {
    const opt = el("option", undefined, color) as HTMLOptionElement;
    opt.value = color;
    colorPick.appendChild(opt);
  }
  const highlightBtn = el("button", "tool highlight-btn", "H");
  highlightBtn.title = "highlight selection";
  highlightBtn.onclick = () => {
    const range = selectionRange(textNode);
    if (range) ctx.send(ctx.factory.highlight(bubbleId, colorPick.value, range.start, range.end));
  };
  tools.appendChild(highlightBtn);
  tools.appendChild(colorPick);

  const tagInput = el("input", "tag-input") as HTMLInputElement;
  tagInput.placeholder = "tag…";
  const tagBtn = el("button", "tool tag-btn", "#");
  tagBtn.title = "tag";
  tagBtn.onclick = () => {
    if (tagInput.value.trim()) {
      ctx.send(ctx.factory.tag(bubbleId, tagInput.value.trim()));
      tagInput.value = "";
    }
  };
  tools.appendChild(tagInput);
  tools.appendChild(tagBtn);

  const commentInput = el("input", "comment-input") as HTMLInputElement;
  commentInput.placeholder = "comment…";
  const privateBox = el("input") as HTMLInputElement;
  privateBox.type = "checkbox";
  privateBox.className = "private-box";
  privateBox.title = "private";
  const commentBtn = el("button", "tool comment-btn", "\u{1f4ac}");
  commentBtn.onclick = () => {
    if (commentInput.value.trim()) {
      ctx.send(ctx.factory.comment(bubbleId, commentInput.value, privateBox.checked));
      commentInput.value = "";
    }
  };
  tools.appendChild(commentInput);
  tools.appendChild(privateBox);
  tools.appendChild(commentBtn);

  const editBtn = el("button", "tool edit-btn", "✎");
  editBtn.title = "edit transcript";
  editBtn.onclick = () => {
    const bubble = ctx.store.getBubble(bubbleId);
    if (!bubble || bubble.state !== "finalized") return;
    const current = bubble.text;
    const replacement = window.prompt("Fix the transcript:", current);
    if (replacement !== null && replacement !== current) {
      ctx.send(ctx.factory.edit(bubbleId, replacement));
    }
  };
  tools.appendChild(editBtn);
  return tools;
}

export function renderTranscript(ctx: UiContext, root: HTMLElement): void {
  root.replaceChildren();
  for (const bubble of ctx.store.orderedBubbles()) {
    const classes = ["bubble", bubble.state];
    if (bubble.own) classes.push("own");
    const node = el("div", classes.join(" "));
    node.id = bubbleElementId(bubble.bubble_id);

    const meta = el("div", "meta");
    meta.appendChild(el("span", "speaker", bubble.speaker_name));
    meta.appendChild(el("span", "time", clockLabel(bubble.t_start)));
    if (bubble.state === "interim") meta.appendChild(el("span", "interim-flag", "…"));
    node.appendChild(meta);

    const textDiv = el("div", "text");
    const runs = highlightRuns(
      bubble.text,
      ctx.store.annotationsOf(bubble.bubble_id),
      ctx.pending.forBubble(bubble.bubble_id),
    );
    if (runs.every((r) => r.colors.length === 0)) {
      textDiv.textContent = bubble.text; // single text node: selection offsets stay simple
    } else {
      for (const run of runs) {
        if (run.colors.length === 0) {
          textDiv.appendChild(document.createTextNode(run.text));
        } else {
          const mark = el("mark", `hl-${run.colors[run.colors.length - 1]}`, run.text);
          textDiv.appendChild(mark);
        }
      }
    }
    node.appendChild(textDiv);

    const badges = el("div", "badges");
    renderBadges(ctx, bubble.bubble_id, badges);
    node.appendChild(badges);
    node.appendChild(renderToolbar(ctx, bubble.bubble_id, textDiv.firstChild ?? textDiv));
    root.appendChild(node);
  }
  root.scrollTop = root.scrollHeight; // keep the newest bubble in view
}

export function renderHeatmap(ctx: UiContext, strip: HTMLElement): void {
  strip.replaceChildren();
  const cells = ctx.store.heatmap();
  const total = cells.reduce((acc, c) => acc + c.extent, 0) || 1;
  cells.forEach((cell, index) => {
    const div = el("div", `cell depth-${cell.depth}`);
    div.style.height = `${Math.max(1.5, (100 * cell.extent) / total)}%`;
    div.title = `bubble ${index + 1}, ${cell.depth} interaction${cell.depth === 1 ? "" : "s"}`;
    div.dataset.bubbleId = cell.bubbleId;
    div.onclick = () => {
      document
        .getElementById(bubbleElementId(cell.bubbleId))
        ?.scrollIntoView({ behavior: "smooth", block: "center" });
    };
    strip.appendChild(div);
  });
}

export function renderHistory(
  ctx: UiContext,
  drawer: HTMLElement,
  kindFilter: string,
  tagFilter: string,
): void {
  drawer.replaceChildren();
  const query: HistoryQuery = {};
  if (kindFilter) query.byKind = kindFilter as AnnotationKind;
  if (tagFilter) query.byTagLabel = tagFilter;
  const items = ctx.store.history(query);
  if (items.length === 0) {
    drawer.appendChild(el("div", "history-empty", "nothing here yet"));
    return;
  }
  for (const item of items) {
    const bubble = ctx.store.getBubble(item.bubble_id);
    const row = el("div", `history-item kind-${item.kind}`);
    row.appendChild(el("span", "history-kind", item.kind));
    const snippet = bubble ? [...bubble.text].slice(0, 60).join("") : item.bubble_id;
    row.appendChild(el("span", "history-snippet", snippet));
    row.onclick = () => {
      document
        .getElementById(bubbleElementId(item.bubble_id))
        ?.scrollIntoView({ behavior: "smooth", block: "center" });
    };
    drawer.appendChild(row);
  }
}

export function renderParticipants(ctx: UiContext, panel: HTMLElement): void {
  panel.replaceChildren();
  for (const [token, p] of ctx.store.participants) {
    if (!p.active) continue;
    const tile = el("div", token === ctx.viewerToken ? "tile own" : "tile");
    const initials = p.display_name
      .split(/\s+/)
      .map((w) => w[0] ?? "")
      .join("")
      .slice(0, 2)
      .toUpperCase();
    tile.appendChild(el("div", "avatar", initials));
    tile.appendChild(el("div", "tile-name", p.display_name));
    panel.appendChild(tile);
  }
}

export function showToast(message: string): void {
  const host = document.getElementById("toasts");
  if (!host) return;
  const toast = el("div", "toast", message);
  host.appendChild(toast);
  setTimeout(() => toast.remove(), 4000);
}
