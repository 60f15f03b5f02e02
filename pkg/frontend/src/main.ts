// Entry point: session bootstrap over HTTP, then live traffic on /ws.

import { CommandFactory, PendingTracker } from "./commands.js";
import { LiveConnection } from "./connection.js";
import { TranscriptStore } from "./store.js";
import {
  renderHeatmap,
  renderHistory,
  renderParticipants,
  renderTranscript,
  showToast,
} from "./ui.js";
import type { UiContext } from "./ui.js";

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

async function createSession(): Promise<string> {
  const response = await fetch("/sessions", { method: "POST" });
  const body = await response.json();
  return body.session_id;
}

async function join(sessionId: string, displayName: string): Promise<string> {
  const response = await fetch(`/sessions/${sessionId}/join`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ display_name: displayName }),
  });
  if (!response.ok) throw new Error(`join failed: ${response.status}`);
  return (await response.json()).token;
}

function storageKey(sessionId: string): string {
  return `scriptmeet:${sessionId}`;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  let sessionId = params.get("session");
  if (!sessionId) {
    sessionId = await createSession();
    location.search = `?session=${sessionId}`;
    return;
  }

  // Re-use the token across reloads so reconnecting keeps our identity.
  let token = sessionStorage.getItem(storageKey(sessionId));
  let displayName = sessionStorage.getItem(`${storageKey(sessionId)}:name`) ?? "";
  if (!token) {
    displayName = window.prompt("Your name for this meeting:")?.trim() || "Guest";
    token = await join(sessionId, displayName);
    sessionStorage.setItem(storageKey(sessionId), token);
    sessionStorage.setItem(`${storageKey(sessionId)}:name`, displayName);
  }

  const store = new TranscriptStore();
  const pending = new PendingTracker();
  const factory = new CommandFactory();

  const transcript = document.getElementById("transcript")!;
  const heatmap = document.getElementById("heatmap")!;
  const history = document.getElementById("history-items")!;
  const participants = document.getElementById("participants")!;
  const statusDot = document.getElementById("status")!;
  const kindFilter = document.getElementById("history-kind") as HTMLSelectElement;
  const tagFilter = document.getElementById("history-tag") as HTMLInputElement;

  const ctx: UiContext = {
    store,
    pending,
    factory,
    viewerToken: token,
    send: (frame) => connection.send(frame),
  };

  const redraw = () => {
    renderTranscript(ctx, transcript);
    renderHeatmap(ctx, heatmap);
    renderHistory(ctx, history, kindFilter.value, tagFilter.value.trim());
    renderParticipants(ctx, participants);
  };

  const connection = new LiveConnection(wsUrl(), sessionId, token, displayName, store, pending, {
    onChange: redraw,
    onReject: (msg) => showToast(`${msg.error_code}: ${msg.message}`),
    onStatus: (status) => {
      statusDot.className = `status ${status}`;
      statusDot.title = status;
    },
  });
  connection.connect();

  kindFilter.onchange = redraw;
  tagFilter.oninput = redraw;

  const speakInput = document.getElementById("speak-input") as HTMLInputElement;
  const speakBtn = document.getElementById("speak-btn") as HTMLButtonElement;
  const speak = () => {
    if (speakInput.value.trim()) {
      connection.send(factory.speak(speakInput.value));
      speakInput.value = "";
    }
  };
  speakBtn.onclick = speak;
  speakInput.onkeydown = (event) => {
    if (event.key === "Enter") speak();
  };

  const shareBtn = document.getElementById("share-btn") as HTMLButtonElement;
  shareBtn.onclick = () => {
    navigator.clipboard?.writeText(location.href);
    showToast("join link copied");
  };
}

boot().catch((err) => {
  console.error(err);
  showToast(`startup failed: ${err}`);
});
