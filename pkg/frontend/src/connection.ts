// WebSocket lifecycle: hello + subscribe on open, resume from the last
// applied seq after drops or gaps, reconnect with capped backoff.

import { GapError, TranscriptStore } from "./store.js";
import { helloFrame, parseServerMessage, subscribeFrame } from "./protocol.js";
import type { RejectMsg } from "./protocol.js";
import { PendingTracker } from "./commands.js";
import type { CommandFrame } from "./commands.js";

export type ConnectionStatus = "connecting" | "online" | "offline";

export interface ConnectionCallbacks {
  onChange: () => void;
  onReject: (msg: RejectMsg) => void;
  onStatus: (status: ConnectionStatus) => void;
}

export class LiveConnection {
  private ws: WebSocket | null = null;
  private backoffMs = 500;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly sessionId: string,
    private readonly token: string,
    private readonly displayName: string,
    readonly store: TranscriptStore,
    readonly pending: PendingTracker,
    private readonly callbacks: ConnectionCallbacks,
  ) {}

  connect(): void {
    this.callbacks.onStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = 500;
      ws.send(JSON.stringify(helloFrame(this.token, this.displayName)));
      this.resubscribe();
      this.callbacks.onStatus("online");
    };
    ws.onmessage = (raw: MessageEvent) => this.handle(String(raw.data));
    ws.onclose = () => {
      if (this.closed) return;
      this.callbacks.onStatus("offline");
      setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, 10_000);
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  private resubscribe(): void {
    this.ws?.send(JSON.stringify(subscribeFrame(this.sessionId, this.store.lastSeq)));
  }

  send(frame: CommandFrame): void {
    this.pending.track(frame);
    this.ws?.send(JSON.stringify(frame));
    this.callbacks.onChange();
  }

  private handle(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) return;
    if (msg.kind === "welcome") {
      this.store.applyWelcome(msg);
      this.callbacks.onChange();
    } else if (msg.kind === "event") {
      try {
        if (this.store.applyEvent(msg)) {
          this.pending.settle(msg.command_ref);
          this.callbacks.onChange();
        }
      } catch (err) {
        if (err instanceof GapError) {
          this.resubscribe(); // never render a partial state
        } else {
          throw err;
        }
      }
    } else if (msg.kind === "reject") {
      this.pending.reject(msg.command_ref);
      this.callbacks.onReject(msg);
      this.callbacks.onChange();
    }
  }
}
