// Wire contract with the server: one JSON message per WebSocket text
// frame, schema_version 1. Shapes mirror docs/ws_protocol_v1.schema.json.

export const SCHEMA_VERSION = 1;

export type AnnotationKind = "like" | "highlight" | "comment" | "tag" | "edit";

export interface ProjectedAnnotation {
  annotation_id: string;
  seq: number;
  kind: AnnotationKind;
  bubble_id: string;
  own: boolean;
  color?: string;
  start?: number;
  end?: number;
  label?: string;
  text?: string;
  private?: boolean;
  author_name?: string;
  new_text?: string;
}

export interface ProjectedBubble {
  bubble_id: string;
  speaker: string;
  speaker_name: string;
  state: "interim" | "finalized";
  text: string;
  t_start: number;
  t_end: number | null;
  own: boolean;
  annotations: ProjectedAnnotation[];
}

export interface Participant {
  token: string;
  display_name: string;
  active: boolean;
}

export interface ViewerSnapshot {
  session_id: string;
  last_seq: number;
  participants: Participant[];
  bubbles: ProjectedBubble[];
}

export type Delta =
  | { type: "participant_joined"; token: string; display_name: string }
  | { type: "participant_left"; token: string }
  | {
      type: "interim" | "finalized";
      bubble_id: string;
      speaker: string;
      speaker_name: string;
      text: string;
      t_start: number;
      t_end?: number;
      own: boolean;
    }
  | { type: "annotation"; bubble_id: string; annotation: ProjectedAnnotation }
  | { type: "annotation_removed"; annotation_id: string; bubble_id: string }
  | { type: "hidden"; bubble_ids: string[] }
  | { type: "redacted" };

export interface WelcomeMsg {
  kind: "welcome";
  session_id: string;
  last_seq: number;
  snapshot: ViewerSnapshot | null;
}

export interface EventMsg {
  kind: "event";
  seq: number;
  delta: Delta;
  command_ref?: string;
}

export interface RejectMsg {
  kind: "reject";
  command_ref: string | null;
  error_code: string;
  message: string;
}

export interface PongMsg {
  kind: "pong";
}

export type ServerMsg = WelcomeMsg | EventMsg | RejectMsg | PongMsg;

export function parseServerMessage(raw: string): ServerMsg | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (msg.schema_version !== SCHEMA_VERSION) return null;
  if (msg.kind === "welcome" || msg.kind === "event" || msg.kind === "reject" || msg.kind === "pong") {
    return msg as unknown as ServerMsg;
  }
  return null;
}

export function helloFrame(token: string, displayName: string): object {
  return { schema_version: SCHEMA_VERSION, kind: "hello", token, display_name: displayName };
}

export function subscribeFrame(sessionId: string, fromSeq: number): object {
  return { schema_version: SCHEMA_VERSION, kind: "subscribe", session_id: sessionId, from_seq: fromSeq };
}

export function pingFrame(): object {
  return { schema_version: SCHEMA_VERSION, kind: "ping" };
}
