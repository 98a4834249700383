/**
 * Wire records shared with the gateway: versioned JSON, one record per
 * WebSocket message. Mirrors the server's line protocol.
 */

export const PROTOCOL_VERSION = 1;

export type Kind =
  | "reset"
  | "step"
  | "state"
  | "override"
  | "demo-start"
  | "demo-end"
  | "competence"
  | "save"
  | "load"
  | "saved"
  | "loaded"
  | "error";

export interface Scene {
  bounds: [number, number];
  obstacles: [number, number, number, number][];
  points_of_interest: [number, number][];
  tick_ms: number;
}

export interface StateRecord {
  [key: string]: unknown;
  v: number;
  kind: "state";
  t: number;
  continuous: number[];
  categorical: number[];
  adversaries: [number, number][];
  collected: number[];
  events: string[];
  demo: boolean;
  scene?: Scene;
  action?: { channel: string; args: number[] };
  source?: string;
}

export interface CompetenceRecord {
  [key: string]: unknown;
  v: number;
  kind: "competence";
  competence: number;
  confidence: number;
  window: number;
  segments: number;
}

export type Record_ = { v: number; kind: Kind; [key: string]: unknown };

export function makeMessage(kind: Kind, payload: object = {}): Record_ {
  return { v: PROTOCOL_VERSION, kind, ...payload };
}

export function encodeMessage(msg: Record_): string {
  return JSON.stringify(msg);
}

export function decodeMessage(raw: string): Record_ {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch (err) {
    throw new Error(`malformed record: ${(err as Error).message}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new Error("record must be an object");
  }
  const msg = parsed as Record_;
  if (msg.v !== PROTOCOL_VERSION) {
    throw new Error(`unsupported protocol version ${String(msg.v)}`);
  }
  if (typeof msg.kind !== "string") {
    throw new Error("record has no kind");
  }
  return msg;
}

export function isState(msg: Record_): msg is StateRecord {
  return msg.kind === "state";
}

export function isCompetence(msg: Record_): msg is CompetenceRecord {
  return msg.kind === "competence";
}
