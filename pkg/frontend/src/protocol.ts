// Wire protocol types and helpers for the carebot teleop stream.
// One JSON message per WebSocket text frame; commands carry a client id,
// stream messages carry a server seq.

export const PROTOCOL_VERSION = 1;

export type Mode = "MANUAL" | "AUTONOMOUS";
export type PanDir = "LEFT" | "RIGHT" | "UP" | "DOWN";

export interface WireMessage {
  type: string;
  ts: number;
  payload: Record<string, unknown>;
  seq?: number;
  id?: string;
}

export interface TelemetryPayload {
  tick: number;
  mode: Mode;
  pose: { x: number; y: number; theta: number };
  readings: (number | null)[];
  vitals: { t: number; pulse_bpm: number; temp_c: number } | null;
  visits: { covered: number; free: number; max_count: number; fraction: number };
  encoders: { left: number; right: number };
  collided: boolean;
}

export interface FramePayload {
  seq: number;
  w: number;
  h: number;
  rle: number[];
  pan?: number;
  tilt?: number;
}

export interface AlertPayload {
  kind: string;
  value?: number;
  entry_id?: string;
  label?: string;
}

export interface AckPayload {
  id: string | null;
  ok: boolean;
  code?: string;
  detail?: string;
}

// cell codes inside frames
export const CELL_FREE = 0;
export const CELL_OBSTACLE = 1;
export const CELL_UNKNOWN = 2;
export const CELL_ROBOT = 3;

export class ProtocolError extends Error {}

export function parseMessage(text: string): WireMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new ProtocolError(`invalid JSON: ${err}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const msg = obj as Record<string, unknown>;
  if (typeof msg.type !== "string") {
    throw new ProtocolError("missing message type");
  }
  if (typeof msg.ts !== "number") {
    throw new ProtocolError("missing ts");
  }
  if (typeof msg.payload !== "object" || msg.payload === null) {
    throw new ProtocolError("missing payload");
  }
  return msg as unknown as WireMessage;
}

let commandCounter = 0;

export function nextCommandId(prefix = "ui"): string {
  commandCounter += 1;
  return `${prefix}-${commandCounter}`;
}

export function buildCommand(
  type: string,
  payload: Record<string, unknown>,
  id?: string,
): string {
  return JSON.stringify({ type, id: id ?? nextCommandId(), ts: Date.now() / 1000, payload });
}

export function decodeRle(rle: number[], w: number, h: number): Uint8Array {
  if (rle.length % 2 !== 0) {
    throw new ProtocolError("run-length data must be (count, code) pairs");
  }
  const total = w * h;
  const out = new Uint8Array(total);
  let at = 0;
  for (let i = 0; i < rle.length; i += 2) {
    const count = rle[i];
    const code = rle[i + 1];
    if (!Number.isInteger(count) || count <= 0 || !Number.isInteger(code) || code < 0) {
      throw new ProtocolError("bad run-length pair");
    }
    if (at + count > total) {
      throw new ProtocolError(`run-length data covers more than ${total} cells`);
    }
    out.fill(code, at, at + count);
    at += count;
  }
  if (at !== total) {
    throw new ProtocolError(`run-length data covers ${at} cells, expected ${total}`);
  }
  return out;
}
