// Session state: everything the console shows derives from the received
// message stream plus local edits, so a reconnect rebuilds the view from
// the fresh hello and stream alone.

import {
  AckPayload,
  AlertPayload,
  FramePayload,
  Mode,
  PROTOCOL_VERSION,
  ProtocolError,
  TelemetryPayload,
  WireMessage,
  decodeRle,
  parseMessage,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed" | "error";

export interface DecodedFrame {
  seq: number;
  w: number;
  h: number;
  cells: Uint8Array;
  pan: number;
  tilt: number;
}

export interface AlertEntry {
  kind: string;
  ts: number;
  text: string;
}

export interface SessionView {
  connection: ConnectionState;
  helloSeen: boolean;
  mode: Mode | null;
  telemetry: TelemetryPayload | null;
  frame: DecodedFrame | null;
  lastFrameSeq: number;
  droppedFrames: number;
  alerts: AlertEntry[]; // newest first
  lastNack: AckPayload | null;
  logs: string[];
  error: string | null;
}

export function freshView(): SessionView {
  return {
    connection: "connecting",
    helloSeen: false,
    mode: null,
    telemetry: null,
    frame: null,
    lastFrameSeq: -1,
    droppedFrames: 0,
    alerts: [],
    lastNack: null,
    logs: [],
    error: null,
  };
}

export const AUDIBLE_KINDS = new Set(["EMERGENCY", "MED_REMINDER"]);
const ALERT_FEED_LIMIT = 200;

function alertText(p: AlertPayload): string {
  if (p.kind === "MED_REMINDER") {
    return `medication: ${p.label ?? p.entry_id ?? "reminder"}`;
  }
  if (p.value !== undefined) {
    return `${p.kind}: ${p.value}`;
  }
  return p.kind;
}

/** Fold one message into the view. `cue` fires for audible alert kinds. */
export function applyMessage(
  view: SessionView,
  msg: WireMessage,
  cue: (kind: string) => void = () => {},
): SessionView {
  switch (msg.type) {
    case "hello": {
      const v = (msg.payload as { v?: unknown }).v;
      if (v !== PROTOCOL_VERSION) {
        return { ...view, error: `incompatible protocol version ${v}`, connection: "error" };
      }
      const mode = ((msg.payload as { mode?: Mode }).mode ?? null) as Mode | null;
      return { ...view, helloSeen: true, mode };
    }
    case "telemetry": {
      const telemetry = msg.payload as unknown as TelemetryPayload;
      return { ...view, telemetry, mode: telemetry.mode };
    }
    case "frame": {
      const p = msg.payload as unknown as FramePayload;
      if (p.seq <= view.lastFrameSeq) {
        return { ...view, droppedFrames: view.droppedFrames + 1 };
      }
      let cells: Uint8Array;
      try {
        cells = decodeRle(p.rle, p.w, p.h);
      } catch (err) {
        // keep the previous frame on malformed data
        return { ...view, logs: [`bad frame: ${err}`, ...view.logs].slice(0, 50) };
      }
      const frame: DecodedFrame = {
        seq: p.seq, w: p.w, h: p.h, cells, pan: p.pan ?? 0, tilt: p.tilt ?? 0,
      };
      return { ...view, frame, lastFrameSeq: p.seq };
    }
    case "alert": {
      const p = msg.payload as unknown as AlertPayload;
      if (AUDIBLE_KINDS.has(p.kind)) {
        cue(p.kind);
      }
      const entry: AlertEntry = { kind: p.kind, ts: msg.ts, text: alertText(p) };
      return { ...view, alerts: [entry, ...view.alerts].slice(0, ALERT_FEED_LIMIT) };
    }
    case "ack": {
      const p = msg.payload as unknown as AckPayload;
      if (!p.ok) {
        return { ...view, lastNack: p };
      }
      return view;
    }
    case "log": {
      const p = msg.payload as { level?: string; msg?: string };
      return { ...view, logs: [`${p.level}: ${p.msg}`, ...view.logs].slice(0, 50) };
    }
    default:
      return view;
  }
}

// -- live session ------------------------------------------------------------

export interface SocketLike {
  send(data: string): void;
  close(): void;
  // event arguments are opaque to the session, hence `any`
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  onopen: ((ev?: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onerror: ((ev?: any) => void) | null;
  onmessage: ((ev: { data: string } | any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory: SocketFactory;
  setTimer?: (fn: () => void, ms: number) => unknown;
  cue?: (kind: string) => void;
  onChange?: (view: SessionView) => void;
  backoffMs?: number[];
}

/**
 * Owns the WebSocket lifecycle: connects, feeds messages through
 * applyMessage, and reconnects with backoff after drops, rebuilding the
 * view from scratch each time.
 */
export class Session {
  view: SessionView = freshView();
  private socket: SocketLike | null = null;
  private retries = 0;
  private stopped = false;
  private readonly opts: Required<SessionOptions>;

  constructor(private readonly url: string, opts: SessionOptions) {
    this.opts = {
      socketFactory: opts.socketFactory,
      setTimer: opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms)),
      cue: opts.cue ?? (() => {}),
      onChange: opts.onChange ?? (() => {}),
      backoffMs: opts.backoffMs ?? [500, 1000, 2000, 5000],
    };
  }

  connect(): void {
    this.view = { ...freshView(), connection: "connecting" };
    this.emit();
    const socket = this.opts.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retries = 0;
      this.view = { ...this.view, connection: "open" };
      this.emit();
    };
    socket.onmessage = (ev) => {
      let msg: WireMessage;
      try {
        msg = parseMessage(ev.data);
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.view = {
            ...this.view,
            logs: [`bad message: ${err.message}`, ...this.view.logs].slice(0, 50),
          };
          this.emit();
          return;
        }
        throw err;
      }
      this.view = applyMessage(this.view, msg, this.opts.cue);
      this.emit();
    };
    socket.onclose = () => this.handleDrop("closed");
    socket.onerror = () => this.handleDrop("error");
  }

  send(line: string): void {
    if (this.socket && this.view.connection === "open") {
      this.socket.send(line);
    }
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }

  private handleDrop(state: ConnectionState): void {
    if (this.view.connection === state) {
      return;
    }
    this.view = { ...this.view, connection: state };
    this.emit();
    if (this.stopped || this.view.error) {
      return;
    }
    const delay = this.opts.backoffMs[Math.min(this.retries, this.opts.backoffMs.length - 1)];
    this.retries += 1;
    this.opts.setTimer(() => {
      if (!this.stopped) {
        this.connect();
      }
    }, delay);
  }

  private emit(): void {
    this.opts.onChange(this.view);
  }
}
