// Drive pad: press-and-hold sends drive commands at 10 Hz, release sends
// one zero command. Disabled outside MANUAL mode, mirroring the server's
// MODE_CONFLICT arbitration.

import { buildCommand, nextCommandId } from "./protocol.js";

export type PadDirection = "fwd" | "back" | "left" | "right";

export const PAD_WHEELS: Record<PadDirection, [number, number]> = {
  fwd: [1, 1],
  back: [-1, -1],
  left: [-0.6, 0.6],
  right: [0.6, -0.6],
};

export const DRIVE_PERIOD_MS = 100;

export interface PadTimers {
  setInterval(fn: () => void, ms: number): unknown;
  clearInterval(handle: unknown): void;
}

export class DrivePad {
  private active: PadDirection | null = null;
  private handle: unknown = null;

  constructor(
    private readonly send: (line: string) => void,
    private readonly modeIsManual: () => boolean,
    private readonly timers: PadTimers = {
      setInterval: (fn, ms) => setInterval(fn, ms),
      clearInterval: (h) => clearInterval(h as number),
    },
  ) {}

  get held(): PadDirection | null {
    return this.active;
  }

  /** Returns false (and sends nothing) when the pad is gated off. */
  press(dir: PadDirection): boolean {
    if (!this.modeIsManual()) {
      return false;
    }
    if (this.active === dir) {
      return true;
    }
    this.releaseQuiet();
    this.active = dir;
    this.sendDrive(dir);
    this.handle = this.timers.setInterval(() => this.sendDrive(dir), DRIVE_PERIOD_MS);
    return true;
  }

  /** Stops the stream and sends the single zero command. */
  release(): void {
    if (this.active === null) {
      return;
    }
    this.releaseQuiet();
    const [left, right] = [0, 0];
    this.send(buildCommand("drive", { left, right }, nextCommandId("stop")));
  }

  /** Cancels without a stop command (used when the mode flips under us). */
  cancel(): void {
    this.releaseQuiet();
  }

  private releaseQuiet(): void {
    if (this.handle !== null) {
      this.timers.clearInterval(this.handle);
      this.handle = null;
    }
    this.active = null;
  }

  private sendDrive(dir: PadDirection): void {
    const [left, right] = PAD_WHEELS[dir];
    this.send(buildCommand("drive", { left, right }));
  }
}
