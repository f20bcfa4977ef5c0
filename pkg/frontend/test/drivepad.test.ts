import { describe, expect, it } from "vitest";
import { DRIVE_PERIOD_MS, DrivePad, PadTimers } from "../src/drivepad.js";

class FakeTimers implements PadTimers {
  private intervals = new Map<number, { fn: () => void; ms: number; next: number }>();
  private now = 0;
  private nextHandle = 1;

  setInterval(fn: () => void, ms: number): unknown {
    const handle = this.nextHandle++;
    this.intervals.set(handle, { fn, ms, next: this.now + ms });
    return handle;
  }

  clearInterval(handle: unknown): void {
    this.intervals.delete(handle as number);
  }

  advance(ms: number): void {
    const target = this.now + ms;
    for (;;) {
      let soonest: { fn: () => void; ms: number; next: number } | null = null;
      for (const entry of this.intervals.values()) {
        if (entry.next <= target && (soonest === null || entry.next < soonest.next)) {
          soonest = entry;
        }
      }
      if (!soonest) {
        break;
      }
      this.now = soonest.next;
      soonest.next += soonest.ms;
      soonest.fn();
    }
    this.now = target;
  }
}

function makePad(manual = true) {
  const sent: { left: number; right: number }[] = [];
  const timers = new FakeTimers();
  const pad = new DrivePad(
    (line) => sent.push(JSON.parse(line).payload),
    () => manual,
    timers,
  );
  return { pad, sent, timers };
}

describe("DrivePad", () => {
  it("hold forward one second sends ten drives then a single stop", () => {
    const { pad, sent, timers } = makePad();
    expect(pad.press("fwd")).toBe(true);
    timers.advance(1000 - DRIVE_PERIOD_MS / 2); // release just before the 1 s tick
    pad.release();
    const drives = sent.filter((p) => p.left !== 0 || p.right !== 0);
    const stops = sent.filter((p) => p.left === 0 && p.right === 0);
    expect(drives.length).toBeGreaterThanOrEqual(9);
    expect(drives.length).toBeLessThanOrEqual(11);
    expect(stops.length).toBe(1);
    expect(sent[sent.length - 1]).toEqual({ left: 0, right: 0 });
    expect(drives.every((p) => p.left === 1 && p.right === 1)).toBe(true);
  });

  it("no further messages after release", () => {
    const { pad, sent, timers } = makePad();
    pad.press("fwd");
    timers.advance(300);
    pad.release();
    const count = sent.length;
    timers.advance(2000);
    expect(sent.length).toBe(count);
  });

  it("pad is inert outside MANUAL", () => {
    const { pad, sent, timers } = makePad(false);
    expect(pad.press("fwd")).toBe(false);
    timers.advance(1000);
    pad.release();
    expect(sent).toEqual([]);
  });

  it("direction wheel pairs match the teleop convention", () => {
    const { pad, sent } = makePad();
    pad.press("back");
    pad.release();
    pad.press("left");
    pad.release();
    pad.press("right");
    pad.release();
    const drives = sent.filter((p) => p.left !== 0 || p.right !== 0);
    expect(drives).toEqual([
      { left: -1, right: -1 },
      { left: -0.6, right: 0.6 },
      { left: 0.6, right: -0.6 },
    ]);
  });

  it("release without press is a no-op", () => {
    const { pad, sent } = makePad();
    pad.release();
    expect(sent).toEqual([]);
  });

  it("cancel stops the stream without a stop command", () => {
    const { pad, sent, timers } = makePad();
    pad.press("fwd");
    timers.advance(250);
    pad.cancel();
    const before = sent.length;
    timers.advance(1000);
    expect(sent.length).toBe(before);
    expect(sent.every((p) => p.left === 1 && p.right === 1)).toBe(true);
  });

  it("switching directions restarts the stream cleanly", () => {
    const { pad, sent, timers } = makePad();
    pad.press("fwd");
    timers.advance(200);
    pad.press("left");
    timers.advance(200);
    pad.release();
    const stops = sent.filter((p) => p.left === 0 && p.right === 0);
    expect(stops.length).toBe(1);
  });
});
