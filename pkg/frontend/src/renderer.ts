// Canvas painting for the symbolic camera frames.

import { CELL_FREE, CELL_OBSTACLE, CELL_ROBOT, CELL_UNKNOWN } from "./protocol.js";
import { DecodedFrame } from "./session.js";

export const CELL_COLORS: Record<number, string> = {
  [CELL_FREE]: "#d7e3cf",
  [CELL_OBSTACLE]: "#3d3a38",
  [CELL_UNKNOWN]: "#191d22",
  [CELL_ROBOT]: "#e4572e",
};

export interface PaintSurface {
  fillStyle: string | CanvasGradient | CanvasPattern;
  fillRect(x: number, y: number, w: number, h: number): void;
}

/** Paints every cell of the frame; returns the number of cells painted. */
export function paintFrame(ctx: PaintSurface, frame: DecodedFrame, cellPx: number): number {
  let painted = 0;
  for (let r = 0; r < frame.h; r++) {
    for (let c = 0; c < frame.w; c++) {
      const code = frame.cells[r * frame.w + c];
      ctx.fillStyle = CELL_COLORS[code] ?? "#ff00ff";
      ctx.fillRect(c * cellPx, r * cellPx, cellPx, cellPx);
      painted += 1;
    }
  }
  return painted;
}
