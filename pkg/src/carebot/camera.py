"""Pan/tilt camera simulation: symbolic egocentric frames.

The camera does not produce raster imagery; it captures a 21x21 grid of
cell classifications in front of the robot (view axis = heading + pan),
with per-cell line-of-sight occlusion. Frames are run-length encoded for
the wire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .world import FREE, OBSTACLE, RobotModel, World

UNKNOWN = 2
ROBOT = 3

FRAME_WIDTH = 21
FRAME_HEIGHT = 21

PAN_STEP_RAD = math.pi / 6  # 30 degrees
PAN_LIMIT_STEPS = 3  # +/- 90 degrees
TILT_LIMIT_STEPS = 3

PAN_DIRECTIONS = ("LEFT", "RIGHT", "UP", "DOWN")


@dataclass(frozen=True)
class CameraState:
    """Pan in 30-degree steps within +/-90, tilt steps recorded but flat."""

    pan_steps: int = 0
    tilt_step: int = 0

    @property
    def pan_offset(self) -> float:
        return self.pan_steps * PAN_STEP_RAD


def apply_camera_pan(cam: CameraState, direction: str) -> CameraState:
    """Nudge the camera one step; saturates at the travel limits."""
    if direction == "RIGHT":
        return CameraState(min(cam.pan_steps + 1, PAN_LIMIT_STEPS), cam.tilt_step)
    if direction == "LEFT":
        return CameraState(max(cam.pan_steps - 1, -PAN_LIMIT_STEPS), cam.tilt_step)
    if direction == "UP":
        return CameraState(cam.pan_steps, min(cam.tilt_step + 1, TILT_LIMIT_STEPS))
    if direction == "DOWN":
        return CameraState(cam.pan_steps, max(cam.tilt_step - 1, -TILT_LIMIT_STEPS))
    raise ValueError(f"unknown pan direction {direction!r}")


@dataclass(frozen=True)
class CameraFrame:
    """Egocentric frame: rows top (far) to bottom (robot row)."""

    seq: int
    timestamp: float
    width: int
    height: int
    pixels: tuple[bytes, ...]

    def to_rle(self) -> list[int]:
        """Flat row-major run-length encoding: [count, code, count, code...]."""
        out: list[int] = []
        run_code = -1
        run_len = 0
        for row in self.pixels:
            for code in row:
                if code == run_code:
                    run_len += 1
                else:
                    if run_len:
                        out.extend((run_len, run_code))
                    run_code = code
                    run_len = 1
        if run_len:
            out.extend((run_len, run_code))
        return out


def decode_rle(rle: list[int], width: int, height: int) -> tuple[bytes, ...]:
    """Inverse of CameraFrame.to_rle; validates the total pixel count."""
    if len(rle) % 2 != 0:
        raise ValueError("run-length data must be (count, code) pairs")
    flat = bytearray()
    for i in range(0, len(rle), 2):
        count, code = rle[i], rle[i + 1]
        if count <= 0 or not 0 <= code <= 255:
            raise ValueError("bad run-length pair")
        flat.extend(bytes([code]) * count)
    if len(flat) != width * height:
        raise ValueError(f"run-length data covers {len(flat)} cells, expected {width * height}")
    return tuple(bytes(flat[r * width : (r + 1) * width]) for r in range(height))


def _line_of_sight_class(world: World, x0: float, y0: float, tx: float, ty: float) -> int:
    """Classify the cell containing (tx, ty) as seen from (x0, y0).

    Walks the sight line cell by cell; the first obstacle cell on the way
    hides everything past it (the obstacle itself is visible).
    """
    cs = world.cell_size
    target_ix, target_iy = world.cell_index(tx, ty)
    if not (0 <= target_ix < world.width and 0 <= target_iy < world.height):
        return UNKNOWN
    target_occ = OBSTACLE if world.grid[target_iy][target_ix] == OBSTACLE else FREE
    ix, iy = world.cell_index(x0, y0)
    if (ix, iy) == (target_ix, target_iy):
        return target_occ

    dist = math.hypot(tx - x0, ty - y0)
    dx = (tx - x0) / dist
    dy = (ty - y0) / dist
    if dx > 0:
        step_x, t_max_x, t_delta_x = 1, ((ix + 1) * cs - x0) / dx, cs / dx
    elif dx < 0:
        step_x, t_max_x, t_delta_x = -1, (ix * cs - x0) / dx, -cs / dx
    else:
        step_x, t_max_x, t_delta_x = 0, math.inf, math.inf
    if dy > 0:
        step_y, t_max_y, t_delta_y = 1, ((iy + 1) * cs - y0) / dy, cs / dy
    elif dy < 0:
        step_y, t_max_y, t_delta_y = -1, (iy * cs - y0) / dy, -cs / dy
    else:
        step_y, t_max_y, t_delta_y = 0, math.inf, math.inf

    while min(t_max_x, t_max_y) <= dist:
        if t_max_x < t_max_y:
            ix += step_x
            t_max_x += t_delta_x
        elif t_max_y < t_max_x:
            iy += step_y
            t_max_y += t_delta_y
        else:
            ix += step_x
            iy += step_y
            t_max_x += t_delta_x
            t_max_y += t_delta_y
        if (ix, iy) == (target_ix, target_iy):
            return target_occ
        if not (0 <= ix < world.width and 0 <= iy < world.height):
            return UNKNOWN
        if world.grid[iy][ix] == OBSTACLE:
            return UNKNOWN
    return target_occ


def render_frame(
    world: World,
    model: RobotModel,
    cam: CameraState,
    seq: int,
    timestamp: float,
) -> CameraFrame:
    """Capture one frame from the robot's position along heading + pan.

    The robot sits at the bottom-center cell; each other frame cell maps to
    a world point one cell-size per step forward/lateral along the view
    axis and is classified FREE/OBSTACLE if visible, UNKNOWN if occluded
    or outside the world.
    """
    pose = world.true_pose
    axis = pose.theta + cam.pan_offset
    fwd = (math.cos(axis), math.sin(axis))
    right = (math.sin(axis), -math.cos(axis))
    cs = world.cell_size

    rows: list[bytes] = []
    for r in range(FRAME_HEIGHT):
        forward_cells = FRAME_HEIGHT - 1 - r
        row = bytearray(FRAME_WIDTH)
        for c in range(FRAME_WIDTH):
            lateral_cells = c - FRAME_WIDTH // 2
            if forward_cells == 0 and lateral_cells == 0:
                row[c] = ROBOT
                continue
            tx = pose.x + (forward_cells * fwd[0] + lateral_cells * right[0]) * cs
            ty = pose.y + (forward_cells * fwd[1] + lateral_cells * right[1]) * cs
            row[c] = _line_of_sight_class(world, pose.x, pose.y, tx, ty)
        rows.append(bytes(row))
    return CameraFrame(
        seq=seq,
        timestamp=timestamp,
        width=FRAME_WIDTH,
        height=FRAME_HEIGHT,
        pixels=tuple(rows),
    )
