"""Dead-reckoning odometry and visit-count coverage policy.

Everything here is a pure function over value inputs: the navigator never
reads ground truth. Pose is estimated from encoder deltas alone, entered
cells are counted in a visit grid, and the motion policy greedily steers
toward the least-visited reachable neighbor so the robot keeps covering
new ground instead of circling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .world import EncoderDelta, Pose, RobotModel, UltrasonicReading, normalize_angle

# actions
FORWARD = "FORWARD"
TURN_LEFT_45 = "TURN_LEFT_45"
TURN_RIGHT_45 = "TURN_RIGHT_45"
TURN_LEFT_90 = "TURN_LEFT_90"
TURN_RIGHT_90 = "TURN_RIGHT_90"
ROTATE_180 = "ROTATE_180"
HALT = "HALT"

# reasons
CLEAR = "CLEAR"
AVOID = "AVOID"
COVERAGE = "COVERAGE"
BLOCKED = "BLOCKED"

# candidate order doubles as the tie-break preference; sensor indices match
# the fixed array order front, left45, right45, left90, right90
_CANDIDATES: tuple[tuple[str, int, float], ...] = (
    (FORWARD, 0, 0.0),
    (TURN_LEFT_45, 1, math.pi / 4),
    (TURN_RIGHT_45, 2, -math.pi / 4),
    (TURN_LEFT_90, 3, math.pi / 2),
    (TURN_RIGHT_90, 4, -math.pi / 2),
)

TURN_ANGLES = {
    TURN_LEFT_45: math.pi / 4,
    TURN_RIGHT_45: -math.pi / 4,
    TURN_LEFT_90: math.pi / 2,
    TURN_RIGHT_90: -math.pi / 2,
    ROTATE_180: math.pi,
}


@dataclass(frozen=True)
class NavParams:
    """Tunables for clearance gating and cell projection."""

    clear_threshold: float = 0.30
    cell_size: float = 0.10


@dataclass(frozen=True)
class MotionDecision:
    action: str
    reason: str


@dataclass(frozen=True)
class ClearanceSet:
    """Per-sensor clear/blocked flags; order matches the sensor array."""

    clear: tuple[bool, bool, bool, bool, bool, bool]
    threshold: float


@dataclass(frozen=True)
class NavState:
    """The navigator's memory: estimated pose, visit counts, last intent.

    last_cells holds every cell the body currently overlaps, so a cell is
    counted once per contiguous stay and again on re-entry.
    """

    est_pose: Pose
    visit_grid: tuple[tuple[int, ...], ...]
    current_intent: MotionDecision | None = None
    last_cells: frozenset[tuple[int, int]] = frozenset()
    last_center: tuple[int, int] | None = None
    just_marked: frozenset[tuple[int, int]] = frozenset()
    drift_count: int = 0

    @property
    def grid_height(self) -> int:
        return len(self.visit_grid)

    @property
    def grid_width(self) -> int:
        return len(self.visit_grid[0])

    def max_visit(self) -> int:
        return max(max(row) for row in self.visit_grid)

    def visited_cells(self) -> int:
        return sum(1 for row in self.visit_grid for n in row if n > 0)


def make_nav_state(start_pose: Pose, grid_width: int, grid_height: int) -> NavState:
    """Fresh navigator aligned to the world grid dimensions, all counts zero."""
    empty = tuple(tuple(0 for _ in range(grid_width)) for _ in range(grid_height))
    return NavState(est_pose=start_pose, visit_grid=empty)


def integrate_odometry(est: Pose, delta: EncoderDelta, model: RobotModel) -> Pose:
    """Advance the pose estimate by one encoder delta (exact arc update)."""
    per_tick = 2.0 * math.pi * model.wheel_radius / model.ticks_per_rev
    s_left = delta.left_ticks * per_tick
    s_right = delta.right_ticks * per_tick
    ds = (s_left + s_right) / 2.0
    # same straight-line cutoff as the drive step (1e-9 rad/s wheel difference)
    if abs(s_right - s_left) < model.wheel_radius * delta.dt * 1e-9:
        return Pose(est.x + ds * math.cos(est.theta),
                    est.y + ds * math.sin(est.theta),
                    est.theta)
    dtheta = (s_right - s_left) / model.wheel_base
    radius = ds / dtheta
    th1 = est.theta + dtheta
    return Pose(est.x + radius * (math.sin(th1) - math.sin(est.theta)),
                est.y - radius * (math.cos(th1) - math.cos(est.theta)),
                normalize_angle(th1))


def classify_clearance(
    readings: list[UltrasonicReading] | tuple[UltrasonicReading, ...],
    params: NavParams = NavParams(),
) -> ClearanceSet:
    """Flag each bearing clear or blocked.

    Blocked means an echo strictly closer than the threshold; NO_ECHO
    counts as clear (nothing within range at all).
    """
    if len(readings) != 6 or sorted(r.sensor_index for r in readings) != [0, 1, 2, 3, 4, 5]:
        raise ValueError("clearance needs exactly one reading per sensor index 0..5")
    by_index = sorted(readings, key=lambda r: r.sensor_index)
    flags = tuple(
        r.distance_m is None or r.distance_m >= params.clear_threshold for r in by_index
    )
    return ClearanceSet(clear=flags, threshold=params.clear_threshold)


def _cell_of(pose_x: float, pose_y: float, cell_size: float) -> tuple[int, int]:
    return math.floor(pose_x / cell_size), math.floor(pose_y / cell_size)


def _overlapped_cells(
    x: float, y: float, cell_size: float, reach: float,
    width: int, height: int,
) -> frozenset[tuple[int, int]]:
    """Grid cells a disc of radius `reach` at (x, y) overlaps (in bounds)."""
    cells = set()
    ix0 = math.floor((x - reach) / cell_size)
    ix1 = math.floor((x + reach) / cell_size)
    iy0 = math.floor((y - reach) / cell_size)
    iy1 = math.floor((y + reach) / cell_size)
    r2 = reach * reach
    for iy in range(max(iy0, 0), min(iy1, height - 1) + 1):
        for ix in range(max(ix0, 0), min(ix1, width - 1) + 1):
            cx = min(max(x, ix * cell_size), (ix + 1) * cell_size)
            cy = min(max(y, iy * cell_size), (iy + 1) * cell_size)
            if (cx - x) ** 2 + (cy - y) ** 2 < r2:
                cells.add((ix, iy))
    return frozenset(cells)


def mark_visited(nav: NavState, cell_size: float, reach: float = 0.0) -> NavState:
    """Count the cells currently under the estimated pose.

    The cell containing the pose counts once per entry: staying inside it
    is a no-op, leaving and coming back counts again. With a nonzero reach
    the surrounding footprint also counts as passed, once per contiguous
    overlap, so driving by a cell marks it without stopping there. An
    estimate outside the grid is clamped to the nearest cell and recorded
    as drift.
    """
    ix, iy = _cell_of(nav.est_pose.x, nav.est_pose.y, cell_size)
    drifted = not (0 <= ix < nav.grid_width and 0 <= iy < nav.grid_height)
    if drifted:
        ix = min(max(ix, 0), nav.grid_width - 1)
        iy = min(max(iy, 0), nav.grid_height - 1)
    center = (ix, iy)
    if drifted or reach <= 0.0:
        occupied = frozenset([center])
    else:
        occupied = _overlapped_cells(
            nav.est_pose.x, nav.est_pose.y, cell_size, reach,
            nav.grid_width, nav.grid_height,
        ) | {center}

    # entering a cell counts every time; merely passing within reach only
    # records the cell as seen (0 -> 1), so loops cannot inflate their
    # surroundings in lockstep and the least-visited gradient stays useful
    entered = center != nav.last_center
    changed = set()
    grid = None
    for cell in sorted(occupied - nav.last_cells):
        if cell == center:
            continue
        if nav.visit_grid[cell[1]][cell[0]] == 0:
            grid = grid or [list(row) for row in nav.visit_grid]
            grid[cell[1]][cell[0]] = 1
            changed.add(cell)
    if entered:
        grid = grid or [list(row) for row in nav.visit_grid]
        grid[center[1]][center[0]] += 1
        changed.add(center)
    if not changed and occupied == nav.last_cells and not drifted:
        return nav
    return replace(
        nav,
        visit_grid=tuple(tuple(row) for row in grid) if grid else nav.visit_grid,
        last_cells=occupied,
        last_center=center,
        just_marked=frozenset(changed),
        drift_count=nav.drift_count + (1 if drifted else 0),
    )


def choose_heading(
    nav: NavState,
    clearance: ClearanceSet,
    params: NavParams = NavParams(),
) -> MotionDecision:
    """Pick the next motion among forward and 45/90-degree turns.

    Each clear candidate is scored by the visit count of the cell one
    cell-size ahead along its heading; the least-visited wins, ties broken
    in the fixed candidate order (forward first). With nothing clear the
    robot turns around in place.
    """
    est = nav.est_pose
    cs = params.cell_size
    best: tuple[int, str] | None = None  # (score, action); order already encodes tie-break
    forward_clear = clearance.clear[0]
    for action, sensor_idx, rel in _CANDIDATES:
        if not clearance.clear[sensor_idx]:
            continue
        heading = est.theta + rel
        ix, iy = _cell_of(est.x + cs * math.cos(heading), est.y + cs * math.sin(heading), cs)
        if 0 <= ix < nav.grid_width and 0 <= iy < nav.grid_height:
            score = nav.visit_grid[iy][ix]
        else:
            score = 1 << 30
        if best is None or score < best[0]:
            best = (score, action)
    if best is None:
        return MotionDecision(action=ROTATE_180, reason=BLOCKED)
    _, action = best
    if action == FORWARD:
        return MotionDecision(action=FORWARD, reason=CLEAR)
    return MotionDecision(action=action, reason=COVERAGE if forward_clear else AVOID)
