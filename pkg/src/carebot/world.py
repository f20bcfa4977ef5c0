"""Deterministic 2D occupancy-grid world.

Holds the simulated robot hardware (differential drive with encoders,
six single-ray ultrasonic sensors) and the physics that drives it:
exact arc kinematics, swept-disc collision against obstacle cells, and
temperature-dependent acoustic time of flight.

All state is immutable; stepping returns a new World. Two runs over the
same scenario, seed and command trace therefore produce identical values
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

FREE = 0
OBSTACLE = 1

# Maximum usable range by carrier frequency (kHz -> meters). Higher
# frequencies attenuate faster in air, so the table must never increase.
DEFAULT_RANGE_TABLE: tuple[tuple[float, float], ...] = (
    (25.0, 6.0),
    (40.0, 4.0),
    (100.0, 1.5),
    (200.0, 0.6),
)

# Collision search resolution along the swept path, in meters.
CONTACT_TOLERANCE_M = 1e-4

_TWO_PI = 2.0 * math.pi


class ScenarioError(ValueError):
    """Raised when a scenario map file cannot be parsed or is invalid.

    Carries the 1-based line/column of the offending input where that
    makes sense (0 when the problem is not tied to a location).
    """

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        if line:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


def speed_of_sound(temp_c: float) -> float:
    """Speed of sound in air (m/s) at the given temperature in Celsius.

    Valid for temperatures in [-40, +60] degrees; outside that window the
    linear model is not trusted and a ValueError is raised.
    """
    if not -40.0 <= temp_c <= 60.0:
        raise ValueError(f"temperature {temp_c} outside model range [-40, 60]")
    return 331.5 + 0.607 * temp_c


def normalize_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    wrapped = theta - _TWO_PI * math.floor((theta + math.pi) / _TWO_PI)
    # floor rounding can land exactly on +pi; fold it back
    if wrapped >= math.pi:
        wrapped -= _TWO_PI
    return wrapped


def max_range_for_frequency(
    frequency_khz: float,
    table: tuple[tuple[float, float], ...] = DEFAULT_RANGE_TABLE,
) -> float:
    """Maximum sensing range for a carrier frequency.

    Piecewise-linear interpolation over a non-increasing table, clamped at
    both ends, so f1 < f2 always implies range(f1) >= range(f2).
    """
    if frequency_khz <= 0:
        raise ValueError("frequency must be positive")
    if frequency_khz <= table[0][0]:
        return table[0][1]
    if frequency_khz >= table[-1][0]:
        return table[-1][1]
    for (f0, r0), (f1, r1) in zip(table, table[1:]):
        if f0 <= frequency_khz <= f1:
            u = (frequency_khz - f0) / (f1 - f0)
            return r0 + u * (r1 - r0)
    raise ValueError("range table not ordered by frequency")


@dataclass(frozen=True)
class Pose:
    """Robot pose: position in meters, heading in radians in [-pi, pi)."""

    x: float
    y: float
    theta: float

    def moved(self, x: float, y: float, theta: float) -> "Pose":
        return Pose(x, y, normalize_angle(theta))


@dataclass(frozen=True)
class UltrasonicSpec:
    """One ultrasonic transducer: mounting bearing and carrier frequency.

    The beam is modeled as a single ray along the bearing. max_range_m
    defaults from the frequency/range table.
    """

    bearing: float
    frequency_khz: float = 40.0
    max_range_m: float | None = None

    def effective_range(
        self, table: tuple[tuple[float, float], ...] = DEFAULT_RANGE_TABLE
    ) -> float:
        if self.max_range_m is not None:
            return self.max_range_m
        return max_range_for_frequency(self.frequency_khz, table)


def default_sensor_array(frequency_khz: float = 40.0) -> tuple[UltrasonicSpec, ...]:
    """Six rays: front, +/-45, +/-90 and rear.

    Index order is front(0), left45(1), right45(2), left90(3), right90(4),
    rear(5); navigation relies on this ordering.
    """
    bearings = (0.0, math.pi / 4, -math.pi / 4, math.pi / 2, -math.pi / 2, math.pi)
    return tuple(UltrasonicSpec(bearing=b, frequency_khz=frequency_khz) for b in bearings)


@dataclass(frozen=True)
class RobotModel:
    """Simulated chassis: wheel geometry, encoder resolution, sensor array."""

    wheel_radius: float = 0.032
    wheel_base: float = 0.14
    ticks_per_rev: int = 360
    max_wheel_rpm: float = 500.0
    body_radius: float = 0.06
    sensors: tuple[UltrasonicSpec, ...] = field(default_factory=default_sensor_array)

    def __post_init__(self):
        if len(self.sensors) != 6:
            raise ValueError("robot carries exactly 6 ultrasonic sensors")
        bearings = [round(s.bearing, 9) for s in self.sensors]
        if len(set(bearings)) != 6:
            raise ValueError("sensor bearings must be distinct")

    @property
    def max_wheel_speed(self) -> float:
        """Wheel speed limit in rad/s implied by the motor rpm rating."""
        return self.max_wheel_rpm * _TWO_PI / 60.0


@dataclass(frozen=True)
class UltrasonicReading:
    """Result of one ping. distance_m/time_of_flight_s are None on no echo."""

    sensor_index: int
    distance_m: float | None
    time_of_flight_s: float | None

    @property
    def no_echo(self) -> bool:
        return self.distance_m is None


@dataclass(frozen=True)
class EncoderDelta:
    """Per-step wheel rotation in encoder tick units (fractional).

    Tick values are real-valued: the full delivered rotation expressed in
    ticks. Integer quantization (what a telemetry counter would show) is
    applied downstream via round-accumulation, so nothing is lost here.
    """

    left_ticks: float
    right_ticks: float
    dt: float


@dataclass(frozen=True)
class World:
    """Closed occupancy grid plus the robot's ground-truth state.

    grid[iy][ix] is FREE or OBSTACLE with iy=0 the bottom row; a cell
    spans [ix*cell_size, (ix+1)*cell_size) x [iy*cell_size, (iy+1)*cell_size).
    wheel_angle_* accumulate the rotation actually delivered to each wheel
    (radians), which backs both encoder deltas and tick counters.
    """

    grid: tuple[bytes, ...]
    cell_size: float
    ambient_temp_c: float
    true_pose: Pose
    rng_seed: int
    meta: tuple[tuple[str, str], ...] = ()
    wheel_angle_left: float = 0.0
    wheel_angle_right: float = 0.0

    @property
    def width(self) -> int:
        return len(self.grid[0])

    @property
    def height(self) -> int:
        return len(self.grid)

    def cell_at(self, x: float, y: float) -> int:
        """Occupancy of the cell containing (x, y); outside counts as OBSTACLE."""
        ix = math.floor(x / self.cell_size)
        iy = math.floor(y / self.cell_size)
        if 0 <= iy < self.height and 0 <= ix < self.width:
            return self.grid[iy][ix]
        return OBSTACLE

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        return math.floor(x / self.cell_size), math.floor(y / self.cell_size)

    def free_cell_count(self) -> int:
        return sum(row.count(FREE) for row in self.grid)


# ---------------------------------------------------------------------------
# Scenario parsing

_GRID_GLYPHS = {"#": OBSTACLE, ".": FREE, "R": FREE}


def load_scenario(text: str) -> World:
    """Parse a scenario map into a World.

    Format: optional `key=value` header lines (temp_c, seed, cell_size;
    unknown keys are kept as metadata), then a rectangular grid of
    '#' (obstacle), '.' (free) and exactly one 'R' (robot start, facing
    east). The border must be fully closed. CRLF and a missing trailing
    newline are tolerated.
    """
    temp_c = 20.0
    seed = 0
    cell_size = 0.10
    meta: list[tuple[str, str]] = []

    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    grid_rows: list[bytes] = []
    start: tuple[int, int] | None = None  # (ix, iy_from_top)
    first_grid_line = 0
    in_grid = False

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip()
        if not in_grid:
            if not line:
                continue
            if "=" in line and line[0] not in _GRID_GLYPHS:
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                try:
                    if key == "temp_c":
                        temp_c = float(value)
                    elif key == "seed":
                        seed = int(value)
                        if seed < 0:
                            raise ValueError
                    elif key == "cell_size":
                        cell_size = float(value)
                        if cell_size <= 0:
                            raise ValueError
                    else:
                        meta.append((key, value))
                except ValueError:
                    raise ScenarioError(f"bad header value {value!r} for {key!r}", lineno, 1)
                continue
            in_grid = True
            first_grid_line = lineno
        if not line:
            if lineno < len(lines) and any(l.strip() for l in lines[lineno:]):
                raise ScenarioError("blank line inside grid", lineno, 1)
            break
        row = bytearray(len(line))
        for col, ch in enumerate(line, start=1):
            if ch not in _GRID_GLYPHS:
                raise ScenarioError(f"unknown glyph {ch!r}", lineno, col)
            row[col - 1] = _GRID_GLYPHS[ch]
            if ch == "R":
                if start is not None:
                    raise ScenarioError("duplicate start marker 'R'", lineno, col)
                start = (col - 1, lineno - first_grid_line)
        grid_rows.append(bytes(row))

    if not grid_rows:
        raise ScenarioError("no grid found")
    width = len(grid_rows[0])
    for i, row in enumerate(grid_rows):
        if len(row) != width:
            raise ScenarioError(
                f"ragged row: expected {width} cells, got {len(row)}",
                first_grid_line + i,
                len(row) + 1,
            )
    if len(grid_rows) < 3 or width < 3:
        raise ScenarioError("grid must be at least 3x3", first_grid_line, 1)
    for i, row in enumerate(grid_rows):
        edge_cols = range(width) if i in (0, len(grid_rows) - 1) else (0, width - 1)
        for col in edge_cols:
            if row[col] != OBSTACLE:
                raise ScenarioError("open border", first_grid_line + i, col + 1)
    if start is None:
        raise ScenarioError("missing start marker 'R'", first_grid_line, 1)
    if not -40.0 <= temp_c <= 60.0:
        raise ScenarioError(f"temp_c {temp_c} outside [-40, 60]")

    # file rows run top to bottom; flip so iy=0 is the bottom row
    grid = tuple(reversed(grid_rows))
    ix, iy_top = start
    iy = len(grid_rows) - 1 - iy_top
    pose = Pose(x=(ix + 0.5) * cell_size, y=(iy + 0.5) * cell_size, theta=0.0)
    return World(
        grid=grid,
        cell_size=cell_size,
        ambient_temp_c=temp_c,
        true_pose=pose,
        rng_seed=seed,
        meta=tuple(meta),
    )


# ---------------------------------------------------------------------------
# Ray casting

def cast_ray(
    grid: tuple[bytes, ...],
    cell_size: float,
    x: float,
    y: float,
    angle: float,
    max_dist: float,
) -> float | None:
    """Distance from (x, y) along `angle` to the first OBSTACLE cell boundary.

    Exact grid traversal: advances boundary to boundary, so the returned
    distance is the precise ray/cell-edge intersection. A crossing that
    lands exactly on a cell corner steps diagonally (the two cells touched
    only at the corner point are not considered hit). Returns None when the
    first obstacle lies beyond max_dist.
    """
    height = len(grid)
    width = len(grid[0])
    dx = math.cos(angle)
    dy = math.sin(angle)
    ix = math.floor(x / cell_size)
    iy = math.floor(y / cell_size)

    if dx > 0:
        step_x, t_max_x = 1, ((ix + 1) * cell_size - x) / dx
        t_delta_x = cell_size / dx
    elif dx < 0:
        step_x, t_max_x = -1, (ix * cell_size - x) / dx
        t_delta_x = -cell_size / dx
    else:
        step_x, t_max_x, t_delta_x = 0, math.inf, math.inf
    if dy > 0:
        step_y, t_max_y = 1, ((iy + 1) * cell_size - y) / dy
        t_delta_y = cell_size / dy
    elif dy < 0:
        step_y, t_max_y = -1, (iy * cell_size - y) / dy
        t_delta_y = -cell_size / dy
    else:
        step_y, t_max_y, t_delta_y = 0, math.inf, math.inf

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            ix += step_x
            t_max_x += t_delta_x
        elif t_max_y < t_max_x:
            t = t_max_y
            iy += step_y
            t_max_y += t_delta_y
        else:
            # exact corner crossing: enter the diagonal neighbor
            t = t_max_x
            ix += step_x
            iy += step_y
            t_max_x += t_delta_x
            t_max_y += t_delta_y
        if t > max_dist:
            return None
        if not (0 <= ix < width and 0 <= iy < height):
            return t  # off-grid counts as obstacle; unreachable in closed worlds
        if grid[iy][ix] == OBSTACLE:
            return t


def sense_ultrasonic(world: World, model: RobotModel, index: int) -> UltrasonicReading:
    """Ping one sensor and return its reading at the world's temperature."""
    if not 0 <= index < len(model.sensors):
        raise IndexError(f"sensor index {index} out of range")
    spec = model.sensors[index]
    pose = world.true_pose
    dist = cast_ray(
        world.grid,
        world.cell_size,
        pose.x,
        pose.y,
        pose.theta + spec.bearing,
        spec.effective_range(),
    )
    if dist is None:
        return UltrasonicReading(index, None, None)
    tof = 2.0 * dist / speed_of_sound(world.ambient_temp_c)
    return UltrasonicReading(index, dist, tof)


# ---------------------------------------------------------------------------
# Drive

def disc_hits_obstacle(
    grid: tuple[bytes, ...], cell_size: float, x: float, y: float, radius: float
) -> bool:
    """True if a disc at (x, y) overlaps any OBSTACLE cell (or leaves the grid)."""
    height = len(grid)
    width = len(grid[0])
    ix0 = math.floor((x - radius) / cell_size)
    ix1 = math.floor((x + radius) / cell_size)
    iy0 = math.floor((y - radius) / cell_size)
    iy1 = math.floor((y + radius) / cell_size)
    r2 = radius * radius
    for iy in range(iy0, iy1 + 1):
        for ix in range(ix0, ix1 + 1):
            if 0 <= iy < height and 0 <= ix < width:
                if grid[iy][ix] != OBSTACLE:
                    continue
            # clamp-to-rectangle distance from disc center to this cell
            cx = min(max(x, ix * cell_size), (ix + 1) * cell_size)
            cy = min(max(y, iy * cell_size), (iy + 1) * cell_size)
            if (cx - x) ** 2 + (cy - y) ** 2 < r2:
                return True
    return False


def _arc_pose(pose: Pose, v: float, omega: float, straight: bool, t: float) -> Pose:
    """Pose after driving t seconds at body speed v and turn rate omega."""
    if straight:
        return Pose(pose.x + v * t * math.cos(pose.theta),
                    pose.y + v * t * math.sin(pose.theta),
                    pose.theta)
    th1 = pose.theta + omega * t
    radius = v / omega
    return Pose(pose.x + radius * (math.sin(th1) - math.sin(pose.theta)),
                pose.y - radius * (math.cos(th1) - math.cos(pose.theta)),
                normalize_angle(th1))


@dataclass(frozen=True)
class DriveResult:
    """Outcome of one drive step."""

    world: World
    encoders: EncoderDelta
    collided: bool
    clamped: bool


_SWEEP_SUBSTEPS = 16


def step_drive(
    world: World,
    model: RobotModel,
    cmd: tuple[float, float],
    dt: float,
) -> DriveResult:
    """Advance the robot by one exact differential-drive arc.

    cmd is (left, right) wheel angular velocity in rad/s; values beyond the
    motor limit are clamped and flagged. If the swept body disc would enter
    an obstacle cell, motion stops at first contact (located by substep
    scan plus bisection to CONTACT_TOLERANCE_M) and collided is set. The
    encoder delta always reflects the rotation actually delivered.
    """
    if not 0.0 < dt <= 0.5:
        raise ValueError(f"dt {dt} outside (0, 0.5]")
    limit = model.max_wheel_speed
    wl, wr = cmd
    clamped = abs(wl) > limit or abs(wr) > limit
    wl = min(max(wl, -limit), limit)
    wr = min(max(wr, -limit), limit)

    r = model.wheel_radius
    v = r * (wl + wr) / 2.0
    straight = abs(wl - wr) < 1e-9
    omega = 0.0 if straight else r * (wr - wl) / model.wheel_base

    pose = world.true_pose
    path_len = abs(v) * dt

    fraction = 1.0
    collided = False
    if path_len > 0.0:
        # coarse scan for the first colliding substep, then bisect the bracket
        free_at = 0.0
        hit_at = None
        for k in range(1, _SWEEP_SUBSTEPS + 1):
            s = k / _SWEEP_SUBSTEPS
            p = _arc_pose(pose, v, omega, straight, s * dt)
            if disc_hits_obstacle(world.grid, world.cell_size, p.x, p.y, model.body_radius):
                hit_at = s
                break
            free_at = s
        if hit_at is not None:
            collided = True
            lo, hi = free_at, hit_at
            while (hi - lo) * path_len > CONTACT_TOLERANCE_M:
                mid = (lo + hi) / 2.0
                p = _arc_pose(pose, v, omega, straight, mid * dt)
                if disc_hits_obstacle(world.grid, world.cell_size, p.x, p.y, model.body_radius):
                    hi = mid
                else:
                    lo = mid
            fraction = lo

    new_pose = _arc_pose(pose, v, omega, straight, fraction * dt)
    d_left = wl * dt * fraction
    d_right = wr * dt * fraction
    ticks = model.ticks_per_rev / _TWO_PI
    delta = EncoderDelta(left_ticks=d_left * ticks, right_ticks=d_right * ticks, dt=dt)
    new_world = replace(
        world,
        true_pose=new_pose,
        wheel_angle_left=world.wheel_angle_left + d_left,
        wheel_angle_right=world.wheel_angle_right + d_right,
    )
    return DriveResult(world=new_world, encoders=delta, collided=collided, clamped=clamped)


def quantized_ticks(wheel_angle: float, ticks_per_rev: int) -> int:
    """Integer tick count a hardware counter would report for a wheel angle.

    Round-accumulation: the counter tracks round(total revolutions * tpr),
    so successive deltas carry the fractional remainder instead of losing it.
    """
    return round(wheel_angle / _TWO_PI * ticks_per_rev)
