"""Independent oracles for the simulation tests.

Each deliberately avoids the production code path it checks: ray
distances come from a fine-step march (not grid traversal), kinematics
from fine-step Euler integration (not closed-form arcs), policy
decisions from a literal re-enumeration, and alert counts from a
brute-force recount of band transitions.
"""

from __future__ import annotations

import math

import numpy as np

FREE = 0
OBSTACLE = 1


def ray_march_distance(
    grid: tuple[bytes, ...],
    cell_size: float,
    x: float,
    y: float,
    angle: float,
    max_dist: float,
    step: float = 1e-4,
) -> float | None:
    """First obstacle distance by marching sample points along the ray.

    Marches at `step`, then bisects the bracketing interval down to 1e-9
    so the reported boundary is far sharper than the march step.
    """
    height = len(grid)
    width = len(grid[0])
    dx, dy = math.cos(angle), math.sin(angle)

    def inside_obstacle(t: float) -> bool:
        px, py = x + t * dx, y + t * dy
        ix = math.floor(px / cell_size)
        iy = math.floor(py / cell_size)
        if 0 <= ix < width and 0 <= iy < height:
            return grid[iy][ix] == OBSTACLE
        return True

    n = int(max_dist / step) + 2
    ts = np.arange(1, n + 1) * step
    px = x + ts * dx
    py = y + ts * dy
    ix = np.floor(px / cell_size).astype(np.int64)
    iy = np.floor(py / cell_size).astype(np.int64)
    occ = np.ones(n, dtype=bool)
    in_bounds = (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
    flat = np.frombuffer(b"".join(grid), dtype=np.uint8).reshape(height, width)
    occ[in_bounds] = flat[iy[in_bounds], ix[in_bounds]] == OBSTACLE
    hits = np.nonzero(occ)[0]
    if len(hits) == 0:
        return None
    hi = ts[hits[0]]
    lo = hi - step
    while hi - lo > 1e-9:
        mid = (lo + hi) / 2.0
        if inside_obstacle(mid):
            hi = mid
        else:
            lo = mid
    if hi > max_dist:
        return None
    return hi


def euler_pose(
    x: float, y: float, theta: float, v: float, omega: float, dt: float, steps: int = 1000
) -> tuple[float, float, float]:
    """Fine-step Euler integration of the unicycle model over one period."""
    h = dt / steps
    for _ in range(steps):
        x += v * h * math.cos(theta)
        y += v * h * math.sin(theta)
        theta += omega * h
    return x, y, theta


CANDIDATE_ORDER = (
    ("FORWARD", 0, 0.0),
    ("TURN_LEFT_45", 1, math.pi / 4),
    ("TURN_RIGHT_45", 2, -math.pi / 4),
    ("TURN_LEFT_90", 3, math.pi / 2),
    ("TURN_RIGHT_90", 4, -math.pi / 2),
)


def enumerate_decision(
    visit_grid: tuple[tuple[int, ...], ...],
    pose_x: float,
    pose_y: float,
    pose_theta: float,
    clear_flags: tuple[bool, ...],
    cell_size: float,
) -> tuple[str, str]:
    """Literal re-statement of the coverage policy for cross-checking."""
    height = len(visit_grid)
    width = len(visit_grid[0])
    scored = []
    for action, sensor, rel in CANDIDATE_ORDER:
        if not clear_flags[sensor]:
            continue
        h = pose_theta + rel
        ix = math.floor((pose_x + cell_size * math.cos(h)) / cell_size)
        iy = math.floor((pose_y + cell_size * math.sin(h)) / cell_size)
        score = visit_grid[iy][ix] if 0 <= ix < width and 0 <= iy < height else 1 << 30
        scored.append((score, action))
    if not scored:
        return "ROTATE_180", "BLOCKED"
    best_score = min(s for s, _ in scored)
    action = next(a for s, a in scored if s == best_score)  # list is in tie-break order
    if action == "FORWARD":
        return action, "CLEAR"
    return action, ("COVERAGE" if clear_flags[0] else "AVOID")


def count_band_exits(values: list[float], low: float, high: float) -> tuple[int, int]:
    """(low exits, high exits): transitions from in-band to out-of-band."""
    lows = highs = 0
    prev = "in"
    for v in values:
        band = "low" if v < low else ("high" if v > high else "in")
        if band == "low" and prev == "in":
            lows += 1
        if band == "high" and prev == "in":
            highs += 1
        prev = band
    return lows, highs
