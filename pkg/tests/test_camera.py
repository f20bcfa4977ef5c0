import math
from dataclasses import replace

import pytest

from carebot.camera import (
    FRAME_HEIGHT,
    FRAME_WIDTH,
    ROBOT,
    UNKNOWN,
    CameraState,
    apply_camera_pan,
    decode_rle,
    render_frame,
)
from carebot.world import FREE, OBSTACLE, Pose, RobotModel, load_scenario
from conftest import grid_scenario, open_room


class TestPanTilt:
    def test_right_steps_plus_30(self):
        cam = apply_camera_pan(CameraState(), "RIGHT")
        assert cam.pan_offset == pytest.approx(math.radians(30))

    def test_left_steps_minus_30(self):
        cam = apply_camera_pan(CameraState(), "LEFT")
        assert cam.pan_offset == pytest.approx(math.radians(-30))

    def test_pan_saturates_at_90(self):
        cam = CameraState(pan_steps=3)
        assert apply_camera_pan(cam, "RIGHT").pan_offset == pytest.approx(math.pi / 2)

    def test_tilt_saturates(self):
        cam = CameraState(tilt_step=-3)
        assert apply_camera_pan(cam, "DOWN").tilt_step == -3
        assert apply_camera_pan(CameraState(tilt_step=3), "UP").tilt_step == 3

    def test_tilt_up_down(self):
        cam = apply_camera_pan(CameraState(), "UP")
        assert cam.tilt_step == 1
        assert apply_camera_pan(cam, "DOWN").tilt_step == 0

    def test_unknown_direction(self):
        with pytest.raises(ValueError):
            apply_camera_pan(CameraState(), "SIDEWAYS")


class TestRenderFrame:
    def test_boxed_in_pocket_is_unknown_beyond_ring(self):
        rows = [
            "#########",
            "#.......#",
            "#.#####.#",
            "#.#...#.#",
            "#.#.R.#.#",
            "#.#...#.#",
            "#.#####.#",
            "#.......#",
            "#########",
        ]
        world = load_scenario(grid_scenario(rows))
        frame = render_frame(world, RobotModel(), CameraState(), 0, 0.0)
        # everything farther than the immediate obstacle ring is occluded
        for r, row in enumerate(frame.pixels):
            for c, code in enumerate(row):
                forward = FRAME_HEIGHT - 1 - r
                lateral = c - FRAME_WIDTH // 2
                if max(abs(forward), abs(lateral)) > 2:
                    assert code == UNKNOWN

    def test_robot_cell_marked(self, room_world, model):
        frame = render_frame(room_world, model, CameraState(), 3, 1.5)
        assert frame.pixels[FRAME_HEIGHT - 1][FRAME_WIDTH // 2] == ROBOT
        assert frame.seq == 3 and frame.timestamp == 1.5

    def test_pan_equals_rotated_heading(self, room_world, model):
        cam = CameraState(pan_steps=3)  # +90 degrees
        frame_panned = render_frame(room_world, model, cam, 0, 0.0)
        rotated = replace(
            room_world,
            true_pose=Pose(
                room_world.true_pose.x,
                room_world.true_pose.y,
                room_world.true_pose.theta + math.pi / 2,
            ),
        )
        frame_rotated = render_frame(rotated, model, CameraState(), 0, 0.0)
        assert frame_panned.pixels == frame_rotated.pixels

    def test_obstacle_visible_cells_behind_unknown(self, model):
        rows = [
            "############",
            "#..........#",
            "#.R...#....#",
            "#..........#",
            "############",
        ]
        world = load_scenario(grid_scenario(rows))
        frame = render_frame(world, model, CameraState(), 0, 0.0)
        bottom = FRAME_HEIGHT - 1
        center = FRAME_WIDTH // 2
        # heading east: cells straight ahead are rendered up the center column
        ahead = [frame.pixels[bottom - k][center] for k in range(0, 10)]
        assert ahead[0] == ROBOT
        assert ahead[1] == FREE and ahead[2] == FREE and ahead[3] == FREE
        assert ahead[4] == OBSTACLE
        assert all(code == UNKNOWN for code in ahead[5:])

    def test_open_room_free_count_matches_visibility_oracle(self, model):
        world = load_scenario(open_room(21, r_row=19, r_col=10))
        frame = render_frame(world, model, CameraState(), 0, 0.0)

        # oracle: dense sampling along each sight line, independent of the
        # production cell walker
        def visible(tx, ty):
            x0, y0 = world.true_pose.x, world.true_pose.y
            dist = math.hypot(tx - x0, ty - y0)
            steps = max(int(dist / 1e-4), 1)
            target = world.cell_index(tx, ty)
            for k in range(1, steps + 1):
                t = k / steps * dist
                px, py = x0 + (tx - x0) * t / dist, y0 + (ty - y0) * t / dist
                cell = world.cell_index(px, py)
                if cell == target:
                    return True
                ix, iy = cell
                if not (0 <= ix < world.width and 0 <= iy < world.height):
                    return False
                if world.grid[iy][ix] == OBSTACLE:
                    return False
            return True

        got_free = sum(row.count(FREE) for row in frame.pixels)
        want_free = 0
        pose = world.true_pose
        for r in range(FRAME_HEIGHT):
            for c in range(FRAME_WIDTH):
                forward = FRAME_HEIGHT - 1 - r
                lateral = c - FRAME_WIDTH // 2
                if forward == 0 and lateral == 0:
                    continue
                tx = pose.x + forward * world.cell_size
                ty = pose.y - lateral * world.cell_size  # right of east heading is -y
                ix, iy = world.cell_index(tx, ty)
                if not (0 <= ix < world.width and 0 <= iy < world.height):
                    continue
                if world.grid[iy][ix] == FREE and visible(tx, ty):
                    want_free += 1
        assert got_free == want_free


class TestRle:
    def test_round_trip(self, room_world, model):
        frame = render_frame(room_world, model, CameraState(), 0, 0.0)
        rle = frame.to_rle()
        assert sum(rle[0::2]) == FRAME_WIDTH * FRAME_HEIGHT
        assert decode_rle(rle, FRAME_WIDTH, FRAME_HEIGHT) == frame.pixels

    def test_decode_validates_totals(self):
        with pytest.raises(ValueError, match="covers"):
            decode_rle([3, 0], 2, 2)
        with pytest.raises(ValueError, match="pairs"):
            decode_rle([3], 2, 2)
        with pytest.raises(ValueError, match="bad run-length"):
            decode_rle([0, 0, 4, 0], 2, 2)
