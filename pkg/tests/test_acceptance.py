"""Acceptance criteria, one test per criterion.

Each test pins the stated tolerance and runtime budget and prints a
single PASS/FAIL line (run with -s or -v to see them live).
"""

import json
import math
import random
import time
from contextlib import contextmanager
from dataclasses import replace

import pytest

import carebot.cli as cli
from carebot.care import HysteresisState, Thresholds, ingest_vitals, synthesize_vitals
from carebot.care import MedEntry, MedSchedule, SchedulerState, tick_scheduler
from carebot.config import SimConfig, build_robot_model
from carebot.nav import integrate_odometry
from carebot.protocol import MessageError, decode_message, encode_message
from carebot.runner import load_bundled_scenario, run_headless
from carebot.world import (
    Pose,
    load_scenario,
    sense_ultrasonic,
    speed_of_sound,
    step_drive,
)
from conftest import grid_scenario, open_room
from oracles import count_band_exits, ray_march_distance
from test_protocol import build_corpus


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE[{name}] FAIL ({time.perf_counter() - start:.2f}s)")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s budget: {elapsed:.2f}s"
    print(f"ACCEPTANCE[{name}] PASS ({elapsed:.2f}s < {budget_s:.0f}s)")


def random_scene(rng: random.Random):
    """A random closed map plus a pose strictly inside a free cell."""
    size = rng.randint(8, 18)
    rows = []
    for r in range(size):
        if r in (0, size - 1):
            rows.append("#" * size)
        else:
            rows.append(
                "#" + "".join(
                    "#" if rng.random() < 0.12 else "." for _ in range(size - 2)
                ) + "#"
            )
    free = [
        (ix, iy)
        for iy in range(1, size - 1)
        for ix in range(1, size - 1)
        if rows[size - 1 - iy][ix] == "."
    ]
    if not free:
        return random_scene(rng)
    ix, iy = rng.choice(free)
    marked = [list(r) for r in rows]
    marked[size - 1 - iy][ix] = "R"
    world = load_scenario(grid_scenario(["".join(r) for r in marked]))
    pose = Pose(
        (ix + rng.uniform(0.05, 0.95)) * 0.1,
        (iy + rng.uniform(0.05, 0.95)) * 0.1,
        rng.uniform(-math.pi, math.pi),
    )
    return replace(world, true_pose=pose)


def test_acoustics():
    with criterion("acoustics", 1.0):
        assert speed_of_sound(20.0) == 343.64
        rng = random.Random(101)
        model = build_robot_model(SimConfig())
        checked = 0
        while checked < 1000:
            world = random_scene(rng)
            world = replace(world, ambient_temp_c=rng.uniform(-40.0, 60.0))
            reading = sense_ultrasonic(world, model, rng.randrange(6))
            if reading.no_echo:
                continue
            c = speed_of_sound(world.ambient_temp_c)
            expect = 2.0 * reading.distance_m / c
            assert abs(reading.time_of_flight_s - expect) <= 1e-12 * expect
            checked += 1


def test_sensor_ray_cast_oracle():
    with criterion("sensor-oracle", 10.0):
        rng = random.Random(202)
        model = build_robot_model(SimConfig())
        for _ in range(500):
            world = random_scene(rng)
            idx = rng.randrange(6)
            spec = model.sensors[idx]
            got = sense_ultrasonic(world, model, idx).distance_m
            want = ray_march_distance(
                world.grid,
                world.cell_size,
                world.true_pose.x,
                world.true_pose.y,
                world.true_pose.theta + spec.bearing,
                spec.effective_range(),
            )
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-6)


def test_odometry_replay():
    with criterion("odometry", 5.0):
        cfg = SimConfig()
        model = build_robot_model(cfg)
        world = load_scenario(open_room(30, r_row=15, r_col=15))
        est = world.true_pose
        rng = random.Random(303)
        phase = 0
        for tick in range(10_000):
            if tick % 40 == 0:
                phase = rng.randrange(4)
            if phase == 0:
                cmd = (12.0, 12.0)
            elif phase == 1:
                cmd = (-6.0, 6.0)
            elif phase == 2:
                cmd = (10.0, 12.5)
            else:
                cmd = (rng.uniform(-14, 14), rng.uniform(-14, 14))
            result = step_drive(world, model, cmd, 0.05)
            world = result.world
            est = integrate_odometry(est, result.encoders, model)
        true = world.true_pose
        assert math.hypot(est.x - true.x, est.y - true.y) <= 1e-5
        assert abs((est.theta - true.theta + math.pi) % (2 * math.pi) - math.pi) <= 1e-5


def test_coverage_bundled_maps():
    with criterion("coverage", 30.0):
        cfg = SimConfig()
        report, _ = run_headless(
            load_bundled_scenario("open_room_20"), cfg, mode="autonomous", ticks=5000
        )
        assert report.coverage_fraction >= 0.95
        assert report.collisions == 0
        assert report.max_visit_count <= 6
        for name in ("pillars_20", "rooms_20", "cross_20"):
            report, _ = run_headless(
                load_bundled_scenario(name), cfg, mode="autonomous", ticks=5000
            )
            assert report.coverage_fraction >= 0.85, name
            assert report.collisions == 0, name


def test_care_rules():
    with criterion("care-rules", 5.0):
        th = Thresholds()
        for profile, channel in (("fever_ramp", "temp"), ("tachy_burst", "pulse")):
            samples = [synthesize_vitals(profile, float(t), 0) for t in range(0, 700)]
            hst = HysteresisState()
            alerts = []
            for s in samples:
                new, hst = ingest_vitals(s, th, hst)
                alerts.extend(new)
            if channel == "temp":
                values = [s.temp_c for s in samples]
                lows, highs = count_band_exits(values, th.temp_low, th.temp_high)
                got = sum(1 for a in alerts if a.kind == "TEMP_HIGH")
            else:
                values = [s.pulse_bpm for s in samples]
                lows, highs = count_band_exits(values, th.pulse_low, th.pulse_high)
                got = sum(1 for a in alerts if a.kind == "PULSE_HIGH")
            assert got == highs
            assert highs > 0

        sched = MedSchedule(entries=(
            MedEntry("m1", "morning", "08:00"),
            MedEntry("m2", "noon", "12:00"),
            MedEntry("m3", "evening", "19:30"),
            MedEntry("m4", "night", "22:15"),
        ))
        for step in (1.0, 10.0):  # 1 Hz and 0.1 Hz schedulers
            state = SchedulerState()
            fired = 0
            clock = 0.0
            _, state = tick_scheduler(sched, clock, state)
            while clock < 3 * 86400:
                clock += step
                alerts, state = tick_scheduler(sched, clock, state)
                fired += len(alerts)
            assert fired == 12, f"step={step}"


def test_protocol_round_trip_and_fuzz():
    with criterion("protocol", 30.0):
        corpus = build_corpus()
        assert len(corpus) >= 200
        assert len({m.type for m in corpus}) == 11
        for msg in corpus:
            assert decode_message(encode_message(msg)) == msg

        rng = random.Random(404)
        valid_lines = [encode_message(m) for m in corpus]
        crashes = 0
        for i in range(100_000):
            kind = i % 3
            if kind == 0:
                blob = bytes(rng.randint(0, 255) for _ in range(rng.randint(0, 80)))
            elif kind == 1:
                line = bytearray(rng.choice(valid_lines))
                for _ in range(rng.randint(1, 6)):
                    line[rng.randrange(len(line))] = rng.randint(0, 255)
                blob = bytes(line)
            else:
                blob = json.dumps({
                    "type": rng.choice(["telemetry", "drive", "bogus", 7, None]),
                    "ts": rng.choice([0, "x", None, 1e400]),
                    "id": rng.choice(["a", 1, None]),
                    "payload": rng.choice([{}, [], "p", {"left": "x"}]),
                }, default=str).encode()
            try:
                decode_message(blob)
            except MessageError:
                pass
            except Exception:
                crashes += 1
        assert crashes == 0


def test_cli_determinism(capsys):
    with criterion("determinism", 10.0):
        args = [
            "--scenario", "open_room_20", "--mode", "autonomous",
            "--ticks", "400", "--seed", "7",
        ]
        assert cli.main(list(args)) == 0
        first = json.loads(capsys.readouterr().out)
        assert cli.main(list(args)) == 0
        second = json.loads(capsys.readouterr().out)
        assert first["message_log_hash"] == second["message_log_hash"]
        assert first == second
