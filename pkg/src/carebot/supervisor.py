"""Tick loop, mode arbitration and message fan-out.

The supervisor is the single writer over all simulation state. Each tick
runs a fixed phase order: drain commands, sweep sensors, pick wheel
speeds (manual setpoint or coverage policy), step the drive, integrate
odometry and mark coverage, run the wearable, then emit messages with
alerts ahead of telemetry. Everything downstream (CLI log hashing, the
network service) consumes the returned message list.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

from . import care as care_mod
from . import nav as nav_mod
from .camera import CameraState, apply_camera_pan, render_frame
from .config import SimConfig, build_robot_model
from .protocol import (
    BAD_SCHEDULE,
    BAD_VERSION,
    COMMAND_TYPES,
    MODE_CONFLICT,
    NOT_A_COMMAND,
    PROTOCOL_VERSION,
    Message,
)
from .world import (
    RobotModel,
    ScenarioError,
    World,
    disc_hits_obstacle,
    quantized_ticks,
    sense_ultrasonic,
    step_drive,
)

MANUAL = "MANUAL"
AUTONOMOUS = "AUTONOMOUS"


@dataclass(frozen=True)
class Outbound:
    """A message leaving the supervisor; target None means broadcast."""

    target: str | None
    message: Message


class Supervisor:
    """Owns the world and runs the control loop; see module docstring."""

    def __init__(self, world: World, cfg: SimConfig | None = None,
                 model: RobotModel | None = None,
                 vitals_script: tuple[tuple[float, float, float], ...] | None = None,
                 schedule: care_mod.MedSchedule | None = None):
        self.cfg = cfg or SimConfig()
        self.model = model or build_robot_model(self.cfg)
        if disc_hits_obstacle(world.grid, world.cell_size,
                              world.true_pose.x, world.true_pose.y, self.model.body_radius):
            raise ScenarioError("start position collides with an obstacle "
                                f"(body radius {self.model.body_radius})")
        self.world = world
        self.mode = MANUAL
        self.cam = CameraState()
        self.nav = nav_mod.make_nav_state(world.true_pose, world.width, world.height)
        self.nav_params = nav_mod.NavParams(
            clear_threshold=self.cfg.clear_threshold, cell_size=world.cell_size
        )
        self.care = care_mod.CareState(
            thresholds=care_mod.Thresholds(
                pulse_low=self.cfg.pulse_low, pulse_high=self.cfg.pulse_high,
                temp_low=self.cfg.temp_low, temp_high=self.cfg.temp_high,
            ),
            schedule=schedule or care_mod.MedSchedule(),
        )
        self.vitals_script = vitals_script
        self.tick_count = 0
        self.clock = 0.0
        self.frame_seq = 0
        self.collisions = 0
        self.drive_setpoint = (0.0, 0.0)
        self.turn_remaining = 0.0
        self.leg_remaining = 0.0
        self.last_sample: care_mod.VitalsSample | None = None
        self.last_collided = False
        self.pending: deque[tuple[str | None, Message]] = deque()
        self._vitals_next_t = 0.0
        self._clock_start_s = care_mod.parse_time_of_day(self.cfg.clock_start)
        self._free_cells = world.free_cell_count()
        self._covered = 0
        self._max_visit = 0
        self._drift_seen = 0
        # the robot is already standing on its start cell
        self.nav = nav_mod.mark_visited(self.nav, world.cell_size)
        self._account_visit(self.nav.just_marked)
        self._stall_rounds = 0
        # forward legs are vetoed when a 45-degree ray reads closer than
        # this: on the cell-center lattice such an echo can only be an
        # obstacle poking into the swept corridor that the front ray cannot
        # see (hazard echoes land at <= 1.5 cells, legitimate ones at >= 2.1)
        self._corner_guard = 1.8 * world.cell_size

    # -- commands -----------------------------------------------------------

    def enqueue_command(self, msg: Message, client: str | None = None) -> None:
        """Queue a decoded command; it is applied at the next tick start."""
        self.pending.append((client, msg))

    def handle_command(self, cmd: Message) -> tuple[Message, list[Message]]:
        """Apply one command immediately; returns (ack, alert messages)."""
        ack_payload: dict = {"id": cmd.id, "ok": True}
        alerts: list[Message] = []

        def nack(code: str, detail: str) -> None:
            ack_payload.update(ok=False, code=code, detail=detail)

        if cmd.type == "hello":
            if cmd.payload.get("v") != PROTOCOL_VERSION:
                nack(BAD_VERSION, f"protocol version {PROTOCOL_VERSION} required")
        elif cmd.type == "mode_set":
            self._set_mode(cmd.payload["mode"])
        elif cmd.type == "drive":
            if self.mode != MANUAL:
                nack(MODE_CONFLICT, "drive commands are accepted in MANUAL mode only")
            else:
                limit = self.model.max_wheel_speed
                self.drive_setpoint = (cmd.payload["left"] * limit, cmd.payload["right"] * limit)
        elif cmd.type == "camera_pan":
            self.cam = apply_camera_pan(self.cam, cmd.payload["dir"])
        elif cmd.type == "med_schedule_set":
            try:
                schedule = care_mod.MedSchedule.from_payload(cmd.payload["entries"])
            except care_mod.CareError as exc:
                nack(BAD_SCHEDULE, str(exc))
            else:
                self.care = replace(self.care, schedule=schedule)
        elif cmd.type == "emergency_press":
            alert = care_mod.press_emergency(self.clock)
            self.care = self.care.with_alerts([alert])
            alerts.append(self._alert_message(alert))
        else:
            nack(NOT_A_COMMAND, f"{cmd.type!r} is not a client command")

        ack = Message(type="ack", ts=self.clock, payload=ack_payload)
        return ack, alerts

    def _set_mode(self, mode: str) -> None:
        self.mode = mode
        # halt wheels and forget the old intent either way; in AUTONOMOUS the
        # next tick sweeps sensors before any motion
        self.nav = replace(self.nav, current_intent=None)
        self.drive_setpoint = (0.0, 0.0)
        self.turn_remaining = 0.0
        self.leg_remaining = 0.0
        self._stall_rounds = 0

    # -- tick ---------------------------------------------------------------

    def tick(self, dt: float | None = None) -> list[Outbound]:
        """Advance one control period; returns the messages to publish."""
        dt = self.cfg.control_dt if dt is None else dt
        acks: list[Outbound] = []
        alert_out: list[Outbound] = []
        logs: list[Outbound] = []

        # 1. commands
        while self.pending:
            client, cmd = self.pending.popleft()
            ack, alerts = self.handle_command(cmd)
            acks.append(Outbound(client, ack))
            alert_out.extend(Outbound(None, a) for a in alerts)

        # 2. sensor sweep
        readings = [sense_ultrasonic(self.world, self.model, i) for i in range(6)]

        # 3. wheel command
        wheel_cmd = self._wheel_command(readings)

        # 4. drive
        prev_theta = self.nav.est_pose.theta
        result = step_drive(self.world, self.model, wheel_cmd, dt)
        self.world = result.world
        self.last_collided = result.collided
        if result.collided:
            self.collisions += 1
        if result.clamped:
            logs.append(self._log("WARNING", "wheel command clamped to motor limit"))

        # 5. odometry + coverage
        prev_est = self.nav.est_pose
        est = nav_mod.integrate_odometry(prev_est, result.encoders, self.model)
        self.nav = replace(self.nav, est_pose=est)
        if self.turn_remaining != 0.0:
            turned = _angle_diff(est.theta, prev_theta)
            remaining = self.turn_remaining - turned
            if abs(remaining) < 1e-9 or remaining * self.turn_remaining < 0:
                remaining = 0.0
            self.turn_remaining = remaining
        if self.leg_remaining != 0.0:
            self.leg_remaining -= math.hypot(est.x - prev_est.x, est.y - prev_est.y)
            if self.leg_remaining < 1e-9 or result.collided:
                self.leg_remaining = 0.0
        before = self.nav
        self.nav = nav_mod.mark_visited(self.nav, self.world.cell_size, self.cfg.coverage_reach)
        if self.nav is not before:
            self._account_visit(self.nav.just_marked)
        if self.nav.drift_count > self._drift_seen:
            self._drift_seen = self.nav.drift_count
            logs.append(self._log("WARNING", "odometry estimate outside grid; clamped"))

        # 6. wearable
        alert_out.extend(Outbound(None, m) for m in self._care_tick(logs))

        # 7. telemetry + frame
        stream: list[Outbound] = [Outbound(None, self._telemetry_message(readings))]
        if self.tick_count % self.cfg.frame_every == 0:
            frame = render_frame(self.world, self.model, self.cam, self.frame_seq, self.clock)
            self.frame_seq += 1
            stream.append(Outbound(None, self._frame_message(frame)))

        self.tick_count += 1
        self.clock += dt
        return acks + alert_out + stream + logs

    def _wheel_command(self, readings) -> tuple[float, float]:
        if self.mode == MANUAL:
            return self.drive_setpoint
        dt = self.cfg.control_dt
        if abs(self.turn_remaining) > 1e-9:
            return self._turn_wheels(self.turn_remaining, dt)
        if self.leg_remaining > 1e-9:
            return self._leg_wheels(self.leg_remaining, dt)

        # decision round: happens only at rest, on the cell-center lattice
        clearance = nav_mod.classify_clearance(readings, self.nav_params)
        clearance = self._guarded_clearance(clearance, readings)
        decision = nav_mod.choose_heading(self.nav, clearance, self.nav_params)
        if decision.action != nav_mod.FORWARD:
            self._stall_rounds += 1
            if self._stall_rounds >= 4:
                # spinning in place without progress: back out the way we came
                decision = nav_mod.MotionDecision(nav_mod.ROTATE_180, nav_mod.BLOCKED)
                self._stall_rounds = 0
        else:
            self._stall_rounds = 0
        self.nav = replace(self.nav, current_intent=decision)
        if decision.action == nav_mod.FORWARD:
            self.leg_remaining = self._leg_length()
            return self._leg_wheels(self.leg_remaining, dt)
        if decision.action == nav_mod.HALT:
            return (0.0, 0.0)
        self.turn_remaining = nav_mod.TURN_ANGLES[decision.action]
        return self._turn_wheels(self.turn_remaining, dt)

    # for each candidate bearing, the sensors 45 degrees to either side of
    # it (where one exists) watch for obstacle corners poking into the leg
    # the candidate would drive after its turn
    _GUARD_RAYS = {0: (1, 2), 1: (0, 3), 2: (0, 4), 3: (1,), 4: (2,)}

    def _guarded_clearance(self, clearance, readings):
        """Veto candidates whose leg corridor shows a corner intrusion.

        A close echo on a ray 45 degrees off a candidate heading means an
        obstacle juts into the swept corridor where the heading's own ray
        cannot see it; marking the candidate blocked keeps the policy from
        steering toward legs that could never be driven.
        """
        flags = list(clearance.clear)
        for cand, guards in self._GUARD_RAYS.items():
            if not flags[cand]:
                continue
            for g in guards:
                d = readings[g].distance_m
                if d is not None and d < self._corner_guard:
                    flags[cand] = False
                    break
        return nav_mod.ClearanceSet(clear=tuple(flags), threshold=clearance.threshold)

    def _leg_length(self) -> float:
        """Distance to the next cell-center line along the current heading."""
        theta = self.nav.est_pose.theta
        return self.world.cell_size / max(abs(math.cos(theta)), abs(math.sin(theta)))

    def _leg_wheels(self, remaining: float, dt: float) -> tuple[float, float]:
        v = min(self.cfg.cruise_speed, remaining / dt)
        w = v / self.model.wheel_radius
        return (w, w)

    def _turn_wheels(self, remaining: float, dt: float) -> tuple[float, float]:
        omega = math.copysign(min(self.cfg.turn_rate, abs(remaining) / dt), remaining)
        w = omega * self.model.wheel_base / (2.0 * self.model.wheel_radius)
        return (-w, w)

    def _care_tick(self, logs: list[Outbound]) -> list[Message]:
        messages: list[Message] = []
        new_alerts: list[care_mod.Alert] = []
        care = self.care
        while self._vitals_next_t <= self.clock:
            t = self._vitals_next_t
            self._vitals_next_t += self.cfg.vitals_period
            sample = care_mod.synthesize_vitals(
                self.cfg.vitals_profile, t, self.world.rng_seed,
                noise_pulse=self.cfg.vitals_noise_pulse,
                noise_temp=self.cfg.vitals_noise_temp,
                script=self.vitals_script,
            )
            try:
                alerts, hst = care_mod.ingest_vitals(sample, care.thresholds, care.hysteresis)
            except care_mod.ImplausibleSample as exc:
                logs.append(self._log("WARNING", f"vitals sample rejected: {exc}"))
                continue
            self.last_sample = sample
            care = replace(care, hysteresis=hst)
            new_alerts.extend(alerts)
        reminders, sched_state = care_mod.tick_scheduler(
            care.schedule, self._clock_start_s + self.clock, care.scheduler
        )
        care = replace(care, scheduler=sched_state)
        new_alerts.extend(reminders)
        self.care = care.with_alerts(new_alerts)
        messages.extend(self._alert_message(a) for a in new_alerts)
        return messages

    def _account_visit(self, newly: frozenset[tuple[int, int]]) -> None:
        for ix, iy in newly:
            count = self.nav.visit_grid[iy][ix]
            if count > self._max_visit:
                self._max_visit = count
            if count == 1 and self.world.grid[iy][ix] == 0:
                self._covered += 1

    # -- message builders ---------------------------------------------------

    def _log(self, level: str, msg: str) -> Outbound:
        return Outbound(None, Message(type="log", ts=self.clock,
                                      payload={"level": level, "msg": msg}))

    def _alert_message(self, alert: care_mod.Alert) -> Message:
        payload: dict = {"kind": alert.kind}
        payload.update(alert.payload_dict())
        return Message(type="alert", ts=self.clock, payload=payload)

    def _telemetry_message(self, readings) -> Message:
        est = self.nav.est_pose
        payload = {
            "tick": self.tick_count,
            "mode": self.mode,
            "pose": {"x": est.x, "y": est.y, "theta": est.theta},
            "readings": [r.distance_m for r in readings],
            "vitals": None if self.last_sample is None else {
                "t": self.last_sample.timestamp,
                "pulse_bpm": self.last_sample.pulse_bpm,
                "temp_c": self.last_sample.temp_c,
            },
            "visits": {
                "covered": self._covered,
                "free": self._free_cells,
                "max_count": self._max_visit,
                "fraction": self._covered / self._free_cells if self._free_cells else 0.0,
            },
            "encoders": {
                "left": quantized_ticks(self.world.wheel_angle_left, self.model.ticks_per_rev),
                "right": quantized_ticks(self.world.wheel_angle_right, self.model.ticks_per_rev),
            },
            "collided": self.last_collided,
        }
        return Message(type="telemetry", ts=self.clock, payload=payload)

    def _frame_message(self, frame) -> Message:
        return Message(type="frame", ts=self.clock, payload={
            "seq": frame.seq,
            "w": frame.width,
            "h": frame.height,
            "rle": frame.to_rle(),
            "pan": self.cam.pan_offset,
            "tilt": self.cam.tilt_step,
        })

    # -- reporting helpers --------------------------------------------------

    @property
    def coverage_fraction(self) -> float:
        return self._covered / self._free_cells if self._free_cells else 0.0

    @property
    def max_visit_count(self) -> int:
        return self._max_visit

    def hello_message(self) -> Message:
        """The greeting a server sends on connect (before per-client seq 0)."""
        return Message(type="hello", ts=self.clock, payload={
            "v": PROTOCOL_VERSION, "mode": self.mode, "name": "carebot",
        })


def _angle_diff(a: float, b: float) -> float:
    """Smallest signed difference a - b in (-pi, pi]."""
    d = (a - b) % (2.0 * math.pi)
    if d > math.pi:
        d -= 2.0 * math.pi
    return d
