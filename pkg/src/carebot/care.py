"""Simulated wearable: vitals monitoring, emergency button, med reminders.

The wearable is its own little device, independent of the robot: it
ingests pulse/temperature samples against configurable bands, fires
edge-triggered alerts on band exit, and reminds about scheduled
medication times exactly once per day per entry. A small set of synthetic
vitals profiles provides deterministic test stimulus.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, replace

SECONDS_PER_DAY = 86400

# alert kinds
PULSE_LOW = "PULSE_LOW"
PULSE_HIGH = "PULSE_HIGH"
TEMP_LOW = "TEMP_LOW"
TEMP_HIGH = "TEMP_HIGH"
EMERGENCY = "EMERGENCY"
MED_REMINDER = "MED_REMINDER"

ALERT_KINDS = (PULSE_LOW, PULSE_HIGH, TEMP_LOW, TEMP_HIGH, EMERGENCY, MED_REMINDER)

PULSE_PLAUSIBLE = (0.0, 300.0)
TEMP_PLAUSIBLE = (30.0, 45.0)

PROFILES = ("steady", "fever_ramp", "tachy_burst", "scripted")


class CareError(ValueError):
    """Bad schedule, profile or script input."""


class ImplausibleSample(CareError):
    """Sample outside the sensor plausibility window; dropped, never alerted."""


@dataclass(frozen=True)
class VitalsSample:
    timestamp: float
    pulse_bpm: float
    temp_c: float


@dataclass(frozen=True)
class Thresholds:
    """Alert bands. Non-medical defaults; override via config."""

    pulse_low: float = 50.0
    pulse_high: float = 120.0
    temp_low: float = 35.0
    temp_high: float = 38.0

    def __post_init__(self):
        if self.pulse_low >= self.pulse_high:
            raise CareError("pulse_low must be below pulse_high")
        if self.temp_low >= self.temp_high:
            raise CareError("temp_low must be below temp_high")


@dataclass(frozen=True)
class Alert:
    kind: str
    timestamp: float
    payload: tuple[tuple[str, object], ...] = ()

    def payload_dict(self) -> dict:
        return dict(self.payload)


@dataclass(frozen=True)
class HysteresisState:
    """Which side of the band each channel was on at the previous sample."""

    pulse_band: str = "in"  # in | low | high
    temp_band: str = "in"


def _band(value: float, low: float, high: float) -> str:
    if value < low:
        return "low"
    if value > high:
        return "high"
    return "in"


def ingest_vitals(
    sample: VitalsSample,
    th: Thresholds,
    hst: HysteresisState,
) -> tuple[list[Alert], HysteresisState]:
    """Check one sample against the bands; edge-triggered.

    An alert fires only when a channel leaves the in-band state it held at
    the previous sample, so a long out-of-band stretch produces a single
    alert, not a storm. Pulse and temperature are independent; both may
    fire on the same sample.
    """
    if not PULSE_PLAUSIBLE[0] <= sample.pulse_bpm <= PULSE_PLAUSIBLE[1]:
        raise ImplausibleSample(f"pulse {sample.pulse_bpm} outside {PULSE_PLAUSIBLE}")
    if not TEMP_PLAUSIBLE[0] <= sample.temp_c <= TEMP_PLAUSIBLE[1]:
        raise ImplausibleSample(f"temperature {sample.temp_c} outside {TEMP_PLAUSIBLE}")

    alerts: list[Alert] = []
    pulse_band = _band(sample.pulse_bpm, th.pulse_low, th.pulse_high)
    if pulse_band != "in" and hst.pulse_band == "in":
        kind = PULSE_LOW if pulse_band == "low" else PULSE_HIGH
        alerts.append(Alert(kind, sample.timestamp, (("value", sample.pulse_bpm),)))
    temp_band = _band(sample.temp_c, th.temp_low, th.temp_high)
    if temp_band != "in" and hst.temp_band == "in":
        kind = TEMP_LOW if temp_band == "low" else TEMP_HIGH
        alerts.append(Alert(kind, sample.timestamp, (("value", sample.temp_c),)))
    return alerts, HysteresisState(pulse_band=pulse_band, temp_band=temp_band)


def press_emergency(timestamp: float) -> Alert:
    """The help button: always produces an alert, no debounce, any mode."""
    return Alert(EMERGENCY, timestamp)


# ---------------------------------------------------------------------------
# Medication schedule

@dataclass(frozen=True)
class MedEntry:
    id: str
    label: str
    time_of_day: str  # HH:MM
    enabled: bool = True

    def seconds_of_day(self) -> int:
        return parse_time_of_day(self.time_of_day)


def parse_time_of_day(text: str) -> int:
    """HH:MM (00:00..23:59) to seconds since midnight."""
    parts = text.split(":")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise CareError(f"bad time of day {text!r}, expected HH:MM")
    hours, minutes = int(parts[0]), int(parts[1])
    if not (0 <= hours <= 23 and 0 <= minutes <= 59):
        raise CareError(f"time of day {text!r} outside 00:00..23:59")
    return hours * 3600 + minutes * 60


@dataclass(frozen=True)
class MedSchedule:
    entries: tuple[MedEntry, ...] = ()

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise CareError(f"duplicate schedule entry id {dup!r}")
        for e in self.entries:
            e.seconds_of_day()  # validates the time format

    @staticmethod
    def from_payload(entries: list[dict]) -> "MedSchedule":
        """Build from the wire/JSON form: [{id, label, time, enabled}, ...]."""
        parsed = []
        for item in entries:
            parsed.append(
                MedEntry(
                    id=str(item["id"]),
                    label=str(item.get("label", "")),
                    time_of_day=str(item["time"]),
                    enabled=bool(item.get("enabled", True)),
                )
            )
        return MedSchedule(entries=tuple(parsed))

    def to_payload(self) -> list[dict]:
        return [
            {"id": e.id, "label": e.label, "time": e.time_of_day, "enabled": e.enabled}
            for e in self.entries
        ]


@dataclass(frozen=True)
class SchedulerState:
    """Crossing detector memory: last clock seen, and what already fired."""

    last_clock: float | None = None
    fired: frozenset[tuple[int, str]] = frozenset()  # (day index, entry id)


def tick_scheduler(
    sched: MedSchedule,
    clock: float,
    state: SchedulerState,
) -> tuple[list[Alert], SchedulerState]:
    """Fire reminders whose time of day was crossed since the previous tick.

    Robust to any tick cadence: every enabled entry fires exactly once per
    simulated day, even when a single tick spans several schedule times or
    a midnight rollover. The first call only establishes the baseline.
    """
    if state.last_clock is not None and clock < state.last_clock:
        raise CareError("scheduler clock must be monotone non-decreasing")
    if state.last_clock is None:
        return [], SchedulerState(last_clock=clock, fired=state.fired)

    last = state.last_clock
    day_lo = math.floor(last / SECONDS_PER_DAY)
    day_hi = math.floor(clock / SECONDS_PER_DAY)
    due: list[tuple[float, str, MedEntry]] = []
    for entry in sched.entries:
        if not entry.enabled:
            continue
        tod = entry.seconds_of_day()
        for day in range(day_lo, day_hi + 1):
            fire_at = day * SECONDS_PER_DAY + tod
            if last < fire_at <= clock and (day, entry.id) not in state.fired:
                due.append((fire_at, entry.id, entry))

    due.sort(key=lambda item: (item[0], item[1]))
    alerts = [
        Alert(MED_REMINDER, fire_at, (("entry_id", e.id), ("label", e.label)))
        for fire_at, _, e in due
    ]
    fired = set(state.fired)
    fired.update((math.floor(fire_at / SECONDS_PER_DAY), e.id) for fire_at, _, e in due)
    # keep only the current day; older entries can never fire again
    fired = frozenset(item for item in fired if item[0] >= day_hi)
    return alerts, SchedulerState(last_clock=clock, fired=fired)


# ---------------------------------------------------------------------------
# Synthetic vitals

def load_vitals_script(text: str) -> tuple[tuple[float, float, float], ...]:
    """Parse a scripted vitals CSV: header `t,pulse_bpm,temp_c`, monotone t."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CareError("empty vitals script")
    if [h.strip() for h in header] != ["t", "pulse_bpm", "temp_c"]:
        raise CareError("vitals script header must be 't,pulse_bpm,temp_c'")
    rows: list[tuple[float, float, float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise CareError(f"line {lineno}: expected 3 columns, got {len(row)}")
        try:
            t, pulse, temp = float(row[0]), float(row[1]), float(row[2])
        except ValueError:
            raise CareError(f"line {lineno}: non-numeric value")
        if rows and t < rows[-1][0]:
            raise CareError(f"line {lineno}: t must be monotone non-decreasing")
        rows.append((t, pulse, temp))
    if not rows:
        raise CareError("vitals script has no data rows")
    return tuple(rows)


def synthesize_vitals(
    profile: str,
    t: float,
    seed: int,
    noise_pulse: float = 3.0,
    noise_temp: float = 0.1,
    script: tuple[tuple[float, float, float], ...] | None = None,
) -> VitalsSample:
    """Deterministic stimulus: the same (profile, seed, t) always yields
    the same sample, with no stream state.

    steady      72 bpm / 36.6 C plus seeded uniform noise
    fever_ramp  temperature climbs 0.005 C/s from 36.6, capped at 39.5
    tachy_burst pulse jumps to 150 during two one-minute windows
    scripted    hold-last lookup into a loaded CSV script
    """
    if profile == "steady":
        rng = random.Random(f"vitals:{seed}:{t!r}")
        pulse = 72.0 + rng.uniform(-noise_pulse, noise_pulse) if noise_pulse else 72.0
        temp = 36.6 + rng.uniform(-noise_temp, noise_temp) if noise_temp else 36.6
        return VitalsSample(t, pulse, temp)
    if profile == "fever_ramp":
        return VitalsSample(t, 84.0, min(36.6 + 0.005 * t, 39.5))
    if profile == "tachy_burst":
        burst = 120.0 <= t < 180.0 or 360.0 <= t < 420.0
        return VitalsSample(t, 150.0 if burst else 72.0, 36.6)
    if profile == "scripted":
        if not script:
            raise CareError("scripted profile requires a loaded script")
        value = script[0]
        for row in script:
            if row[0] <= t:
                value = row
            else:
                break
        return VitalsSample(t, value[1], value[2])
    raise CareError(f"unknown vitals profile {profile!r}")


@dataclass(frozen=True)
class CareState:
    """Everything the wearable remembers across ticks."""

    thresholds: Thresholds = Thresholds()
    schedule: MedSchedule = MedSchedule()
    hysteresis: HysteresisState = HysteresisState()
    scheduler: SchedulerState = SchedulerState()
    alert_log: tuple[Alert, ...] = ()

    def with_alerts(self, alerts: list[Alert], **changes) -> "CareState":
        if alerts:
            changes["alert_log"] = self.alert_log + tuple(alerts)
        return replace(self, **changes)
