"""Run configuration: built-in defaults, `key = value` file, CLI overrides.

Precedence is flags over file over built-ins. Every tunable named by the
other modules lives here so scenarios stay portable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .world import (
    DEFAULT_RANGE_TABLE,
    RobotModel,
    UltrasonicSpec,
    default_sensor_array,
    max_range_for_frequency,
)


class ConfigError(ValueError):
    pass


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_range_table(value: str) -> tuple[tuple[float, float], ...]:
    """`25:6.0,40:4.0,...` -> sorted (frequency, range) pairs, non-increasing."""
    pairs = []
    for chunk in value.split(","):
        freq_text, _, range_text = chunk.partition(":")
        pairs.append((float(freq_text), float(range_text)))
    pairs.sort()
    if len(pairs) < 2:
        raise ValueError("range table needs at least two points")
    for (f0, r0), (f1, r1) in zip(pairs, pairs[1:]):
        if f0 == f1:
            raise ValueError(f"duplicate frequency {f0}")
        if r1 > r0:
            raise ValueError("range table must be non-increasing in frequency")
    return tuple(pairs)


@dataclass(frozen=True)
class SimConfig:
    # chassis
    wheel_radius: float = 0.032
    wheel_base: float = 0.14
    ticks_per_rev: int = 360
    max_wheel_rpm: float = 500.0
    body_radius: float = 0.06
    sensor_frequency_khz: float = 40.0
    range_table: tuple[tuple[float, float], ...] = DEFAULT_RANGE_TABLE
    # navigation
    clear_threshold: float = 0.30
    cruise_speed: float = 0.40  # m/s in autonomous forward motion
    turn_rate: float = 4.0  # rad/s for in-place turns
    coverage_reach: float = 0.075  # cells within this of the body count as passed
    # supervisor loop
    control_dt: float = 0.05
    frame_every: int = 4
    # care suite
    vitals_period: float = 1.0
    vitals_profile: str = "steady"
    vitals_noise_pulse: float = 3.0
    vitals_noise_temp: float = 0.1
    vitals_script: str | None = None
    pulse_low: float = 50.0
    pulse_high: float = 120.0
    temp_low: float = 35.0
    temp_high: float = 38.0
    clock_start: str = "07:55"
    med_schedule: str | None = None
    # service
    port: int = 8790
    client_buffer: int = 1024


_CONVERTERS = {
    "wheel_radius": float,
    "wheel_base": float,
    "ticks_per_rev": int,
    "max_wheel_rpm": float,
    "body_radius": float,
    "sensor_frequency_khz": float,
    "range_table": _parse_range_table,
    "clear_threshold": float,
    "cruise_speed": float,
    "turn_rate": float,
    "coverage_reach": float,
    "control_dt": float,
    "frame_every": int,
    "vitals_period": float,
    "vitals_profile": str,
    "vitals_noise_pulse": float,
    "vitals_noise_temp": float,
    "vitals_script": str,
    "pulse_low": float,
    "pulse_high": float,
    "temp_low": float,
    "temp_high": float,
    "clock_start": str,
    "med_schedule": str,
    "port": int,
    "client_buffer": int,
}

assert set(_CONVERTERS) == {f.name for f in fields(SimConfig)}


def parse_config(text: str) -> dict:
    """Parse `key = value` lines (# comments, blank lines ignored)."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}")
    return values


def load_config(
    path: str | Path | None = None,
    overrides: dict | None = None,
) -> SimConfig:
    """Defaults, then file values, then explicit overrides."""
    cfg = SimConfig()
    if path is not None:
        cfg = replace(cfg, **parse_config(Path(path).read_text()))
    if overrides:
        unknown = set(overrides) - set(_CONVERTERS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **overrides)
    return cfg


def build_robot_model(cfg: SimConfig) -> RobotModel:
    """Robot chassis with the sensor ranges baked from the frequency table."""
    max_range = max_range_for_frequency(cfg.sensor_frequency_khz, cfg.range_table)
    sensors = tuple(
        UltrasonicSpec(
            bearing=spec.bearing,
            frequency_khz=cfg.sensor_frequency_khz,
            max_range_m=max_range,
        )
        for spec in default_sensor_array(cfg.sensor_frequency_khz)
    )
    return RobotModel(
        wheel_radius=cfg.wheel_radius,
        wheel_base=cfg.wheel_base,
        ticks_per_rev=cfg.ticks_per_rev,
        max_wheel_rpm=cfg.max_wheel_rpm,
        body_radius=cfg.body_radius,
        sensors=sensors,
    )
