"""Headless simulation runs: scripted commands, message log, run report.

The emitted message log is the source of truth: the report (coverage,
collisions, alert counts, hash) can be recomputed from the encoded lines
alone, and the log hash is the determinism fingerprint for a run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import care as care_mod
from .config import SimConfig
from .protocol import COMMAND_TYPES, Message, MessageError, decode_message, encode_message
from .supervisor import AUTONOMOUS, Supervisor
from .world import World, load_scenario

__all__ = [
    "RunReport",
    "run_headless",
    "report_from_log",
    "load_script",
    "bundled_scenario_path",
    "load_bundled_scenario",
    "build_supervisor",
]


class ScriptError(ValueError):
    pass


def load_script(text: str) -> list[tuple[int, Message]]:
    """Parse a command trace: `<tick> <wire-encoded message>` per line.

    The message part is the exact wire encoding, so scripts double as
    protocol fixtures. Blank lines and # comments are skipped.
    """
    commands: list[tuple[int, Message]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        prefix, _, rest = line.partition(" ")
        try:
            tick = int(prefix)
        except ValueError:
            raise ScriptError(f"line {lineno}: expected a tick-offset prefix, got {prefix!r}")
        if tick < 0:
            raise ScriptError(f"line {lineno}: tick offset must be >= 0")
        try:
            msg = decode_message(rest.strip())
        except MessageError as exc:
            raise ScriptError(f"line {lineno}: {exc}")
        if msg.type not in COMMAND_TYPES and msg.type != "hello":
            raise ScriptError(f"line {lineno}: {msg.type!r} is not a command")
        commands.append((tick, msg))
    return commands


@dataclass(frozen=True)
class RunReport:
    ticks: int
    coverage_fraction: float
    max_visit_count: int
    collisions: int
    alerts_by_kind: dict
    message_log_hash: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "ticks": self.ticks,
                "coverage_fraction": self.coverage_fraction,
                "max_visit_count": self.max_visit_count,
                "collisions": self.collisions,
                "alerts_by_kind": dict(sorted(self.alerts_by_kind.items())),
                "message_log_hash": self.message_log_hash,
            },
            indent=2,
            sort_keys=True,
        )


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    path = resources.files("carebot").joinpath("scenarios", f"{name}.map")
    return Path(str(path))


def load_bundled_scenario(name: str) -> World:
    return load_scenario(bundled_scenario_path(name).read_text())


def build_supervisor(world: World, cfg: SimConfig) -> Supervisor:
    """Wire a supervisor with config-referenced vitals script and schedule."""
    vitals_script = None
    if cfg.vitals_script:
        vitals_script = care_mod.load_vitals_script(Path(cfg.vitals_script).read_text())
    schedule = None
    if cfg.med_schedule:
        doc = json.loads(Path(cfg.med_schedule).read_text())
        schedule = care_mod.MedSchedule.from_payload(doc["entries"])
    return Supervisor(world, cfg, vitals_script=vitals_script, schedule=schedule)


def run_headless(
    world: World,
    cfg: SimConfig,
    mode: str = "manual",
    ticks: int = 0,
    script: list[tuple[int, Message]] | None = None,
    supervisor: Supervisor | None = None,
) -> tuple[RunReport, list[bytes]]:
    """Run `ticks` control periods as fast as possible.

    Returns the report plus the full encoded message log (one line per
    message, sequence numbers stamped in emission order).
    """
    sup = supervisor or build_supervisor(world, cfg)
    if mode.upper() == AUTONOMOUS:
        sup.enqueue_command(
            Message(type="mode_set", ts=0.0, id="boot-mode", payload={"mode": AUTONOMOUS})
        )
    pending_script = sorted(script or [], key=lambda item: item[0])
    script_pos = 0

    log: list[bytes] = []
    digest = hashlib.sha256()
    seq = 0
    alerts_by_kind: dict = {}
    for tick_index in range(ticks):
        while script_pos < len(pending_script) and pending_script[script_pos][0] <= tick_index:
            sup.enqueue_command(pending_script[script_pos][1])
            script_pos += 1
        for outbound in sup.tick():
            line = encode_message(outbound.message.with_seq(seq))
            seq += 1
            log.append(line)
            digest.update(line)
            if outbound.message.type == "alert":
                kind = outbound.message.payload["kind"]
                alerts_by_kind[kind] = alerts_by_kind.get(kind, 0) + 1

    report = RunReport(
        ticks=ticks,
        coverage_fraction=sup.coverage_fraction,
        max_visit_count=sup.max_visit_count,
        collisions=sup.collisions,
        alerts_by_kind=alerts_by_kind,
        message_log_hash=digest.hexdigest(),
    )
    return report, log


def report_from_log(lines: list[bytes]) -> RunReport:
    """Recompute a RunReport from an encoded message log alone."""
    digest = hashlib.sha256()
    alerts_by_kind: dict = {}
    collisions = 0
    ticks = 0
    coverage = 0.0
    max_visit = 0
    for line in lines:
        digest.update(line)
        msg = decode_message(line)
        if msg.type == "telemetry":
            ticks = max(ticks, msg.payload["tick"] + 1)
            coverage = msg.payload["visits"]["fraction"]
            max_visit = msg.payload["visits"]["max_count"]
            if msg.payload["collided"]:
                collisions += 1
        elif msg.type == "alert":
            kind = msg.payload["kind"]
            alerts_by_kind[kind] = alerts_by_kind.get(kind, 0) + 1
    return RunReport(
        ticks=ticks,
        coverage_fraction=coverage,
        max_visit_count=max_visit,
        collisions=collisions,
        alerts_by_kind=alerts_by_kind,
        message_log_hash=digest.hexdigest(),
    )
