"""Line-delimited JSON wire protocol.

Every message is one UTF-8 line: a JSON object with `type`, `ts`, a
type-specific `payload`, and either a client-assigned `id` (inbound
commands) or a server-assigned `seq` (outbound stream). Encoding is
canonical: lexicographically sorted keys, floats at up to 9 significant
digits, no whitespace, one trailing newline. That makes encoding
injective on schema-valid messages and message logs hash-stable.

The decoder never crashes on hostile input: every failure is a
MessageError with a typed code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 1 << 20  # 1 MiB

MESSAGE_TYPES = (
    "hello",
    "ack",
    "mode_set",
    "drive",
    "camera_pan",
    "med_schedule_set",
    "emergency_press",
    "telemetry",
    "alert",
    "frame",
    "log",
)

# error codes
PARSE_ERROR = "PARSE_ERROR"
UNKNOWN_TYPE = "UNKNOWN_TYPE"
MISSING_FIELD = "MISSING_FIELD"
BAD_FIELD = "BAD_FIELD"
FRAME_TOO_LARGE = "FRAME_TOO_LARGE"
ENCODE_ERROR = "ENCODE_ERROR"

# nack reason codes used above the codec level
MODE_CONFLICT = "MODE_CONFLICT"
BAD_VERSION = "BAD_VERSION"
BAD_SCHEDULE = "BAD_SCHEDULE"
NOT_A_COMMAND = "NOT_A_COMMAND"

MODES = ("MANUAL", "AUTONOMOUS")
PAN_DIRS = ("LEFT", "RIGHT", "UP", "DOWN")
ALERT_KINDS = ("PULSE_LOW", "PULSE_HIGH", "TEMP_LOW", "TEMP_HIGH", "EMERGENCY", "MED_REMINDER")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# message flow direction: inbound commands carry `id`, outbound stream
# messages carry `seq`, hello goes both ways
_DIRECTION = {
    "hello": "both",
    "ack": "out",
    "mode_set": "in",
    "drive": "in",
    "camera_pan": "in",
    "med_schedule_set": "in",
    "emergency_press": "in",
    "telemetry": "out",
    "alert": "out",
    "frame": "out",
    "log": "out",
}

COMMAND_TYPES = tuple(t for t, d in _DIRECTION.items() if d == "in")


class MessageError(ValueError):
    """Typed protocol failure; `code` is one of the module error codes."""

    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


@dataclass(frozen=True)
class Message:
    """One protocol envelope. Exactly one of id/seq is set."""

    type: str
    ts: float
    payload: dict = field(default_factory=dict)
    id: str | None = None
    seq: int | None = None

    def with_seq(self, seq: int) -> "Message":
        return Message(type=self.type, ts=self.ts, payload=self.payload, id=None, seq=seq)


# ---------------------------------------------------------------------------
# Canonical JSON

def format_float(value: float) -> str:
    """Canonical float text: up to 9 significant digits, always float-typed."""
    if not math.isfinite(value):
        raise MessageError(ENCODE_ERROR, f"non-finite float {value!r}")
    text = "%.9g" % value
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def canonical_float(value: float) -> float:
    """The value a canonically encoded float decodes back to."""
    if not math.isfinite(value):
        raise MessageError(ENCODE_ERROR, f"non-finite float {value!r}")
    return float("%.9g" % value)


def dumps_canonical(obj) -> str:
    """Serialize to canonical JSON (sorted keys, compact, 9-digit floats)."""
    parts: list[str] = []
    _write_canonical(obj, parts)
    return "".join(parts)


def _write_canonical(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _write_canonical(item, parts)
        parts.append("]")
    elif isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise MessageError(ENCODE_ERROR, f"non-string object key {key!r}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _write_canonical(obj[key], parts)
        parts.append("}")
    else:
        raise MessageError(ENCODE_ERROR, f"unserializable value of type {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Payload schemas

def _want(payload: dict, name: str, required: bool = True):
    if name not in payload:
        if required:
            raise MessageError(MISSING_FIELD, f"missing required field {name!r}")
        return None
    return payload[name]


def _check_num(value, where: str, lo: float = -math.inf, hi: float = math.inf) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MessageError(BAD_FIELD, f"{where} must be a number")
    if not math.isfinite(value):
        raise MessageError(BAD_FIELD, f"{where} must be finite")
    if not lo <= value <= hi:
        raise MessageError(BAD_FIELD, f"{where} outside [{lo}, {hi}]")
    return float(value)


def _check_int(value, where: str, lo: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MessageError(BAD_FIELD, f"{where} must be an integer")
    if lo is not None and value < lo:
        raise MessageError(BAD_FIELD, f"{where} must be >= {lo}")
    return value


def _check_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise MessageError(BAD_FIELD, f"{where} must be a string")
    return value


def _check_bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise MessageError(BAD_FIELD, f"{where} must be a boolean")
    return value


def _check_enum(value, where: str, allowed: tuple[str, ...]) -> str:
    _check_str(value, where)
    if value not in allowed:
        raise MessageError(BAD_FIELD, f"{where} must be one of {allowed}")
    return value


def _check_dict(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise MessageError(BAD_FIELD, f"{where} must be an object")
    return value


def _check_list(value, where: str) -> list:
    if not isinstance(value, list):
        raise MessageError(BAD_FIELD, f"{where} must be an array")
    return value


def _v_hello(p: dict) -> None:
    _check_int(_want(p, "v"), "hello.v", lo=0)
    if "mode" in p:
        _check_enum(p["mode"], "hello.mode", MODES)
    if "name" in p:
        _check_str(p["name"], "hello.name")


def _v_ack(p: dict) -> None:
    if "id" not in p:
        raise MessageError(MISSING_FIELD, "missing required field 'id'")
    if p["id"] is not None:
        _check_str(p["id"], "ack.id")
    _check_bool(_want(p, "ok"), "ack.ok")
    if "code" in p:
        _check_str(p["code"], "ack.code")
    if "detail" in p:
        _check_str(p["detail"], "ack.detail")


def _v_mode_set(p: dict) -> None:
    _check_enum(_want(p, "mode"), "mode_set.mode", MODES)


def _v_drive(p: dict) -> None:
    _check_num(_want(p, "left"), "drive.left", -1.0, 1.0)
    _check_num(_want(p, "right"), "drive.right", -1.0, 1.0)


def _v_camera_pan(p: dict) -> None:
    _check_enum(_want(p, "dir"), "camera_pan.dir", PAN_DIRS)


def _v_med_schedule_set(p: dict) -> None:
    entries = _check_list(_want(p, "entries"), "med_schedule_set.entries")
    for i, item in enumerate(entries):
        where = f"med_schedule_set.entries[{i}]"
        _check_dict(item, where)
        if "id" not in item:
            raise MessageError(MISSING_FIELD, f"missing required field 'id' in {where}")
        _check_str(item["id"], f"{where}.id")
        if "time" not in item:
            raise MessageError(MISSING_FIELD, f"missing required field 'time' in {where}")
        _check_str(item["time"], f"{where}.time")
        if "label" in item:
            _check_str(item["label"], f"{where}.label")
        if "enabled" in item:
            _check_bool(item["enabled"], f"{where}.enabled")


def _v_emergency_press(p: dict) -> None:
    pass  # no required payload


def _v_telemetry(p: dict) -> None:
    _check_int(_want(p, "tick"), "telemetry.tick", lo=0)
    _check_enum(_want(p, "mode"), "telemetry.mode", MODES)
    pose = _check_dict(_want(p, "pose"), "telemetry.pose")
    for key in ("x", "y", "theta"):
        _check_num(_want(pose, key), f"telemetry.pose.{key}")
    readings = _check_list(_want(p, "readings"), "telemetry.readings")
    if len(readings) != 6:
        raise MessageError(BAD_FIELD, "telemetry.readings must have 6 entries")
    for i, r in enumerate(readings):
        if r is not None:
            _check_num(r, f"telemetry.readings[{i}]", lo=0.0)
    vitals = _want(p, "vitals")
    if vitals is not None:
        _check_dict(vitals, "telemetry.vitals")
        for key in ("t", "pulse_bpm", "temp_c"):
            _check_num(_want(vitals, key), f"telemetry.vitals.{key}")
    visits = _check_dict(_want(p, "visits"), "telemetry.visits")
    _check_int(_want(visits, "covered"), "telemetry.visits.covered", lo=0)
    _check_int(_want(visits, "free"), "telemetry.visits.free", lo=0)
    _check_int(_want(visits, "max_count"), "telemetry.visits.max_count", lo=0)
    _check_num(_want(visits, "fraction"), "telemetry.visits.fraction", 0.0, 1.0)
    encoders = _check_dict(_want(p, "encoders"), "telemetry.encoders")
    _check_int(_want(encoders, "left"), "telemetry.encoders.left")
    _check_int(_want(encoders, "right"), "telemetry.encoders.right")
    _check_bool(_want(p, "collided"), "telemetry.collided")


def _v_alert(p: dict) -> None:
    _check_enum(_want(p, "kind"), "alert.kind", ALERT_KINDS)
    if "value" in p:
        _check_num(p["value"], "alert.value")
    if "entry_id" in p:
        _check_str(p["entry_id"], "alert.entry_id")
    if "label" in p:
        _check_str(p["label"], "alert.label")


def _v_frame(p: dict) -> None:
    _check_int(_want(p, "seq"), "frame.seq", lo=0)
    w = _check_int(_want(p, "w"), "frame.w", lo=1)
    h = _check_int(_want(p, "h"), "frame.h", lo=1)
    rle = _check_list(_want(p, "rle"), "frame.rle")
    if len(rle) % 2 != 0:
        raise MessageError(BAD_FIELD, "frame.rle must be (count, code) pairs")
    total = 0
    for i in range(0, len(rle), 2):
        count = _check_int(rle[i], f"frame.rle[{i}]", lo=1)
        _check_int(rle[i + 1], f"frame.rle[{i + 1}]", lo=0)
        total += count
    if total != w * h:
        raise MessageError(BAD_FIELD, f"frame.rle covers {total} cells, expected {w * h}")
    if "pan" in p:
        _check_num(p["pan"], "frame.pan")
    if "tilt" in p:
        _check_int(p["tilt"], "frame.tilt")


def _v_log(p: dict) -> None:
    _check_enum(_want(p, "level"), "log.level", LOG_LEVELS)
    _check_str(_want(p, "msg"), "log.msg")


_VALIDATORS = {
    "hello": _v_hello,
    "ack": _v_ack,
    "mode_set": _v_mode_set,
    "drive": _v_drive,
    "camera_pan": _v_camera_pan,
    "med_schedule_set": _v_med_schedule_set,
    "emergency_press": _v_emergency_press,
    "telemetry": _v_telemetry,
    "alert": _v_alert,
    "frame": _v_frame,
    "log": _v_log,
}


def validate_message(msg: Message) -> None:
    """Schema-check a Message; raises MessageError on any violation."""
    if msg.type not in _VALIDATORS:
        raise MessageError(UNKNOWN_TYPE, f"unknown message type {msg.type!r}")
    if isinstance(msg.ts, bool) or not isinstance(msg.ts, (int, float)):
        raise MessageError(BAD_FIELD, "ts must be a number")
    if not math.isfinite(msg.ts):
        raise MessageError(BAD_FIELD, "ts must be finite")
    direction = _DIRECTION[msg.type]
    has_id = msg.id is not None
    has_seq = msg.seq is not None
    if has_id and has_seq:
        raise MessageError(BAD_FIELD, "message carries both id and seq")
    if direction == "in" and not has_id:
        raise MessageError(MISSING_FIELD, "missing required field 'id'")
    if direction == "out" and not has_seq:
        raise MessageError(MISSING_FIELD, "missing required field 'seq'")
    if direction == "both" and not (has_id or has_seq):
        raise MessageError(MISSING_FIELD, "missing required field 'id' (or 'seq')")
    if has_id and not isinstance(msg.id, str):
        raise MessageError(BAD_FIELD, "id must be a string")
    if has_seq and (isinstance(msg.seq, bool) or not isinstance(msg.seq, int) or msg.seq < 0):
        raise MessageError(BAD_FIELD, "seq must be a non-negative integer")
    if not isinstance(msg.payload, dict):
        raise MessageError(BAD_FIELD, "payload must be an object")
    try:
        _VALIDATORS[msg.type](msg.payload)
    except MessageError:
        raise
    except (TypeError, KeyError, AttributeError, OverflowError) as exc:
        raise MessageError(BAD_FIELD, f"malformed payload: {exc}")


def encode_message(msg: Message) -> bytes:
    """Canonical single-line encoding; validates the message first."""
    validate_message(msg)
    obj: dict = {"type": msg.type, "ts": msg.ts, "payload": msg.payload}
    if msg.id is not None:
        obj["id"] = msg.id
    if msg.seq is not None:
        obj["seq"] = msg.seq
    return (dumps_canonical(obj) + "\n").encode("utf-8")


def _reject_constant(name: str):
    raise ValueError(f"JSON constant {name} not allowed")


def decode_message(line: bytes | str) -> Message:
    """Parse and schema-validate one wire line.

    Raises MessageError with PARSE_ERROR / FRAME_TOO_LARGE / UNKNOWN_TYPE /
    MISSING_FIELD / BAD_FIELD; never anything else, on any input bytes.
    """
    if isinstance(line, str):
        raw = line.encode("utf-8", errors="surrogatepass")
    else:
        raw = line
    if len(raw) > MAX_LINE_BYTES:
        raise MessageError(FRAME_TOO_LARGE, f"line of {len(raw)} bytes exceeds {MAX_LINE_BYTES}")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MessageError(PARSE_ERROR, f"invalid UTF-8: {exc}")
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except (ValueError, RecursionError) as exc:
        raise MessageError(PARSE_ERROR, f"invalid JSON: {exc}")
    if not isinstance(obj, dict):
        raise MessageError(PARSE_ERROR, "top level must be a JSON object")

    if "type" not in obj:
        raise MessageError(MISSING_FIELD, "missing required field 'type'")
    mtype = obj["type"]
    if not isinstance(mtype, str):
        raise MessageError(BAD_FIELD, "type must be a string")
    if mtype not in _VALIDATORS:
        raise MessageError(UNKNOWN_TYPE, f"unknown message type {mtype!r}")
    if "ts" not in obj:
        raise MessageError(MISSING_FIELD, "missing required field 'ts'")
    if "payload" not in obj:
        raise MessageError(MISSING_FIELD, "missing required field 'payload'")

    msg = Message(
        type=mtype,
        ts=obj["ts"],
        payload=obj["payload"],
        id=obj.get("id"),
        seq=obj.get("seq"),
    )
    validate_message(msg)
    return msg
