"""The datagram control protocol and scenario files.

Wire format: ASCII, space-separated, one message per datagram, at most 512
bytes, optional trailing newline.  Verbs:

    POS LISTENER <x> <y> <z> <yaw>
    POS SOURCE <id> <x> <y> <z>
    TRIG <clip_id>
    LOOP <loop_id> ON|OFF
    TEMPO +|-
    SHAKE <gesture_id> <value>
    CRANE NEXT|UP|DOWN
    STATUS

Floats are plain decimals (optionally exponent-form); ids match
[A-Za-z0-9_][A-Za-z0-9_.-]*.  parse_message and format_message round-trip
every variant exactly.  Positions are absolute, never deltas, so a lost
datagram costs one update and nothing else.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import ConfigError, ParseError

MAX_DATAGRAM_BYTES = 512

_ID_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.\-]*\Z")
_FLOAT_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class PosListener:
    x: float
    y: float
    z: float
    yaw: float


@dataclass(frozen=True)
class PosSource:
    id: str
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Trig:
    clip_id: str


@dataclass(frozen=True)
class Loop:
    loop_id: str
    on: bool


@dataclass(frozen=True)
class Tempo:
    delta: int  # +1 | -1


@dataclass(frozen=True)
class Shake:
    gesture_id: str
    value: float


@dataclass(frozen=True)
class Crane:
    action: str  # "next" | "up" | "down"


@dataclass(frozen=True)
class StatusQuery:
    """A query for the per-block state snapshot, answered in-band."""


ControlMessage = Union[PosListener, PosSource, Trig, Loop, Tempo, Shake, Crane]


class _Tokens:
    def __init__(self, text: str):
        self.matches = list(_TOKEN_RE.finditer(text))
        self.text = text
        self.index = 0

    def next(self, what: str) -> tuple[str, int]:
        if self.index >= len(self.matches):
            offset = len(self.text)
            raise ParseError(f"expected {what}, got end of datagram", offset)
        m = self.matches[self.index]
        self.index += 1
        return m.group(0), m.start()

    def expect_end(self):
        if self.index < len(self.matches):
            m = self.matches[self.index]
            raise ParseError(f"unexpected trailing token {m.group(0)!r}", m.start())


def _parse_float(tokens: _Tokens, what: str) -> float:
    token, offset = tokens.next(what)
    if not _FLOAT_RE.match(token):
        raise ParseError(f"bad {what} {token!r}", offset)
    return float(token)


def _parse_id(tokens: _Tokens, what: str) -> str:
    token, offset = tokens.next(what)
    if not _ID_RE.match(token):
        raise ParseError(f"bad {what} {token!r}", offset)
    return token


def parse_message(datagram: Union[bytes, str]) -> Union[ControlMessage, StatusQuery]:
    """Parse one datagram; raises ParseError with the byte offset on failure."""
    if isinstance(datagram, bytes):
        if len(datagram) > MAX_DATAGRAM_BYTES:
            raise ParseError(f"datagram of {len(datagram)} bytes exceeds {MAX_DATAGRAM_BYTES}", 0)
        try:
            text = datagram.decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("datagram is not ASCII", exc.start) from exc
    else:
        if len(datagram) > MAX_DATAGRAM_BYTES:
            raise ParseError(f"datagram of {len(datagram)} bytes exceeds {MAX_DATAGRAM_BYTES}", 0)
        text = datagram
    text = text.rstrip("\r\n")
    tokens = _Tokens(text)
    verb, verb_offset = tokens.next("verb")
    if verb == "POS":
        target, target_offset = tokens.next("POS target")
        if target == "LISTENER":
            x = _parse_float(tokens, "x")
            y = _parse_float(tokens, "y")
            z = _parse_float(tokens, "z")
            yaw = _parse_float(tokens, "yaw")
            tokens.expect_end()
            return PosListener(x=x, y=y, z=z, yaw=yaw)
        if target == "SOURCE":
            source_id = _parse_id(tokens, "source id")
            x = _parse_float(tokens, "x")
            y = _parse_float(tokens, "y")
            z = _parse_float(tokens, "z")
            tokens.expect_end()
            return PosSource(id=source_id, x=x, y=y, z=z)
        raise ParseError(f"POS target must be LISTENER or SOURCE, got {target!r}", target_offset)
    if verb == "TRIG":
        clip_id = _parse_id(tokens, "clip id")
        tokens.expect_end()
        return Trig(clip_id=clip_id)
    if verb == "LOOP":
        loop_id = _parse_id(tokens, "loop id")
        state, state_offset = tokens.next("ON|OFF")
        if state not in ("ON", "OFF"):
            raise ParseError(f"loop state must be ON or OFF, got {state!r}", state_offset)
        tokens.expect_end()
        return Loop(loop_id=loop_id, on=state == "ON")
    if verb == "TEMPO":
        sign, sign_offset = tokens.next("+|-")
        if sign not in ("+", "-"):
            raise ParseError(f"tempo direction must be + or -, got {sign!r}", sign_offset)
        tokens.expect_end()
        return Tempo(delta=1 if sign == "+" else -1)
    if verb == "SHAKE":
        gesture_id = _parse_id(tokens, "gesture id")
        value = _parse_float(tokens, "accel value")
        tokens.expect_end()
        return Shake(gesture_id=gesture_id, value=value)
    if verb == "CRANE":
        action, action_offset = tokens.next("NEXT|UP|DOWN")
        if action not in ("NEXT", "UP", "DOWN"):
            raise ParseError(f"crane action must be NEXT, UP or DOWN, got {action!r}", action_offset)
        tokens.expect_end()
        return Crane(action=action.lower())
    if verb == "STATUS":
        tokens.expect_end()
        return StatusQuery()
    raise ParseError(f"unknown verb {verb!r}", verb_offset)


def _fmt(value: float) -> str:
    return repr(float(value))


def format_message(msg: Union[ControlMessage, StatusQuery]) -> str:
    """Canonical wire text for a message; parse(format(m)) == m."""
    if isinstance(msg, PosListener):
        return f"POS LISTENER {_fmt(msg.x)} {_fmt(msg.y)} {_fmt(msg.z)} {_fmt(msg.yaw)}"
    if isinstance(msg, PosSource):
        return f"POS SOURCE {msg.id} {_fmt(msg.x)} {_fmt(msg.y)} {_fmt(msg.z)}"
    if isinstance(msg, Trig):
        return f"TRIG {msg.clip_id}"
    if isinstance(msg, Loop):
        return f"LOOP {msg.loop_id} {'ON' if msg.on else 'OFF'}"
    if isinstance(msg, Tempo):
        return f"TEMPO {'+' if msg.delta > 0 else '-'}"
    if isinstance(msg, Shake):
        return f"SHAKE {msg.gesture_id} {_fmt(msg.value)}"
    if isinstance(msg, Crane):
        return f"CRANE {msg.action.upper()}"
    if isinstance(msg, StatusQuery):
        return "STATUS"
    raise TypeError(f"not a control message: {msg!r}")


@dataclass(frozen=True)
class ScenarioEvent:
    time: float  # seconds from render start
    message: ControlMessage

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("scenario event time must be >= 0")


def parse_scenario_file(path) -> list[ScenarioEvent]:
    """Parse `<time> <message...>` lines; events must be time-sorted."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read scenario: {exc}") from exc
    events: list[ScenarioEvent] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            t = float(head)
        except ValueError as exc:
            raise ConfigError(path, line_no, f"bad event time {head!r}") from exc
        if t < 0:
            raise ConfigError(path, line_no, "event time must be >= 0")
        try:
            msg = parse_message(rest.strip())
        except ParseError as exc:
            raise ConfigError(path, line_no, str(exc)) from exc
        if isinstance(msg, StatusQuery):
            raise ConfigError(path, line_no, "STATUS is a live query, not a scenario event")
        if events and t < events[-1].time:
            raise ConfigError(path, line_no, f"events out of order: {t} after {events[-1].time}")
        events.append(ScenarioEvent(time=t, message=msg))
    return events
