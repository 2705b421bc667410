"""Reproduction-room geometry: loudspeaker layout, listener pose, relative
directions and the spatial-aliasing figure of the speaker ring.

Coordinates are right-handed meters with the origin at the room-floor
center: x = width axis (positive right), y = depth axis (positive front),
z = up.  Azimuths are radians in (-pi, pi], 0 = straight ahead (+y),
positive toward the right (+x).  All speakers are treated as a horizontal
ring: elevation is discarded for panning, full 3D is kept for distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ConfigError, DegenerateGeometry, InvalidLayout

#: Default speed of sound, m/s.  Matches an 87.6 Hz aliasing limit for the
#: canonical 1.94 m ring spacing.
SPEED_OF_SOUND = 340.0

_MIN_HORIZONTAL_DIST = 1e-6


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"non-finite component in {self!r}")


@dataclass(frozen=True)
class Loudspeaker:
    id: int
    position: Vec3
    bus: int


@dataclass(frozen=True)
class ListenerPose:
    """Tracked listener: position in meters plus horizontal heading.

    yaw is the right-handed heading about +z in radians: yaw 0 faces +y and
    positive yaw turns the listener counterclockwise (seen from above), so
    a speaker dead ahead then shows up at a positive (rightward) azimuth.
    """

    position: Vec3
    yaw: float = 0.0


@dataclass(frozen=True)
class AliasingReport:
    min_spacing_d: float
    speed_of_sound_c: float
    f_al: float


class RoomHalf(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class LoudspeakerLayout:
    """Speaker ring plus the room box it surrounds.

    ``speakers`` is in ring order: adjacency (for spacing checks and the
    aliasing figure) is consecutive list order with wraparound.  Multiple
    speakers may share a bus; shared-bus neighbors are exempt from the
    minimum-spacing rule.  ``subwoofer_buses`` are excluded from panning.
    """

    speakers: tuple[Loudspeaker, ...]
    bus_count: int = 8
    room_width: float = 9.6
    room_depth: float = 3.0
    room_height: float = 3.0
    min_spacing: float = 1.94
    subwoofer_buses: tuple[int, ...] = field(default=())

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise InvalidLayout("; ".join(problems))

    def validate(self) -> list[str]:
        problems = []
        if self.bus_count < 1:
            problems.append("bus_count must be >= 1")
        if self.room_width <= 0 or self.room_depth <= 0 or self.room_height <= 0:
            problems.append("room dimensions must be positive")
        seen_buses = set()
        for sp in self.speakers:
            if sp.position.z <= 0:
                problems.append(f"speaker {sp.id}: z must be > 0")
            if not 0 <= sp.bus < self.bus_count:
                problems.append(f"speaker {sp.id}: bus {sp.bus} outside [0, {self.bus_count})")
            else:
                seen_buses.add(sp.bus)
        for bus in range(self.bus_count):
            if bus not in seen_buses:
                problems.append(f"bus {bus} has no speaker")
        for bus in self.subwoofer_buses:
            if not 0 <= bus < self.bus_count:
                problems.append(f"subwoofer bus {bus} outside [0, {self.bus_count})")
        n = len(self.speakers)
        if n >= 2:
            for i in range(n):
                a, b = self.speakers[i], self.speakers[(i + 1) % n]
                if a.bus == b.bus:
                    continue  # shared-bus pairs sit closer by design
                d = _dist3(a.position, b.position)
                if d < self.min_spacing - 1e-9:
                    problems.append(
                        f"speakers {a.id}/{b.id}: ring spacing {d:.3f} m < {self.min_spacing} m"
                    )
        return problems

    def panning_speakers(self) -> tuple[Loudspeaker, ...]:
        subs = set(self.subwoofer_buses)
        return tuple(sp for sp in self.speakers if sp.bus not in subs)

    def clamp_position(self, p: Vec3) -> Vec3:
        """Snap a position into the room box; tracking jitter at walls is
        expected, so out-of-room poses are clamped rather than rejected."""
        hw, hd = self.room_width / 2.0, self.room_depth / 2.0
        return Vec3(
            min(max(p.x, -hw), hw),
            min(max(p.y, -hd), hd),
            min(max(p.z, 0.0), self.room_height),
        )


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = math.remainder(a, math.tau)
    if w <= -math.pi:
        w = math.pi
    return w


def relative_azimuth(listener: ListenerPose, speaker_pos: Vec3) -> float:
    """Azimuth of a point in the listener's horizontal frame.

    Compensates both listener translation and yaw; elevation is discarded
    (single-height ring, 2D panning).  With the right-handed yaw of
    ListenerPose, panning a world direction a with yaw w equals panning
    a - w with yaw 0.
    """
    dx = speaker_pos.x - listener.position.x
    dy = speaker_pos.y - listener.position.y
    if math.hypot(dx, dy) < _MIN_HORIZONTAL_DIST:
        raise DegenerateGeometry(
            f"point ({speaker_pos.x}, {speaker_pos.y}) is on top of the listener"
        )
    return wrap_angle(math.atan2(dx, dy) + listener.yaw)


def relative_distance(listener: ListenerPose, speaker_pos: Vec3) -> float:
    """Euclidean 3D distance from the listener to a point."""
    return _dist3(listener.position, speaker_pos)


def aliasing_frequency(layout: LoudspeakerLayout, c: float = SPEED_OF_SOUND) -> AliasingReport:
    """Spatial-aliasing limit of the ring: f_al = c / (2 d).

    d is the minimum ring-adjacent spacing between speakers on *distinct*
    buses (a shared-bus pair radiates one signal, so its internal spacing
    does not sample the wavefront).
    """
    if c <= 0:
        raise ValueError("speed of sound must be positive")
    speakers = layout.panning_speakers()
    if len({sp.bus for sp in speakers}) < 2:
        raise InvalidLayout("need at least 2 distinct-bus speakers for an aliasing figure")
    n = len(speakers)
    d = None
    for i in range(n):
        a, b = speakers[i], speakers[(i + 1) % n]
        if a.bus == b.bus:
            continue
        dist = _dist3(a.position, b.position)
        if d is None or dist < d:
            d = dist
    return AliasingReport(min_spacing_d=d, speed_of_sound_c=c, f_al=c / (2.0 * d))


def room_half(listener: ListenerPose, room_width: float) -> RoomHalf:
    """Which half of the room the listener stands in; x == 0 counts as Right."""
    if room_width <= 0:
        raise ValueError("room_width must be positive")
    return RoomHalf.LEFT if listener.position.x < 0.0 else RoomHalf.RIGHT


def _dist3(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


# Canonical ring: 10 speakers on the wall-top perimeter of the 9.6 x 3 m
# footprint at z = 3.2 m, listed in ring order (clockwise from the front-left
# center speaker).  The front-center pair (1.2 m apart) shares bus 0 and the
# rear-center pair shares bus 4; every other adjacent gap is >= 1.94 m, with
# the minimum distinct-bus gap exactly 1.94 m.  Exact positions along the
# walls are a reconstruction from the spacing constraints, not a survey.
_CANONICAL_SPEAKERS = (
    (0, 0, -0.60, 1.5),
    (1, 0, 0.60, 1.5),
    (2, 1, 2.54, 1.5),
    (3, 2, 4.80, 0.0),
    (4, 3, 2.54, -1.5),
    (5, 4, 0.60, -1.5),
    (6, 4, -0.60, -1.5),
    (7, 5, -2.54, -1.5),
    (8, 6, -4.80, 0.0),
    (9, 7, -2.54, 1.5),
)

_CANONICAL_Z = 3.2


def canonical_layout() -> LoudspeakerLayout:
    """The layout the engine ships with: 10 speakers on 8 buses."""
    speakers = tuple(
        Loudspeaker(id=i, position=Vec3(x, y, _CANONICAL_Z), bus=bus)
        for i, bus, x, y in _CANONICAL_SPEAKERS
    )
    return LoudspeakerLayout(speakers=speakers)


def parse_layout_file(path) -> LoudspeakerLayout:
    """Parse a layout config: `speaker <id> <bus> <x> <y> <z>` lines in ring
    order plus `room_width`, `room_depth` and optional `room_height`,
    `bus_count`, `min_spacing`, `subwoofer <bus>` keys.  Violations are
    rejected with line-numbered errors."""
    path = Path(path)
    speakers = []
    speaker_lines = {}
    keys = {
        "room_width": 9.6,
        "room_depth": 3.0,
        "room_height": 3.0,
        "min_spacing": 1.94,
        "bus_count": 8,
    }
    subwoofers = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read layout file: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "speaker":
            if len(fields) != 6:
                raise ConfigError(path, line_no, "expected: speaker <id> <bus> <x> <y> <z>")
            try:
                sid, bus = int(fields[1]), int(fields[2])
                x, y, z = (float(v) for v in fields[3:6])
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad speaker field: {exc}") from exc
            if sid in speaker_lines:
                raise ConfigError(path, line_no, f"duplicate speaker id {sid}")
            speaker_lines[sid] = line_no
            speakers.append(Loudspeaker(id=sid, position=Vec3(x, y, z), bus=bus))
        elif kind == "subwoofer":
            if len(fields) != 2:
                raise ConfigError(path, line_no, "expected: subwoofer <bus>")
            try:
                subwoofers.append(int(fields[1]))
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad subwoofer bus: {exc}") from exc
        elif kind in keys:
            if len(fields) != 2:
                raise ConfigError(path, line_no, f"expected: {kind} <value>")
            try:
                value = int(fields[1]) if kind == "bus_count" else float(fields[1])
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad {kind}: {exc}") from exc
            keys[kind] = value
        else:
            raise ConfigError(path, line_no, f"unknown directive {kind!r}")
    if not speakers:
        raise ConfigError(path, 0, "layout declares no speakers")
    try:
        return LoudspeakerLayout(
            speakers=tuple(speakers),
            bus_count=keys["bus_count"],
            room_width=keys["room_width"],
            room_depth=keys["room_depth"],
            room_height=keys["room_height"],
            min_spacing=keys["min_spacing"],
            subwoofer_buses=tuple(subwoofers),
        )
    except InvalidLayout as exc:
        # Attribute the failure to the first offending speaker line if the
        # message names one, otherwise to the file as a whole.
        line_no = 0
        msg = str(exc)
        for sid, ln in speaker_lines.items():
            if f"speaker {sid}:" in msg or f"speakers {sid}/" in msg:
                line_no = ln
                break
        raise ConfigError(path, line_no, msg) from exc
