"""World state: positioned sources, the travelling crane, and the
listener-driven room switch.

The room follows the listener's half of the floor: left half plays the
low-RT factory, right half the church, with a small hysteresis band around
the centerline so tracking jitter cannot chatter the switch, and at most
one switch per completed crossfade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import Vec3

SOURCE_KINDS = ("machine_a", "machine_b", "crane", "gesture_pad")
ROOM_MARGIN = 2.0  # sources may sit this far outside the room box

ROOM_SWITCH_HYSTERESIS = 0.1  # meters around x = 0
ROOM_CROSSFADE_SECONDS = 0.05


@dataclass
class SourceState:
    id: str
    kind: str
    position: Vec3
    clip_ids: set[str] = field(default_factory=set)

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"source {self.id!r}: unknown kind {self.kind!r}")


def clamp_source_position(p: Vec3, room_width: float, room_depth: float, room_height: float) -> Vec3:
    hw = room_width / 2.0 + ROOM_MARGIN
    hd = room_depth / 2.0 + ROOM_MARGIN
    return Vec3(
        min(max(p.x, -hw), hw),
        min(max(p.y, -hd), hd),
        min(max(p.z, 0.0), room_height + ROOM_MARGIN),
    )


@dataclass
class CraneAutomation:
    """Rectangle path on a horizontal plane plus three discrete heights.

    NEXT starts motion toward the next corner at `speed`; UP/DOWN move the
    hook one height level, clamped at the ends (a clamped command is
    ignored and triggers no sound).
    """

    corners: tuple[tuple[float, float], ...]  # 4 (x, y) pairs
    heights: tuple[float, float, float]
    speed: float = 1.0
    move_clip: str | None = None
    waypoint_index: int = 0
    height_index: int = 0
    position: Vec3 = None  # type: ignore[assignment]
    _target_xy: tuple[float, float] | None = None
    _target_z: float | None = None

    def __post_init__(self):
        if len(self.corners) != 4:
            raise ValueError("crane path needs exactly 4 corners")
        if len(self.heights) != 3 or not (self.heights[0] < self.heights[1] < self.heights[2]):
            raise ValueError("crane needs exactly 3 strictly increasing heights")
        if self.speed <= 0:
            raise ValueError("crane speed must be positive")
        if self.position is None:
            x, y = self.corners[0]
            self.position = Vec3(x, y, self.heights[self.height_index])

    def apply(self, action: str) -> bool:
        """Apply a NEXT/UP/DOWN command; returns True when accepted."""
        if action == "next":
            self.waypoint_index = (self.waypoint_index + 1) % 4
            self._target_xy = self.corners[self.waypoint_index]
            return True
        if action == "up":
            if self.height_index >= 2:
                return False
            self.height_index += 1
            self._target_z = self.heights[self.height_index]
            return True
        if action == "down":
            if self.height_index <= 0:
                return False
            self.height_index -= 1
            self._target_z = self.heights[self.height_index]
            return True
        raise ValueError(f"unknown crane action {action!r}")

    def update(self, dt: float) -> Vec3:
        """Advance linear motion by dt seconds and return the position."""
        x, y, z = self.position.x, self.position.y, self.position.z
        budget = self.speed * dt
        if self._target_xy is not None and budget > 0:
            tx, ty = self._target_xy
            dist = math.hypot(tx - x, ty - y)
            if dist <= budget:
                x, y = tx, ty
                self._target_xy = None
                budget -= dist
            else:
                x += (tx - x) / dist * budget
                y += (ty - y) / dist * budget
                budget = 0.0
        if self._target_z is not None and budget > 0:
            dz = self._target_z - z
            if abs(dz) <= budget:
                z = self._target_z
                self._target_z = None
            else:
                z += math.copysign(budget, dz)
        self.position = Vec3(x, y, z)
        return self.position


@dataclass
class RoomState:
    active: str  # "factory" | "church"
    crossfade_progress: float = 1.0  # 1.0 = settled
    fading_from: str | None = None


class RoomSwitcher:
    """Hysteresis state machine over the listener's x coordinate.

    Left half (x below -hysteresis) selects the factory, right half
    (x above +hysteresis) the church; inside the band nothing changes.
    A pending switch is honored only once the previous crossfade is done.
    """

    def __init__(
        self,
        initial: str = "church",
        hysteresis: float = ROOM_SWITCH_HYSTERESIS,
        crossfade_seconds: float = ROOM_CROSSFADE_SECONDS,
        sample_rate: float = 48000.0,
    ):
        self.state = RoomState(active=initial)
        self.hysteresis = hysteresis
        self.crossfade_samples = max(1, int(round(crossfade_seconds * sample_rate)))
        self.switch_count = 0

    def desired_room(self, listener_x: float) -> str | None:
        if listener_x < -self.hysteresis:
            return "factory"
        if listener_x > self.hysteresis:
            return "church"
        return None

    def update(self, listener_x: float, n_samples: int) -> RoomState:
        """Advance the crossfade by a block and evaluate a possible switch."""
        state = self.state
        if state.crossfade_progress < 1.0:
            step = n_samples / self.crossfade_samples
            state.crossfade_progress = min(1.0, state.crossfade_progress + step)
            if state.crossfade_progress >= 1.0:
                state.fading_from = None
            return state
        desired = self.desired_room(listener_x)
        if desired is not None and desired != state.active:
            state.fading_from = state.active
            state.active = desired
            state.crossfade_progress = 0.0
            self.switch_count += 1
        return state

    def fade_gains(self) -> dict[str, float]:
        """Equal-power gains per room name for the current fade position."""
        state = self.state
        p = state.crossfade_progress
        gains = {state.active: math.sin(0.5 * math.pi * p)}
        if state.fading_from is not None and state.fading_from != state.active:
            gains[state.fading_from] = math.cos(0.5 * math.pi * p)
        return gains


@dataclass
class Scene:
    """Everything the engine needs about the world, parsed from one file."""

    sources: dict[str, SourceState]
    crane: CraneAutomation | None
    crane_source_id: str | None
    shake_bindings: dict[str, tuple[str, str]]  # gesture -> (source_id, clip_id)
    clip_manifest: Path | None
    clip_to_source: dict[str, str]

    @staticmethod
    def empty() -> "Scene":
        return Scene(
            sources={},
            crane=None,
            crane_source_id=None,
            shake_bindings={},
            clip_manifest=None,
            clip_to_source={},
        )


def parse_scene_file(path) -> Scene:
    """Parse the scene config.

    Directives:
        clips <manifest-file>
        source <id> <kind> <x> <y> <z>
        bind <source_id> <clip_id>
        crane <source_id> <x1> <y1> <x2> <y2> <x3> <y3> <x4> <y4>
        heights <source_id> <z1> <z2> <z3>
        crane_speed <source_id> <v>
        crane_clip <source_id> <clip_id>
        shake <gesture_id> <source_id> <clip_id>
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read scene file: {exc}") from exc

    sources: dict[str, SourceState] = {}
    clip_to_source: dict[str, str] = {}
    shake_bindings: dict[str, tuple[str, str]] = {}
    manifest: Path | None = None
    crane_source: str | None = None
    crane_corners = None
    crane_heights = None
    crane_speed = 1.0
    crane_clip = None

    def need_source(source_id: str, line_no: int) -> SourceState:
        src = sources.get(source_id)
        if src is None:
            raise ConfigError(path, line_no, f"unknown source {source_id!r}")
        return src

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "clips":
            if len(fields) != 2:
                raise ConfigError(path, line_no, "expected: clips <manifest-file>")
            manifest = (path.parent / fields[1]).resolve()
        elif kind == "source":
            if len(fields) != 6:
                raise ConfigError(path, line_no, "expected: source <id> <kind> <x> <y> <z>")
            sid, skind = fields[1], fields[2]
            if sid in sources:
                raise ConfigError(path, line_no, f"duplicate source {sid!r}")
            try:
                x, y, z = (float(v) for v in fields[3:6])
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad coordinate: {exc}") from exc
            try:
                sources[sid] = SourceState(id=sid, kind=skind, position=Vec3(x, y, z))
            except ValueError as exc:
                raise ConfigError(path, line_no, str(exc)) from exc
        elif kind == "bind":
            if len(fields) != 3:
                raise ConfigError(path, line_no, "expected: bind <source_id> <clip_id>")
            src = need_source(fields[1], line_no)
            clip_id = fields[2]
            if clip_id in clip_to_source:
                raise ConfigError(path, line_no, f"clip {clip_id!r} already bound")
            src.clip_ids.add(clip_id)
            clip_to_source[clip_id] = src.id
        elif kind == "crane":
            if len(fields) != 10:
                raise ConfigError(path, line_no, "expected: crane <source_id> <8 corner coords>")
            src = need_source(fields[1], line_no)
            if src.kind != "crane":
                raise ConfigError(path, line_no, f"source {src.id!r} is not a crane")
            if crane_source is not None:
                raise ConfigError(path, line_no, "only one crane path is supported")
            crane_source = src.id
            try:
                vals = [float(v) for v in fields[2:10]]
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad corner: {exc}") from exc
            crane_corners = tuple((vals[i], vals[i + 1]) for i in range(0, 8, 2))
        elif kind == "heights":
            if len(fields) != 5:
                raise ConfigError(path, line_no, "expected: heights <source_id> <z1> <z2> <z3>")
            need_source(fields[1], line_no)
            try:
                crane_heights = tuple(float(v) for v in fields[2:5])
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad height: {exc}") from exc
        elif kind == "crane_speed":
            if len(fields) != 3:
                raise ConfigError(path, line_no, "expected: crane_speed <source_id> <v>")
            need_source(fields[1], line_no)
            try:
                crane_speed = float(fields[2])
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad speed: {exc}") from exc
        elif kind == "crane_clip":
            if len(fields) != 3:
                raise ConfigError(path, line_no, "expected: crane_clip <source_id> <clip_id>")
            src = need_source(fields[1], line_no)
            crane_clip = fields[2]
            src.clip_ids.add(crane_clip)
            clip_to_source.setdefault(crane_clip, src.id)
        elif kind == "shake":
            if len(fields) != 4:
                raise ConfigError(path, line_no, "expected: shake <gesture_id> <source_id> <clip_id>")
            gesture, source_id, clip_id = fields[1:4]
            src = need_source(source_id, line_no)
            if gesture in shake_bindings:
                raise ConfigError(path, line_no, f"duplicate shake gesture {gesture!r}")
            shake_bindings[gesture] = (source_id, clip_id)
            src.clip_ids.add(clip_id)
            clip_to_source.setdefault(clip_id, src.id)
        else:
            raise ConfigError(path, line_no, f"unknown directive {kind!r}")

    crane = None
    if crane_source is not None:
        if crane_heights is None:
            raise ConfigError(path, 0, f"crane {crane_source!r} declares no heights")
        try:
            crane = CraneAutomation(
                corners=crane_corners,
                heights=crane_heights,
                speed=crane_speed,
                move_clip=crane_clip,
            )
        except ValueError as exc:
            raise ConfigError(path, 0, str(exc)) from exc
        sources[crane_source].position = crane.position

    return Scene(
        sources=sources,
        crane=crane,
        crane_source_id=crane_source,
        shake_bindings=shake_bindings,
        clip_manifest=manifest,
        clip_to_source=clip_to_source,
    )
