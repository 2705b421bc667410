"""The block renderer: per-source direct/early routing, the shared late
field, tempo-locked playback and control-message application.

Per block, for every active source: the dry signal is panned at spread 0
toward its listener-relative azimuth and scaled by the inverse-distance
law; the same dry signal drives the source's early bank, whose 8
decorrelated channels each feed their own bus scaled by the spread-50 gain
fan at the same azimuth; and an unscaled (pre-fade) sum of all sources
feeds the shared late field, whose 8 streams land equally on the buses.

Control messages arrive on a bounded queue and are applied at block
boundaries in arrival order; the queue drops oldest on overflow and counts
the drops.  A read-only snapshot is published after every block.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import protocol
from .errors import DegenerateGeometry, ParseError, UnknownSource
from .geometry import (
    ListenerPose,
    LoudspeakerLayout,
    Vec3,
    relative_azimuth,
    relative_distance,
)
from .panner import SpreadParam, direct_level, pan
from .reverb import EarlyBank, LateField, RoomPreset, default_presets
from .scene import (
    ROOM_CROSSFADE_SECONDS,
    ROOM_SWITCH_HYSTERESIS,
    RoomSwitcher,
    Scene,
    clamp_source_position,
)
from .sequencer import ClipPlayer, ClipStore, ShakeDetector, TempoClock, load_clip, parse_clip_manifest

DEFAULT_SAMPLE_RATE = 48000
DEFAULT_BLOCK_SIZE = 256
DEFAULT_LISTENER = Vec3(0.0, 0.0, 1.7)

_DENORMAL_FLOOR = 1e-30


def _is_zero_gain(curve) -> bool:
    return isinstance(curve, float) and curve == 0.0


@dataclass(frozen=True)
class EngineConfig:
    sample_rate: int = DEFAULT_SAMPLE_RATE
    block_size: int = DEFAULT_BLOCK_SIZE
    early_level_db: float = -6.0
    late_level_db: float = 0.0
    queue_limit: int = 1024
    room_hysteresis: float = ROOM_SWITCH_HYSTERESIS
    room_crossfade_seconds: float = ROOM_CROSSFADE_SECONDS


@dataclass(frozen=True)
class Snapshot:
    """Published once per block for observers (STATUS replies, UI, logs)."""

    block_index: int
    time_seconds: float
    bpm: float
    tempo_step: int
    room: str
    crossfade_progress: float
    active_loops: tuple[str, ...]
    meters_db: tuple[float, ...]
    counters: dict[str, int]


class Engine:
    def __init__(
        self,
        layout: LoudspeakerLayout,
        scene: Scene | None = None,
        presets: dict[str, RoomPreset] | None = None,
        config: EngineConfig = EngineConfig(),
    ):
        self.layout = layout
        self.scene = scene if scene is not None else Scene.empty()
        self.presets = presets if presets is not None else default_presets()
        if set(self.presets) != {"factory", "church"}:
            raise ValueError("engine needs exactly the 'factory' and 'church' presets")
        self.config = config
        self.sample_rate = config.sample_rate
        self.block_size = config.block_size

        self.clock = TempoClock(sample_rate=float(config.sample_rate))
        self.clips = ClipStore()
        if self.scene.clip_manifest is not None:
            for entry in parse_clip_manifest(self.scene.clip_manifest):
                self.clips.add(
                    load_clip(
                        entry["id"],
                        entry["path"],
                        entry["kind"],
                        entry["native_bpm"],
                        float(config.sample_rate),
                    )
                )

        self.listener = ListenerPose(position=DEFAULT_LISTENER, yaw=0.0)
        initial_room = "factory" if self.listener.position.x < 0 else "church"
        self.room = RoomSwitcher(
            initial=initial_room,
            hysteresis=config.room_hysteresis,
            crossfade_seconds=config.room_crossfade_seconds,
            sample_rate=float(config.sample_rate),
        )

        self.players: dict[str, ClipPlayer] = {}
        self.early_banks: dict[str, dict[str, EarlyBank]] = {}
        for sid in self.scene.sources:
            self._attach_source(sid)
        self.late_fields = {
            name: LateField(preset, float(config.sample_rate))
            for name, preset in self.presets.items()
        }
        self.shake_detectors: dict[str, ShakeDetector] = {
            gesture: ShakeDetector() for gesture in self.scene.shake_bindings
        }

        self._direct_spread = SpreadParam(0.0)
        self._early_spread = self.presets["factory"].early_send_spread
        self._early_gain = 10.0 ** (config.early_level_db / 20.0)
        self._late_gain = 10.0 ** (config.late_level_db / 20.0)
        self._last_gains: dict[str, tuple] = {}

        self._queue: deque = deque(maxlen=config.queue_limit)
        self._block_index = 0
        self.counters = {
            "messages_applied": 0,
            "parse_errors": 0,
            "dropped_events": 0,
            "unknown_clip": 0,
            "unknown_source": 0,
            "shake_triggers": 0,
            "crane_moves": 0,
            "degenerate_geometry": 0,
            "flushed_samples": 0,
        }
        self.snapshot = self._make_snapshot(np.zeros(layout.bus_count))

    # -- control intake (any thread) -----------------------------------

    def submit(self, message: protocol.ControlMessage):
        if len(self._queue) == self._queue.maxlen:
            self.counters["dropped_events"] += 1
        self._queue.append(message)

    def submit_text(self, datagram) -> protocol.ControlMessage | protocol.StatusQuery:
        """Parse and enqueue one datagram; STATUS queries are returned
        without touching the queue.  Raises ParseError on bad input."""
        try:
            msg = protocol.parse_message(datagram)
        except ParseError:
            self.counters["parse_errors"] += 1
            raise
        if isinstance(msg, protocol.StatusQuery):
            return msg
        self.submit(msg)
        return msg

    # -- source plumbing -------------------------------------------------

    def _attach_source(self, source_id: str):
        self.players[source_id] = ClipPlayer(engine_rate=float(self.sample_rate))
        self.early_banks[source_id] = {
            name: EarlyBank(preset, float(self.sample_rate), self.block_size)
            for name, preset in self.presets.items()
        }

    def early_bank_process(self, source_id: str, block, preset_name: str = "factory"):
        """Run one source's early bank directly (analysis hook).

        Raises UnknownSource when no bank was allocated for the id.
        """
        banks = self.early_banks.get(source_id)
        if banks is None:
            raise UnknownSource(f"no early bank allocated for source {source_id!r}")
        return banks[preset_name].process(block)

    # -- message application (render thread, block boundary) ------------

    def _apply(self, msg: protocol.ControlMessage):
        c = self.counters
        c["messages_applied"] += 1
        if isinstance(msg, protocol.PosListener):
            pos = self.layout.clamp_position(Vec3(msg.x, msg.y, msg.z))
            self.listener = ListenerPose(position=pos, yaw=msg.yaw)
        elif isinstance(msg, protocol.PosSource):
            src = self.scene.sources.get(msg.id)
            if src is None:
                c["unknown_source"] += 1
                return
            if msg.id == self.scene.crane_source_id:
                # The crane owns its position through its automation.
                c["unknown_source"] += 1
                return
            src.position = clamp_source_position(
                Vec3(msg.x, msg.y, msg.z),
                self.layout.room_width,
                self.layout.room_depth,
                self.layout.room_height,
            )
        elif isinstance(msg, protocol.Trig):
            self._trigger_clip(msg.clip_id)
        elif isinstance(msg, protocol.Loop):
            self._set_loop(msg.loop_id, msg.on)
        elif isinstance(msg, protocol.Tempo):
            self.clock.step(msg.delta)
        elif isinstance(msg, protocol.Shake):
            binding = self.scene.shake_bindings.get(msg.gesture_id)
            detector = self.shake_detectors.get(msg.gesture_id)
            if detector is None or binding is None:
                c["unknown_source"] += 1
                return
            if detector.update(msg.value):
                c["shake_triggers"] += 1
                source_id, clip_id = binding
                self._trigger_clip(clip_id, source_hint=source_id)
        elif isinstance(msg, protocol.Crane):
            crane = self.scene.crane
            if crane is None:
                c["unknown_source"] += 1
                return
            if crane.apply(msg.action):
                c["crane_moves"] += 1
                if crane.move_clip is not None and crane.move_clip in self.clips:
                    player = self.players[self.scene.crane_source_id]
                    clip = self.clips.get(crane.move_clip)
                    # Movement sound restarts from the top on each command.
                    player.oneshot_voices = [
                        v for v in player.oneshot_voices if v.clip.id != clip.id
                    ]
                    player.trigger_oneshot(clip)

    def _trigger_clip(self, clip_id: str, source_hint: str | None = None):
        if clip_id not in self.clips:
            self.counters["unknown_clip"] += 1
            return
        clip = self.clips.get(clip_id)
        source_id = source_hint or self.scene.clip_to_source.get(clip_id)
        if source_id is None or source_id not in self.players:
            self.counters["unknown_source"] += 1
            return
        if clip.kind != "oneshot":
            self.counters["unknown_clip"] += 1
            return
        self.players[source_id].trigger_oneshot(clip)

    def _set_loop(self, loop_id: str, on: bool):
        if loop_id not in self.clips:
            self.counters["unknown_clip"] += 1
            return
        clip = self.clips.get(loop_id)
        source_id = self.scene.clip_to_source.get(loop_id)
        if source_id is None or source_id not in self.players or clip.kind != "loop":
            self.counters["unknown_clip"] += 1
            return
        offset = self.clock.samples_to_next_beat() if on else 0
        self.players[source_id].set_loop(clip, on, offset=offset)

    # -- rendering -------------------------------------------------------

    def process_block(self) -> np.ndarray:
        n = self.block_size
        while self._queue:
            self._apply(self._queue.popleft())

        dt = n / self.sample_rate
        if self.scene.crane is not None:
            self.scene.sources[self.scene.crane_source_id].position = self.scene.crane.update(dt)

        p_before = self.room.state.crossfade_progress
        fading_before = self.room.state.fading_from
        self.room.update(self.listener.position.x, n)
        room_curves = self._room_gain_curves(
            p_before, self.room.state.crossfade_progress, fading_before, n
        )

        buses = self.layout.bus_count
        out = np.zeros((buses, n))
        late_input = np.zeros(n)
        clock_rate = self.clock.rate

        for sid in sorted(self.players):
            player = self.players[sid]
            source = self.scene.sources[sid]
            dry = player.render(n, clock_rate)
            late_input += dry

            gains = self._source_gains(sid, source.position)
            if gains is None:
                continue
            g0, g50, dist_gain = gains

            if np.any(dry):
                for b in range(buses):
                    if g0[b] != 0.0:
                        out[b] += (g0[b] * dist_gain) * dry

            early_scale = self._early_gain * dist_gain
            for name, curve in room_curves.items():
                # Both rooms keep processing so their state is warm when the
                # listener walks back; only the output weight fades.
                early = self.early_banks[sid][name].process(dry)
                if _is_zero_gain(curve) or not np.any(early):
                    continue
                # curve is a scalar when settled, a per-sample ramp mid-fade
                out += early * (np.asarray(g50)[:, None] * early_scale) * curve

        for name, curve in room_curves.items():
            streams = self.late_fields[name].process(late_input)
            if not _is_zero_gain(curve):
                out += streams * (self._late_gain * curve)

        bad = ~np.isfinite(out)
        tiny = np.abs(out) < _DENORMAL_FLOOR
        flush = bad | (tiny & (out != 0.0))
        if flush.any():
            self.counters["flushed_samples"] += int(flush.sum())
            out[flush] = 0.0

        self.clock.advance(n)
        self._block_index += 1
        meters = np.sqrt(np.mean(out**2, axis=1))
        self.snapshot = self._make_snapshot(meters)
        return out

    def _source_gains(self, sid: str, position: Vec3):
        try:
            az = relative_azimuth(self.listener, position)
            dist = relative_distance(self.listener, position)
            g0 = pan(az, self.listener, self.layout, self._direct_spread).gains
            g50 = pan(az, self.listener, self.layout, self._early_spread).gains
            gains = (g0, g50, direct_level(dist))
            self._last_gains[sid] = gains
            return gains
        except DegenerateGeometry:
            # Source directly over the listener: hold the previous direction
            # rather than glitching; fall back to an even spread at start.
            self.counters["degenerate_geometry"] += 1
            if sid in self._last_gains:
                return self._last_gains[sid]
            buses = self.layout.bus_count
            even = tuple([1.0 / math.sqrt(buses)] * buses)
            dist = relative_distance(self.listener, position)
            return (even, even, direct_level(dist))

    def _room_gain_curves(self, p0: float, p1: float, fading_before: str | None, n: int):
        """Equal-power output gains per room, per-sample during a fade.

        Every preset appears in the result (inactive ones at gain 0) so the
        render loop keeps feeding all fields.  p0/p1 are the fade progress
        before and after this block; a switch that fired this block resets
        the ramp origin to 0 so the new room enters silently, and the block
        that completes a fade still ramps the old room's tail to zero.
        """
        state = self.room.state
        others = [name for name in self.presets if name != state.active]
        if p0 >= 1.0 and p1 >= 1.0:
            curves = {state.active: 1.0}
            for name in others:
                curves[name] = 0.0
            return curves
        if p1 < p0:
            p0 = 0.0  # a new fade started within this block
        fading = state.fading_from if state.fading_from is not None else fading_before
        p = np.linspace(p0, p1, n, endpoint=False) + (p1 - p0) / (2.0 * n)
        np.clip(p, 0.0, 1.0, out=p)
        curves = {state.active: np.sin(0.5 * math.pi * p)}
        for name in others:
            if name == fading:
                curves[name] = np.cos(0.5 * math.pi * p)
            else:
                curves[name] = 0.0
        return curves

    # -- observation ------------------------------------------------------

    def _make_snapshot(self, meters_rms: np.ndarray) -> Snapshot:
        floor = 1e-6
        meters_db = tuple(
            20.0 * math.log10(max(float(v), floor)) for v in meters_rms
        )
        loops: list[str] = []
        for sid in sorted(self.players):
            loops.extend(self.players[sid].active_loop_ids())
        return Snapshot(
            block_index=self._block_index,
            time_seconds=self._block_index * self.block_size / self.sample_rate,
            bpm=self.clock.bpm,
            tempo_step=self.clock.step_index,
            room=self.room.state.active,
            crossfade_progress=self.room.state.crossfade_progress,
            active_loops=tuple(loops),
            meters_db=meters_db,
            counters=dict(self.counters),
        )


def build_engine(
    layout_path=None,
    scene_path=None,
    preset_path=None,
    config: EngineConfig = EngineConfig(),
) -> Engine:
    """Convenience constructor from config files, with built-in defaults."""
    from .geometry import canonical_layout, parse_layout_file
    from .reverb import parse_preset_file
    from .scene import parse_scene_file

    layout = parse_layout_file(layout_path) if layout_path else canonical_layout()
    scene = parse_scene_file(scene_path) if scene_path else Scene.empty()
    presets = parse_preset_file(preset_path) if preset_path else default_presets()
    return Engine(layout=layout, scene=scene, presets=presets, config=config)


__all__ = [
    "Engine",
    "EngineConfig",
    "Snapshot",
    "build_engine",
    "DEFAULT_SAMPLE_RATE",
    "DEFAULT_BLOCK_SIZE",
]
