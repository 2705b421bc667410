"""panstage: a listener-tracked multichannel panning and room-acoustics
performance engine with a datagram control protocol, an HTTP bridge and a
deterministic offline renderer."""

__version__ = "0.1.0"

from .engine import Engine, EngineConfig, Snapshot, build_engine
from .errors import (
    ConfigError,
    DegenerateGeometry,
    InsufficientDecay,
    InvalidLayout,
    PanstageError,
    ParseError,
    UnknownClip,
    UnknownSource,
)
from .geometry import (
    AliasingReport,
    ListenerPose,
    Loudspeaker,
    LoudspeakerLayout,
    RoomHalf,
    Vec3,
    aliasing_frequency,
    canonical_layout,
    parse_layout_file,
    relative_azimuth,
    relative_distance,
    room_half,
)
from .panner import PanGains, SpreadParam, direct_level, pan
from .reverb import (
    EarlyBank,
    LateField,
    ReverbUnit,
    ReverbUnitParams,
    RoomPreset,
    RtEstimate,
    calibrate_feedback,
    church_preset,
    default_presets,
    factory_preset,
    measure_rt,
    parse_preset_file,
)
from .offline import RenderStats, render_events, render_offline
from .protocol import (
    ControlMessage,
    Crane,
    Loop,
    PosListener,
    PosSource,
    ScenarioEvent,
    Shake,
    StatusQuery,
    Tempo,
    Trig,
    format_message,
    parse_message,
    parse_scenario_file,
)
from .scene import CraneAutomation, RoomSwitcher, Scene, SourceState, parse_scene_file
from .sequencer import Clip, ShakeDetector, TempoClock
