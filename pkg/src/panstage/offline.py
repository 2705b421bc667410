"""Deterministic offline rendering of scenario files.

The offline path drives the exact same Engine.process_block as the live
server, so anything measured on a rendered file holds for the live run.
Scenario events apply at the boundary of the first block that starts at or
after their timestamp.  Identical inputs produce bit-identical output
files: 8-channel 32-bit float PCM, channel order = bus order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import write_wav_float32
from .engine import Engine, EngineConfig, build_engine
from .protocol import ScenarioEvent, parse_scenario_file


@dataclass(frozen=True)
class RenderStats:
    blocks: int
    frames: int
    events_applied: int
    counters: dict


def render_events(engine: Engine, events: list[ScenarioEvent], duration: float) -> np.ndarray:
    """Run the engine for ``duration`` seconds; returns (buses, frames)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    fs = engine.sample_rate
    block = engine.block_size
    total_frames = int(round(duration * fs))
    n_blocks = (total_frames + block - 1) // block
    out = np.empty((engine.layout.bus_count, n_blocks * block))
    next_event = 0
    for b in range(n_blocks):
        block_start = b * block
        while next_event < len(events) and events[next_event].time * fs <= block_start:
            engine.submit(events[next_event].message)
            next_event += 1
        out[:, block_start : block_start + block] = engine.process_block()
    # Late events beyond the rendered horizon are dropped silently.
    return out[:, :total_frames]


def render_offline(
    scenario_path,
    duration: float,
    out_path,
    layout_path=None,
    scene_path=None,
    preset_path=None,
    config: EngineConfig = EngineConfig(),
) -> RenderStats:
    """Render a scenario file to a multichannel audio file."""
    events = parse_scenario_file(scenario_path) if scenario_path else []
    engine = build_engine(
        layout_path=layout_path,
        scene_path=scene_path,
        preset_path=preset_path,
        config=config,
    )
    data = render_events(engine, events, duration)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_wav_float32(out_path, data, config.sample_rate)
    return RenderStats(
        blocks=(data.shape[1] + config.block_size - 1) // config.block_size,
        frames=data.shape[1],
        events_applied=engine.counters["messages_applied"],
        counters=dict(engine.counters),
    )
