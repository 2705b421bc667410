"""Tempo-locked sample playback: the semitone tempo clock, clip voices with
cubic resampling, beat-quantized loops and the shake-gesture detector.

Tempo steps multiply the playback rate by 2**(1/12) per step, so pitch and
duration move together the way a varispeed deck would.  Step arithmetic is
integer: +1 followed by -1 is exactly the base rate and twelve steps up is
exactly an octave (rate 2.0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import read_wav_mono
from .errors import ConfigError, UnknownClip

BASE_BPM = 120.0
MAX_TEMPO_STEPS = 24
SHAKE_THRESHOLD = 1.0


@dataclass
class TempoClock:
    """Sample-counting clock with semitone-stepped tempo.

    ``beat_phase`` advances continuously in beats, so beat boundaries stay
    well-defined across tempo changes.
    """

    sample_rate: float
    base_bpm: float = BASE_BPM
    step_index: int = 0
    sample_counter: int = 0
    beat_phase: float = 0.0

    @property
    def bpm(self) -> float:
        return self.base_bpm * 2.0 ** (self.step_index / 12)

    @property
    def rate(self) -> float:
        """Playback-rate multiplier for clips recorded at the base tempo."""
        return 2.0 ** (self.step_index / 12)

    def step(self, direction: int):
        if direction not in (1, -1):
            raise ValueError("tempo step direction must be +1 or -1")
        self.step_index = max(-MAX_TEMPO_STEPS, min(MAX_TEMPO_STEPS, self.step_index + direction))

    def advance(self, n_samples: int):
        self.sample_counter += n_samples
        self.beat_phase += n_samples * self.bpm / (60.0 * self.sample_rate)

    def samples_to_next_beat(self) -> int:
        """Samples until the next beat boundary; 0 when already on one."""
        frac = self.beat_phase - math.floor(self.beat_phase)
        if frac < 1e-9:
            return 0
        remaining_beats = 1.0 - frac
        return int(round(remaining_beats * 60.0 * self.sample_rate / self.bpm))


@dataclass(frozen=True)
class Clip:
    id: str
    samples: np.ndarray  # mono float64
    kind: str  # "loop" | "oneshot"
    native_bpm: float | None = None
    source_rate: float = 48000.0

    def __post_init__(self):
        if self.samples.size == 0:
            raise ValueError(f"clip {self.id!r} has an empty buffer")
        if self.kind not in ("loop", "oneshot"):
            raise ValueError(f"clip {self.id!r}: kind must be loop or oneshot")
        if self.kind == "loop" and self.native_bpm != BASE_BPM:
            raise ValueError(f"loop clip {self.id!r} must declare native_bpm = {BASE_BPM:g}")


def load_clip(clip_id: str, path, kind: str, native_bpm: float | None, engine_rate: float) -> Clip:
    samples, rate = read_wav_mono(path)
    if samples.size == 0:
        raise ValueError(f"clip file {path} is empty")
    clip = Clip(
        id=clip_id,
        samples=np.ascontiguousarray(samples),
        kind=kind,
        native_bpm=native_bpm,
        source_rate=float(rate),
    )
    return clip


def parse_clip_manifest(path) -> list[dict]:
    """Parse `clip <id> <loop|oneshot> <bpm|-> <file>` lines.

    File paths are resolved relative to the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read clip manifest: {exc}") from exc
    entries = []
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] != "clip" or len(fields) != 5:
            raise ConfigError(path, line_no, "expected: clip <id> <loop|oneshot> <bpm|-> <file>")
        clip_id, kind, bpm_token, file_token = fields[1:5]
        if clip_id in seen:
            raise ConfigError(path, line_no, f"duplicate clip id {clip_id!r}")
        seen.add(clip_id)
        if kind not in ("loop", "oneshot"):
            raise ConfigError(path, line_no, f"bad clip kind {kind!r}")
        if bpm_token == "-":
            native_bpm = None
        else:
            try:
                native_bpm = float(bpm_token)
            except ValueError as exc:
                raise ConfigError(path, line_no, f"bad bpm: {exc}") from exc
        if kind == "loop" and native_bpm != BASE_BPM:
            raise ConfigError(path, line_no, f"loop clips must declare bpm {BASE_BPM:g}")
        entries.append(
            {
                "id": clip_id,
                "kind": kind,
                "native_bpm": native_bpm,
                "path": (path.parent / file_token).resolve(),
            }
        )
    return entries


class ShakeDetector:
    """Hysteresis trigger on the accelerometer rule: |value| inside [-1, 1]
    is gravity, strictly outside means shaking.  One event per excursion."""

    def __init__(self, threshold: float = SHAKE_THRESHOLD):
        self.threshold = threshold
        self.armed = True

    def update(self, value: float) -> bool:
        if not math.isfinite(value):
            return False
        outside = abs(value) > self.threshold
        if outside and self.armed:
            self.armed = False
            return True
        if not outside:
            self.armed = True
        return False


def _cubic_interp(samples: np.ndarray, positions: np.ndarray, wrap: bool) -> np.ndarray:
    """4-point Catmull-Rom resampling at fractional positions."""
    n = samples.shape[0]
    idx = np.floor(positions).astype(np.int64)
    frac = positions - idx
    if wrap:
        x0 = samples[(idx - 1) % n]
        x1 = samples[idx % n]
        x2 = samples[(idx + 1) % n]
        x3 = samples[(idx + 2) % n]
    else:
        x0 = samples[np.clip(idx - 1, 0, n - 1)] * (idx - 1 >= 0)
        x1 = samples[np.clip(idx, 0, n - 1)] * (idx < n)
        x2 = samples[np.clip(idx + 1, 0, n - 1)] * (idx + 1 < n)
        x3 = samples[np.clip(idx + 2, 0, n - 1)] * (idx + 2 < n)
    c1 = 0.5 * (x2 - x0)
    c2 = x0 - 2.5 * x1 + 2.0 * x2 - 0.5 * x3
    c3 = 0.5 * (x3 - x0) + 1.5 * (x1 - x2)
    return ((c3 * frac + c2) * frac + c1) * frac + x1


@dataclass
class Voice:
    clip: Clip
    playhead: float = 0.0
    start_offset: int = 0  # samples into the next rendered block
    finished: bool = False


class ClipPlayer:
    """Active voices of one source; renders a mono mix per block.

    Loops follow the clock rate live; one-shots also track it, so every
    sound in the scene moves with the global tempo.
    """

    def __init__(self, engine_rate: float):
        self.engine_rate = engine_rate
        self.loop_voices: dict[str, Voice] = {}
        self.oneshot_voices: list[Voice] = []

    def trigger_oneshot(self, clip: Clip, offset: int = 0):
        self.oneshot_voices.append(Voice(clip=clip, start_offset=offset))

    def set_loop(self, clip: Clip, on: bool, offset: int = 0) -> bool:
        """Returns True when the loop state changed."""
        if on:
            if clip.id in self.loop_voices:
                return False
            self.loop_voices[clip.id] = Voice(clip=clip, start_offset=offset)
            return True
        return self.loop_voices.pop(clip.id, None) is not None

    def active_loop_ids(self) -> list[str]:
        return sorted(self.loop_voices)

    def render(self, n: int, clock_rate: float) -> np.ndarray:
        out = np.zeros(n)
        for voice in list(self.loop_voices.values()):
            self._render_voice(voice, out, n, clock_rate, wrap=True)
        for voice in self.oneshot_voices:
            self._render_voice(voice, out, n, clock_rate, wrap=False)
        self.oneshot_voices = [v for v in self.oneshot_voices if not v.finished]
        return out

    def _render_voice(self, voice: Voice, out: np.ndarray, n: int, clock_rate: float, wrap: bool):
        clip = voice.clip
        rate = clock_rate * clip.source_rate / self.engine_rate
        start = voice.start_offset
        if start >= n:
            voice.start_offset = start - n
            return
        voice.start_offset = 0
        count = n - start
        positions = voice.playhead + rate * np.arange(count)
        if wrap:
            out[start:] += _cubic_interp(clip.samples, positions, wrap=True)
            voice.playhead = float((voice.playhead + rate * count) % clip.samples.shape[0])
        else:
            limit = clip.samples.shape[0]
            valid = positions < limit
            live = int(valid.sum())
            if live > 0:
                out[start : start + live] += _cubic_interp(
                    clip.samples, positions[:live], wrap=False
                )
            voice.playhead = float(voice.playhead + rate * count)
            if voice.playhead >= limit:
                voice.finished = True


class ClipStore:
    def __init__(self):
        self._clips: dict[str, Clip] = {}

    def add(self, clip: Clip):
        self._clips[clip.id] = clip

    def get(self, clip_id: str) -> Clip:
        clip = self._clips.get(clip_id)
        if clip is None:
            raise UnknownClip(f"clip {clip_id!r} is not loaded")
        return clip

    def __contains__(self, clip_id: str) -> bool:
        return clip_id in self._clips

    def ids(self) -> list[str]:
        return sorted(self._clips)
