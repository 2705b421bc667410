"""Sequencer: semitone tempo arithmetic, resampling pitch law, beat grid,
shake hysteresis and the clip manifest."""

import math

import numpy as np
import pytest

from conftest import SAMPLE_RATE
from panstage.errors import ConfigError, UnknownClip
from panstage.sequencer import (
    Clip,
    ClipPlayer,
    ClipStore,
    ShakeDetector,
    TempoClock,
    parse_clip_manifest,
)


class TestTempoClock:
    def test_semitone_step_bpm(self):
        clock = TempoClock(sample_rate=48000.0)
        clock.step(+1)
        # closed-form semitone law: 120 * 2**(1/12) = 127.13557...
        assert clock.bpm == pytest.approx(120.0 * 2 ** (1 / 12), rel=1e-12)
        assert clock.bpm == pytest.approx(127.1356, abs=1e-4)

    def test_step_and_back_is_exact(self):
        clock = TempoClock(sample_rate=48000.0)
        clock.step(+1)
        clock.step(-1)
        assert clock.rate == 1.0
        assert clock.bpm == 120.0

    def test_twelve_steps_is_an_octave(self):
        clock = TempoClock(sample_rate=48000.0)
        for _ in range(12):
            clock.step(+1)
        assert clock.rate == 2.0
        assert clock.bpm == 240.0

    def test_steps_clamped(self):
        clock = TempoClock(sample_rate=48000.0)
        for _ in range(100):
            clock.step(+1)
        assert clock.step_index == 24
        for _ in range(100):
            clock.step(-1)
        assert clock.step_index == -24

    def test_beat_grid(self):
        clock = TempoClock(sample_rate=48000.0)
        assert clock.samples_to_next_beat() == 0  # exactly on a boundary
        clock.advance(14592)  # mid-beat (beat = 24000 samples at 120 BPM)
        assert clock.samples_to_next_beat() == 24000 - 14592

    def test_beat_grid_survives_tempo_change(self):
        clock = TempoClock(sample_rate=48000.0)
        clock.advance(12000)  # half a beat
        for _ in range(12):  # octave up: beat now 12000 samples
            clock.step(+1)
        assert clock.samples_to_next_beat() == 6000


class TestShakeDetector:
    def test_reference_trace(self):
        det = ShakeDetector()
        fired = [det.update(v) for v in (0.9, 1.3, 1.5, 0.5, 1.2)]
        assert fired == [False, True, False, False, True]
        assert sum(fired) == 2

    def test_boundary_is_strict(self):
        det = ShakeDetector()
        assert not any(det.update(1.0) for _ in range(10))

    def test_negative_direction(self):
        det = ShakeDetector()
        assert det.update(-1.4)

    def test_one_event_per_excursion(self):
        det = ShakeDetector()
        values = [0.0, 1.2, 1.5, 2.0, 1.1, 0.0, -1.5, -2.0, 0.5, 1.01]
        assert sum(det.update(v) for v in values) == 3


class TestClips:
    def test_loop_requires_base_bpm(self):
        with pytest.raises(ValueError):
            Clip(id="x", samples=np.ones(10), kind="loop", native_bpm=100.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Clip(id="x", samples=np.array([]), kind="oneshot")

    def test_store_unknown(self):
        store = ClipStore()
        with pytest.raises(UnknownClip):
            store.get("nope")

    def test_manifest_parses(self, studio):
        entries = parse_clip_manifest(studio / "clips.txt")
        ids = {e["id"] for e in entries}
        assert {"tone440", "clickloop", "hit"} <= ids
        tone = next(e for e in entries if e["id"] == "tone440")
        assert tone["kind"] == "loop" and tone["native_bpm"] == 120.0
        assert tone["path"].exists()

    def test_manifest_bad_bpm(self, tmp_path):
        m = tmp_path / "clips.txt"
        m.write_text("clip a loop 90 a.wav\n")
        with pytest.raises(ConfigError) as err:
            parse_clip_manifest(m)
        assert ":1:" in str(err.value)


def _tone_clip(freq: float, seconds: float = 2.0) -> Clip:
    t = np.arange(int(seconds * SAMPLE_RATE)) / SAMPLE_RATE
    return Clip(
        id="tone",
        samples=np.sin(2 * np.pi * freq * t),
        kind="loop",
        native_bpm=120.0,
        source_rate=float(SAMPLE_RATE),
    )


def _render(player: ClipPlayer, n: int, rate: float) -> np.ndarray:
    out = []
    done = 0
    while done < n:
        cs = min(256, n - done)
        out.append(player.render(cs, rate))
        done += cs
    return np.concatenate(out)


def _peak_frequency(signal: np.ndarray) -> float:
    windowed = signal * np.hanning(signal.shape[0])
    spectrum = np.abs(np.fft.rfft(windowed))
    k = int(np.argmax(spectrum))
    return k * SAMPLE_RATE / signal.shape[0]


class TestResampling:
    def test_unity_rate_reproduces_tone(self):
        player = ClipPlayer(engine_rate=float(SAMPLE_RATE))
        player.set_loop(_tone_clip(440.0), True)
        out = _render(player, 2 * SAMPLE_RATE, 1.0)
        assert _peak_frequency(out[SAMPLE_RATE:]) == pytest.approx(440.0, rel=0.005)

    def test_semitone_up_shifts_pitch(self):
        player = ClipPlayer(engine_rate=float(SAMPLE_RATE))
        player.set_loop(_tone_clip(440.0), True)
        rate = 2 ** (1 / 12)
        out = _render(player, 2 * SAMPLE_RATE, rate)
        target = 440.0 * rate  # 466.16 Hz
        assert _peak_frequency(out[SAMPLE_RATE:]) == pytest.approx(target, rel=0.005)

    def test_loop_period_follows_rate(self):
        # click loop of 0.5 s: at rate 2 the clicks arrive every 0.25 s
        clip = Clip(
            id="click",
            samples=np.concatenate(([1.0], np.zeros(SAMPLE_RATE // 2 - 1))),
            kind="loop",
            native_bpm=120.0,
            source_rate=float(SAMPLE_RATE),
        )
        player = ClipPlayer(engine_rate=float(SAMPLE_RATE))
        player.set_loop(clip, True)
        out = _render(player, SAMPLE_RATE, 2.0)
        onsets = np.flatnonzero(np.abs(out) > 0.5)
        gaps = np.diff(onsets)
        assert np.abs(gaps - SAMPLE_RATE / 4).max() <= 256

    def test_start_offset_defers_onset(self):
        clip = Clip(
            id="click",
            samples=np.concatenate(([1.0], np.zeros(999))),
            kind="oneshot",
            source_rate=float(SAMPLE_RATE),
        )
        player = ClipPlayer(engine_rate=float(SAMPLE_RATE))
        player.trigger_oneshot(clip, offset=700)
        out = _render(player, 2048, 1.0)
        assert np.flatnonzero(np.abs(out) > 0.5)[0] == 700

    def test_oneshot_finishes(self):
        clip = Clip(id="c", samples=np.ones(100), kind="oneshot", source_rate=float(SAMPLE_RATE))
        player = ClipPlayer(engine_rate=float(SAMPLE_RATE))
        player.trigger_oneshot(clip)
        _render(player, 1024, 1.0)
        assert player.oneshot_voices == []

    def test_loop_toggle(self):
        player = ClipPlayer(engine_rate=float(SAMPLE_RATE))
        clip = _tone_clip(220.0)
        assert player.set_loop(clip, True)
        assert not player.set_loop(clip, True)  # already on
        assert player.active_loop_ids() == ["tone"]
        assert player.set_loop(clip, False)
        out = player.render(256, 1.0)
        assert not np.any(out)
