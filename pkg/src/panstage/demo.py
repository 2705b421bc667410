"""Self-contained demo assets: synth clips plus matching config files.

`panstage make-demo --dir D` writes everything `serve` and `render` need
to run out of the box, all deterministically generated, so the repo ships
no binary audio.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import write_wav_float32

SAMPLE_RATE = 48000


def _env(n: int, decay: float) -> np.ndarray:
    return np.exp(-decay * np.arange(n) / SAMPLE_RATE)


def _thump(freq: float, seconds: float, decay: float = 18.0) -> np.ndarray:
    n = int(seconds * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    sweep = freq * np.exp(-3.0 * t)  # pitch drops like a drum skin
    phase = 2.0 * np.pi * np.cumsum(sweep) / SAMPLE_RATE
    return np.sin(phase) * _env(n, decay)


def _noise_burst(seconds: float, decay: float, seed: int, highpass: float = 0.6) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = int(seconds * SAMPLE_RATE)
    noise = rng.standard_normal(n)
    noise[1:] -= highpass * noise[:-1]  # crude brightening
    return noise * _env(n, decay) * 0.4


def _clang(freq: float, seconds: float, seed: int) -> np.ndarray:
    n = int(seconds * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    rng = np.random.default_rng(seed)
    partials = freq * np.array([1.0, 2.76, 5.4, 8.93])  # bell-like inharmonics
    out = np.zeros(n)
    for k, p in enumerate(partials):
        out += np.sin(2.0 * np.pi * p * t + rng.uniform(0, 2 * np.pi)) / (k + 1.5)
    return out * _env(n, 9.0) * 0.35

def _bar_loop(events, seconds: float = 2.0) -> np.ndarray:
    """Place (time, samples) events in a 1-bar (120 BPM) loop buffer."""
    n = int(seconds * SAMPLE_RATE)
    out = np.zeros(n)
    for when, snd in events:
        i = int(when * SAMPLE_RATE)
        j = min(n, i + snd.shape[0])
        out[i:j] += snd[: j - i]
    peak = np.abs(out).max()
    return out * (0.7 / peak) if peak > 0 else out


def demo_clips() -> dict[str, np.ndarray]:
    kick = _thump(110.0, 0.35)
    hat = _noise_burst(0.10, 60.0, seed=11)
    clang = _clang(523.0, 0.8, seed=12)
    return {
        "loop_a": _bar_loop(
            [(0.0, kick), (0.5, hat), (1.0, kick), (1.5, hat), (1.75, hat)]
        ),
        "loop_b": _bar_loop(
            [(0.0, clang * 0.6), (0.75, hat), (1.0, _thump(165.0, 0.3)), (1.5, clang * 0.4)]
        ),
        "hit_a": _clang(392.0, 1.2, seed=21),
        "hit_b": _thump(82.0, 0.6, decay=10.0),
        "maracas": _noise_burst(0.18, 38.0, seed=31),
        "udu": _thump(196.0, 0.4, decay=14.0),
        "crane_move": _noise_burst(0.5, 8.0, seed=41, highpass=0.2) * 0.8,
    }


_CLIPS_MANIFEST = """\
# clip <id> <loop|oneshot> <bpm|-> <file>
clip loop_a loop 120 loop_a.wav
clip loop_b loop 120 loop_b.wav
clip hit_a oneshot - hit_a.wav
clip hit_b oneshot - hit_b.wav
clip maracas oneshot - maracas.wav
clip udu oneshot - udu.wav
clip crane_move oneshot - crane_move.wav
"""

_SCENE = """\
# Two machines, a travelling crane circling the left machine, and a
# gesture pad for the shake-triggered percussion.
clips clips.txt
source machine_a machine_a 2.4 0.75 1.0
source machine_b machine_b -2.4 0.75 1.0
source crane crane -2.4 0.0 2.4
source pad gesture_pad -2.4 0.75 1.2
bind machine_a loop_a
bind machine_a hit_a
bind machine_b loop_b
bind machine_b hit_b
crane crane -3.6 -0.6 -1.2 -0.6 -1.2 0.9 -3.6 0.9
heights crane 1.2 2.0 2.8
crane_speed crane 1.0
crane_clip crane crane_move
shake maracas pad maracas
shake udu pad udu
"""

_SCENARIO = """\
# A short conducted take: loop in the factory, tempo up, shake, crane
# move, then walk into the church half.
0.0 POS LISTENER -1.0 0.0 1.7 0.0
0.0 LOOP loop_a ON
1.0 TRIG hit_a
2.0 TEMPO +
2.5 SHAKE maracas 1.4
2.6 SHAKE maracas 0.0
3.0 CRANE NEXT
4.0 POS LISTENER 1.0 0.0 1.7 0.0
5.5 LOOP loop_a OFF
"""


def write_demo(directory) -> Path:
    """Write demo clips, scene, manifest and scenario into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for clip_id, samples in demo_clips().items():
        write_wav_float32(directory / f"{clip_id}.wav", samples[None, :], SAMPLE_RATE)
    (directory / "clips.txt").write_text(_CLIPS_MANIFEST)
    (directory / "scene.txt").write_text(_SCENE)
    (directory / "scenario.txt").write_text(_SCENARIO)
    return directory
