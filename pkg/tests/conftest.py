"""Shared fixtures: a small test scene with generated clips, plus cached
late-field impulse responses (they back several acceptance criteria)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from panstage.audio_io import write_wav_float32
from panstage.reverb import LateField, church_preset, factory_preset

SAMPLE_RATE = 48000


def _tone(freq: float, seconds: float, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(seconds * SAMPLE_RATE)) / SAMPLE_RATE
    return amplitude * np.sin(2 * np.pi * freq * t)


def _click(seconds: float) -> np.ndarray:
    out = np.zeros(int(seconds * SAMPLE_RATE))
    out[0] = 1.0
    return out


def _noise(seconds: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 0.4 * rng.standard_normal(int(seconds * SAMPLE_RATE))


@pytest.fixture(scope="session")
def studio(tmp_path_factory) -> Path:
    """Directory with clips, manifest and scene used across engine tests.

    tone440: 2 s loop (one bar at 120) of a 440 Hz sine, phase-continuous
    across the loop seam.  clickloop: 0.5 s loop with a single leading
    impulse, for beat-grid checks.
    """
    root = tmp_path_factory.mktemp("studio")
    clips = {
        "tone440": ("loop", 120, _tone(440.0, 2.0)),
        "clickloop": ("loop", 120, _click(0.5)),
        "hit": ("oneshot", None, _click(0.25)),
        "hit_b": ("oneshot", None, _tone(330.0, 0.25)),
        "shaker": ("oneshot", None, _noise(0.15, seed=5)),
        "motor": ("oneshot", None, _noise(0.3, seed=6)),
    }
    manifest_lines = []
    for clip_id, (kind, bpm, samples) in clips.items():
        write_wav_float32(root / f"{clip_id}.wav", samples[None, :], SAMPLE_RATE)
        bpm_token = "-" if bpm is None else str(bpm)
        manifest_lines.append(f"clip {clip_id} {kind} {bpm_token} {clip_id}.wav")
    (root / "clips.txt").write_text("\n".join(manifest_lines) + "\n")
    (root / "scene.txt").write_text(
        "\n".join(
            [
                "clips clips.txt",
                "source src_a machine_a 2.0 0.5 1.0",
                "source src_b machine_b -2.0 0.5 1.0",
                "source pad gesture_pad 0.5 0.5 1.2",
                "source crane crane -2.0 0.0 2.0",
                "bind src_a tone440",
                "bind src_a hit",
                "bind src_b clickloop",
                "bind src_b hit_b",
                "crane crane -3.0 -0.5 -1.0 -0.5 -1.0 0.9 -3.0 0.9",
                "heights crane 1.0 2.0 2.8",
                "crane_speed crane 1.0",
                "crane_clip crane motor",
                "shake maracas pad shaker",
            ]
        )
        + "\n"
    )
    return root


@pytest.fixture(scope="session")
def late_irs() -> dict[str, np.ndarray]:
    """Late-field impulse responses per preset, (8, n) at 48 kHz."""
    return {
        "factory": LateField(factory_preset(), SAMPLE_RATE).render_ir(2.5),
        "church": LateField(church_preset(), SAMPLE_RATE).render_ir(5.0),
    }


def xcorr_peak(a: np.ndarray, b: np.ndarray) -> float:
    """Peak of the normalized cross-correlation over all lags."""
    n = a.shape[0] + b.shape[0] - 1
    nfft = 1 << (n - 1).bit_length()
    spectrum = np.fft.rfft(a, nfft) * np.conj(np.fft.rfft(b, nfft))
    cc = np.fft.irfft(spectrum, nfft)
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    return float(np.abs(cc).max() / denom) if denom > 0 else 0.0
