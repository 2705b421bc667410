"""WAV reading and writing.

Input clips may be 16/24/32-bit PCM or float, mono or stereo, 44.1 or
48 kHz.  Engine output is written as multichannel 32-bit float PCM with
channel order = bus order; identical sample data produces bit-identical
files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float64 in [-1, 1], shape (frames, channels)."""
    rate, data = wavfile.read(str(path))
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        scaled = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        scaled = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        scaled = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        scaled = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype} in {path}")
    return scaled, int(rate)


def read_wav_mono(path) -> tuple[np.ndarray, int]:
    """Read a WAV file downmixed to mono (channel mean)."""
    data, rate = read_wav(path)
    return data.mean(axis=1), rate


def write_wav_float32(path, channels: np.ndarray, sample_rate: int):
    """Write (channels, frames) float data as 32-bit float PCM."""
    data = np.asarray(channels, dtype=np.float32)
    if data.ndim == 1:
        data = data[None, :]
    wavfile.write(str(path), int(sample_rate), np.ascontiguousarray(data.T))


class StreamingWavWriter:
    """Incremental float32 WAV writer for the live file sink.

    Writes a provisional header up front and patches the chunk sizes on
    close, so a long-running serve session can stream blocks to disk.
    """

    def __init__(self, path, sample_rate: int, channels: int):
        self.path = Path(path)
        self.sample_rate = int(sample_rate)
        self.channels = int(channels)
        self._frames = 0
        self._fh = open(self.path, "wb")
        self._write_header(0)

    def _write_header(self, data_bytes: int):
        fh = self._fh
        fh.seek(0)
        block_align = 4 * self.channels
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 36 + data_bytes))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(
            struct.pack(
                "<IHHIIHH",
                16,
                3,  # WAVE_FORMAT_IEEE_FLOAT
                self.channels,
                self.sample_rate,
                self.sample_rate * block_align,
                block_align,
                32,
            )
        )
        fh.write(b"data")
        fh.write(struct.pack("<I", data_bytes))

    def write_block(self, block: np.ndarray):
        """Append a (channels, frames) block."""
        data = np.asarray(block, dtype=np.float32)
        frames = data.shape[1]
        self._fh.write(np.ascontiguousarray(data.T).tobytes())
        self._frames += frames

    def close(self):
        if self._fh.closed:
            return
        data_bytes = self._frames * 4 * self.channels
        self._write_header(data_bytes)
        self._fh.close()


def read_wav_header_is_float(path) -> bool:
    """True when the file is IEEE-float WAV (used by tests and tools)."""
    with open(path, "rb") as fh:
        header = fh.read(22)
    return len(header) >= 22 and struct.unpack("<H", header[20:22])[0] == 3


def generate_tone(frequency: float, seconds: float, sample_rate: int, amplitude: float = 0.5):
    """Sine test tone, handy for demo assets and tests."""
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    return amplitude * np.sin(2.0 * np.pi * frequency * t)


def generate_click(seconds: float, sample_rate: int, amplitude: float = 1.0):
    """Single-sample impulse padded to length."""
    out = np.zeros(int(round(seconds * sample_rate)))
    out[0] = amplitude
    return out


__all__ = [
    "read_wav",
    "read_wav_mono",
    "write_wav_float32",
    "StreamingWavWriter",
    "read_wav_header_is_float",
    "generate_tone",
    "generate_click",
]
