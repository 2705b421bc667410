"""Room effects: early-reflection banks, the shared late field, and RT tools.

Each reverb unit is a feedback delay network of 4 mutually-coprime delay
lines behind an orthonormal (Hadamard) mixing stage.  The unit-free
``room_size`` knob scales the nominal delay lengths; per-line feedback
gains are solved from the target RT60, which makes the energy decay of
every unit exactly -60 dB per RT60 by construction.

Early units are rendered once to an impulse response, hard-gated at 80 ms
and run as streaming FIR convolutions (so an impulse in produces exactly
zero after the gate).  Late units recirculate live and their 8 output
channels are energy-normalized so every bus receives the same level.

Decorrelation between the four units of a bank comes from their room-size
offsets (base + 0.0/0.1/0.2/0.3): the size seeds a deterministic jitter on
the nominal delay lengths, so neighboring sizes land on genuinely
different coprime delay sets instead of the same rounded values shifted by
a sample or two.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, InsufficientDecay
from .panner import SpreadParam

#: Nominal per-line delay bases, milliseconds per room-size unit.
EARLY_BASES_MS = (0.22, 0.29, 0.37, 0.46)
LATE_BASES_MS = (0.35, 0.453, 0.567, 0.683)

#: Fraction of the nominal delay used as the size-seeded jitter window.
DELAY_JITTER_FRACTION = 0.15

#: Early/late boundary: early units are hard-gated at this many seconds.
EARLY_GATE_SECONDS = 0.080

#: Room-size offsets of the four units in a bank.
SIZE_OFFSETS = (0.0, 0.1, 0.2, 0.3)

# Orthonormal 4x4 Hadamard feedback matrix (H4 / 2).
_MIX = 0.5 * np.array(
    [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=np.float64
)
# Stereo output taps: two orthogonal sign rows over the four lines.
_TAP_L = 0.5 * np.array([1.0, -1.0, 1.0, -1.0])
_TAP_R = 0.5 * np.array([1.0, 1.0, -1.0, -1.0])

_INPUT_GAIN = 0.5


def calibrate_feedback(delay: int, sample_rate: float, target_rt60: float) -> float:
    """Recirculation gain that decays 60 dB in ``target_rt60`` seconds.

    gain = 10 ** (-3 * (delay / sample_rate) / target_rt60), the standard
    solution for a loop of ``delay`` samples.
    """
    if delay < 1:
        raise ValueError("delay must be >= 1 sample")
    if target_rt60 <= 0:
        raise ValueError("target_rt60 must be positive")
    return 10.0 ** (-3.0 * (delay / sample_rate) / target_rt60)


def _size_jitter(room_size: float, line: int) -> float:
    """Deterministic pseudo-random fraction in [0, 1) keyed by size and line."""
    digest = hashlib.sha256(f"{room_size:.6f}/{line}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _coprime_lengths(nominals: list[int]) -> tuple[int, ...]:
    """Nudge lengths upward until pairwise coprime (and distinct)."""
    out: list[int] = []
    for n in nominals:
        n = max(n, 16)
        while any(math.gcd(n, m) != 1 for m in out):
            n += 1
        out.append(n)
    return tuple(out)


def unit_delay_lengths(
    room_size: float, bases_ms: tuple[float, ...], sample_rate: float
) -> tuple[int, ...]:
    """Delay lengths in samples for one unit: size-scaled, jittered, coprime."""
    if room_size <= 0:
        raise ValueError("room_size must be positive")
    nominals = []
    for line, base in enumerate(bases_ms):
        nominal = room_size * base * sample_rate / 1000.0
        jitter = _size_jitter(room_size, line) * DELAY_JITTER_FRACTION * nominal
        nominals.append(int(round(nominal + jitter)))
    return _coprime_lengths(nominals)


@dataclass(frozen=True)
class ReverbUnitParams:
    room_size: float
    delay_lengths: tuple[int, ...]
    feedback_gain: float  # gain of the shortest line (the largest in the unit)
    damping: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.feedback_gain < 1.0:
            raise ValueError(f"feedback_gain must be in (0, 1), got {self.feedback_gain}")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError(f"damping must be in [0, 1], got {self.damping}")
        ds = self.delay_lengths
        for i in range(len(ds)):
            for j in range(i + 1, len(ds)):
                if math.gcd(ds[i], ds[j]) != 1:
                    raise ValueError(f"delay lengths {ds[i]} and {ds[j]} are not coprime")


def build_unit_params(
    room_size: float,
    bases_ms: tuple[float, ...],
    sample_rate: float,
    target_rt60: float,
    damping: float = 0.0,
) -> ReverbUnitParams:
    lengths = unit_delay_lengths(room_size, bases_ms, sample_rate)
    return ReverbUnitParams(
        room_size=room_size,
        delay_lengths=lengths,
        feedback_gain=calibrate_feedback(min(lengths), sample_rate, target_rt60),
        damping=damping,
    )


class ReverbUnit:
    """Stateful stereo FDN.  process() accepts any block length; internally
    it advances in chunks no longer than the shortest delay line, which
    keeps the vectorized read-mix-write step exact."""

    def __init__(self, params: ReverbUnitParams, sample_rate: float, target_rt60: float):
        self.params = params
        self.sample_rate = sample_rate
        self.target_rt60 = target_rt60
        self._gains = np.array(
            [calibrate_feedback(d, sample_rate, target_rt60) for d in params.delay_lengths]
        )
        self._lines = [np.zeros(d) for d in params.delay_lengths]
        self._pos = [0] * len(params.delay_lengths)
        self._chunk = min(256, min(params.delay_lengths))
        self._damp_state = np.zeros(len(params.delay_lengths))

    def reset(self):
        for line in self._lines:
            line[:] = 0.0
        self._pos = [0] * len(self._lines)
        self._damp_state[:] = 0.0

    def process(self, block: np.ndarray) -> np.ndarray:
        n = block.shape[0]
        out = np.empty((2, n))
        start = 0
        while start < n:
            cs = min(self._chunk, n - start)
            x = block[start : start + cs]
            reads = np.empty((4, cs))
            for i, line in enumerate(self._lines):
                reads[i] = self._read(i, cs)
            out[0, start : start + cs] = _TAP_L @ reads
            out[1, start : start + cs] = _TAP_R @ reads
            if self.params.damping > 0.0:
                a = self.params.damping
                for i in range(4):
                    reads[i], zi = lfilter(
                        [1.0 - a], [1.0, -a], reads[i], zi=[self._damp_state[i]]
                    )
                    self._damp_state[i] = zi[0]
            mixed = _MIX @ (self._gains[:, None] * reads)
            inj = _INPUT_GAIN * x
            for i in range(4):
                self._write(i, mixed[i] + inj)
                self._pos[i] = (self._pos[i] + cs) % self.params.delay_lengths[i]
            start += cs
        return out

    def _read(self, i: int, n: int) -> np.ndarray:
        line, pos = self._lines[i], self._pos[i]
        end = pos + n
        if end <= line.shape[0]:
            return line[pos:end].copy()
        k = line.shape[0] - pos
        out = np.empty(n)
        out[:k] = line[pos:]
        out[k:] = line[: end - line.shape[0]]
        return out

    def _write(self, i: int, data: np.ndarray):
        line, pos = self._lines[i], self._pos[i]
        end = pos + data.shape[0]
        if end <= line.shape[0]:
            line[pos:end] = data
        else:
            k = line.shape[0] - pos
            line[pos:] = data[:k]
            line[: end - line.shape[0]] = data[k:]

    def render_ir(self, n_samples: int) -> np.ndarray:
        """Stereo impulse response of a fresh copy of this unit."""
        unit = ReverbUnit(self.params, self.sample_rate, self.target_rt60)
        block = 4096
        out = np.empty((2, n_samples))
        done = 0
        while done < n_samples:
            cs = min(block, n_samples - done)
            x = np.zeros(cs)
            if done == 0:
                x[0] = 1.0
            out[:, done : done + cs] = unit.process(x)
            done += cs
        return out


@dataclass(frozen=True)
class RoomPreset:
    """A named room target: RT60 plus the four unit room sizes.

    The canonical presets are Factory (RT 1.2 s, sizes 16.0..16.3) and
    Church (RT 7.0 s, sizes 143.0..143.3).  Early sends always use a wide
    spread so reflections fan around the direct sound.
    """

    name: str
    target_rt60: float
    room_sizes: tuple[float, float, float, float]
    early_send_spread: SpreadParam = field(default=SpreadParam(50.0))
    damping: float = 0.0

    def __post_init__(self):
        if self.target_rt60 <= 0:
            raise ValueError("target_rt60 must be positive")
        expected = {"factory": 1.2, "church": 7.0}
        want = expected.get(self.name.lower())
        if want is not None and abs(self.target_rt60 - want) > 1e-9:
            raise ValueError(
                f"preset {self.name!r} must target RT60 = {want} s, got {self.target_rt60}"
            )
        if len(self.room_sizes) != 4:
            raise ValueError("a preset needs exactly 4 room sizes")
        base = self.room_sizes[0]
        for k, size in enumerate(self.room_sizes):
            if abs(size - (base + SIZE_OFFSETS[k])) > 1e-6:
                raise ValueError(
                    f"room sizes must span [base, base + 0.3] in 0.1 steps, got {self.room_sizes}"
                )

    def early_params(self, sample_rate: float) -> list[ReverbUnitParams]:
        return [
            build_unit_params(size, EARLY_BASES_MS, sample_rate, self.target_rt60, self.damping)
            for size in self.room_sizes
        ]

    def late_params(self, sample_rate: float) -> list[ReverbUnitParams]:
        return [
            build_unit_params(size, LATE_BASES_MS, sample_rate, self.target_rt60, self.damping)
            for size in self.room_sizes
        ]

    def cache_key(self, sample_rate: float) -> tuple:
        return (self.name, self.target_rt60, self.room_sizes, self.damping, sample_rate)


def factory_preset() -> RoomPreset:
    return RoomPreset(name="factory", target_rt60=1.2, room_sizes=(16.0, 16.1, 16.2, 16.3))


def church_preset() -> RoomPreset:
    return RoomPreset(name="church", target_rt60=7.0, room_sizes=(143.0, 143.1, 143.2, 143.3))


def default_presets() -> dict[str, RoomPreset]:
    return {"factory": factory_preset(), "church": church_preset()}


def parse_preset_file(path) -> dict[str, RoomPreset]:
    """Parse `preset <name> <rt60> <s0> <s1> <s2> <s3>` lines."""
    path = Path(path)
    presets: dict[str, RoomPreset] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read preset file: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] != "preset" or len(fields) != 7:
            raise ConfigError(path, line_no, "expected: preset <name> <rt60> <s0> <s1> <s2> <s3>")
        name = fields[1]
        try:
            rt60 = float(fields[2])
            sizes = tuple(float(v) for v in fields[3:7])
        except ValueError as exc:
            raise ConfigError(path, line_no, f"bad number: {exc}") from exc
        try:
            presets[name.lower()] = RoomPreset(name=name, target_rt60=rt60, room_sizes=sizes)
        except ValueError as exc:
            raise ConfigError(path, line_no, str(exc)) from exc
    if not presets:
        raise ConfigError(path, 0, "preset file declares no presets")
    return presets


# --- Early banks -----------------------------------------------------------

# Gated unit IRs and late normalization gains are pure functions of the
# preset parameters; cache them per process so engines are cheap to build.
_EARLY_IR_CACHE: dict[tuple, np.ndarray] = {}
_LATE_NORM_CACHE: dict[tuple, np.ndarray] = {}


def early_unit_irs(preset: RoomPreset, sample_rate: float) -> np.ndarray:
    """(4, 2, gate) gated IRs of the preset's early units, unit energy each."""
    key = preset.cache_key(sample_rate)
    cached = _EARLY_IR_CACHE.get(key)
    if cached is not None:
        return cached
    gate = int(round(EARLY_GATE_SECONDS * sample_rate))
    irs = np.empty((4, 2, gate))
    for u, params in enumerate(preset.early_params(sample_rate)):
        unit = ReverbUnit(params, sample_rate, preset.target_rt60)
        irs[u] = unit.render_ir(gate)
    for u in range(4):
        for ch in range(2):
            energy = float(np.dot(irs[u, ch], irs[u, ch]))
            if energy > 0.0:
                irs[u, ch] /= math.sqrt(energy)
    irs.setflags(write=False)
    _EARLY_IR_CACHE[key] = irs
    return irs


class EarlyBank:
    """Per-source early-reflection bank: 4 decorrelated stereo FIRs.

    The filter taps are shared per preset (two sources fed the same signal
    produce identical outputs); only the streaming overlap-add state is per
    instance.
    """

    def __init__(self, preset: RoomPreset, sample_rate: float, block_size: int):
        self.preset = preset
        self.sample_rate = sample_rate
        self.block_size = block_size
        irs = early_unit_irs(preset, sample_rate)
        self._ir_len = irs.shape[2]
        self._channels = irs.reshape(8, self._ir_len)
        n = 1
        while n < block_size + self._ir_len - 1:
            n *= 2
        self._fft_size = n
        self._spectra = np.fft.rfft(self._channels, n=n, axis=1)
        self._tail = np.zeros((8, self._ir_len - 1))
        # Samples of the tail that can still be nonzero; beyond this point
        # the true convolution is zero and FFT rounding dust is discarded,
        # which keeps the post-gate output *exactly* zero.
        self._live = 0

    @property
    def unit_impulse_responses(self) -> np.ndarray:
        return early_unit_irs(self.preset, self.sample_rate)

    def reset(self):
        self._tail[:] = 0.0
        self._live = 0

    def process(self, block: np.ndarray) -> np.ndarray:
        """(8, block) early channels for a mono input block."""
        n = block.shape[0]
        if n > self.block_size:
            raise ValueError(f"block of {n} exceeds configured size {self.block_size}")
        tail_len = self._tail.shape[1]
        if not np.any(block):
            # Pure tail drain: the stored tail is exact, no FFT involved.
            if self._live == 0:
                return np.zeros((8, n))
            out = self._tail[:, :n].copy()
            new_tail = np.zeros((8, tail_len))
            new_tail[:, : tail_len - n] = self._tail[:, n:]
            self._live = max(0, self._live - n)
            new_tail[:, self._live :] = 0.0
            self._tail = new_tail
            return out
        spectrum = np.fft.rfft(block, n=self._fft_size)
        y = np.fft.irfft(spectrum[None, :] * self._spectra, n=self._fft_size, axis=1)
        out = y[:, :n] + self._tail[:, :n]
        new_tail = np.zeros((8, tail_len))
        new_tail[:, : tail_len - n] = self._tail[:, n:]
        new_tail += y[:, n : n + tail_len]
        # True convolution support ends ir_len-1 after the last nonzero
        # input sample; anything past that in the FFT result is rounding
        # noise and gets discarded.
        last = int(np.flatnonzero(block)[-1])
        self._live = max(self._live - n, last + 1 + tail_len - n, 0)
        new_tail[:, self._live :] = 0.0
        self._tail = new_tail
        return out


# --- Shared late field ------------------------------------------------------


def _late_norm_gains(preset: RoomPreset, sample_rate: float) -> np.ndarray:
    """Per-channel gains that equalize total late IR energy across buses.

    The FDN decay is exactly exponential, so energy measured over the
    first quarter of the RT extrapolates to the full tail in closed form.
    """
    key = preset.cache_key(sample_rate)
    cached = _LATE_NORM_CACHE.get(key)
    if cached is not None:
        return cached
    t0 = max(0.3, 0.25 * preset.target_rt60)
    n = int(round(t0 * sample_rate))
    tail_fraction = 10.0 ** (-6.0 * t0 / preset.target_rt60)
    gains = np.empty(8)
    for u, params in enumerate(preset.late_params(sample_rate)):
        unit = ReverbUnit(params, sample_rate, preset.target_rt60)
        ir = unit.render_ir(n)
        for ch in range(2):
            measured = float(np.dot(ir[ch], ir[ch]))
            total = measured / (1.0 - tail_fraction)
            gains[2 * u + ch] = 1.0 / math.sqrt(total) if total > 0 else 1.0
    gains.setflags(write=False)
    _LATE_NORM_CACHE[key] = gains
    return gains


class LateField:
    """The single shared late-reverb processor set for one preset.

    All sources mix into one mono send; the four decorrelated stereo units
    produce 8 streams normalized to equal energy, one per bus.  Distance
    plays no part here: the diffuse field is the same everywhere.
    """

    def __init__(self, preset: RoomPreset, sample_rate: float):
        self.preset = preset
        self.sample_rate = sample_rate
        self._units = [
            ReverbUnit(p, sample_rate, preset.target_rt60)
            for p in preset.late_params(sample_rate)
        ]
        self._norm = _late_norm_gains(preset, sample_rate)

    def reset(self):
        for unit in self._units:
            unit.reset()

    def process(self, block: np.ndarray) -> np.ndarray:
        """(8, block) late streams for a mono input block."""
        n = block.shape[0]
        out = np.empty((8, n))
        for u, unit in enumerate(self._units):
            out[2 * u : 2 * u + 2] = unit.process(block)
        out *= self._norm[:, None]
        return out

    def render_ir(self, seconds: float) -> np.ndarray:
        """(8, n) impulse response of a fresh late field."""
        n = int(round(seconds * self.sample_rate))
        field_copy = LateField(self.preset, self.sample_rate)
        out = np.empty((8, n))
        done = 0
        block = 4096
        while done < n:
            cs = min(block, n - done)
            x = np.zeros(cs)
            if done == 0:
                x[0] = 1.0
            out[:, done : done + cs] = field_copy.process(x)
            done += cs
        return out


# --- RT measurement ---------------------------------------------------------


@dataclass(frozen=True)
class RtEstimate:
    rt60: float
    method: str  # "schroeder" | "slope"
    fit_residual: float  # RMS residual of the linear fit, dB


def measure_rt(impulse_response, sample_rate: float, method: str = "schroeder") -> RtEstimate:
    """Estimate RT60 from an impulse response.

    schroeder: backward-integrated energy curve, linear fit on the
    [-5, -25] dB stretch, extrapolated to -60 dB (T20).
    slope: linear fit of the smoothed dB energy envelope between t = 0.1 s
    and t = 0.5 s, extrapolated to -60 dB.
    """
    ir = np.asarray(impulse_response, dtype=np.float64)
    if ir.ndim != 1:
        raise ValueError("impulse response must be mono")
    if ir.shape[0] < sample_rate:
        raise ValueError("impulse response must be at least 1 s long")
    if method == "schroeder":
        return _measure_schroeder(ir, sample_rate)
    if method == "slope":
        return _measure_slope_window(ir, sample_rate)
    raise ValueError(f"unknown method {method!r}, expected 'schroeder' or 'slope'")


def _fit_line(t: np.ndarray, db: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(t, db, 1)
    residual = float(np.sqrt(np.mean((slope * t + intercept - db) ** 2)))
    return float(slope), residual


def _measure_schroeder(ir: np.ndarray, sample_rate: float) -> RtEstimate:
    energy = ir**2
    edc = np.cumsum(energy[::-1])[::-1]
    nz = np.flatnonzero(edc > 0.0)
    if nz.size == 0:
        raise InsufficientDecay("impulse response carries no energy")
    edc = edc[: nz[-1] + 1]
    db = 10.0 * np.log10(edc / edc[0])
    # The integrated curve always plunges right at the truncation point, so
    # only the first 90% is trusted for locating the fit window.
    usable = db[: max(2, int(0.9 * db.shape[0]))]
    below5 = np.flatnonzero(usable < -5.0)
    if below5.size == 0 or usable.min() > -15.0:
        raise InsufficientDecay("less than 10 dB of decay below the -5 dB point")
    i5 = below5[0]
    below25 = np.flatnonzero(usable < -25.0)
    i25 = below25[0] if below25.size else usable.shape[0]
    t = np.arange(i5, i25) / sample_rate
    slope, residual = _fit_line(t, db[i5:i25])
    if slope >= 0.0:
        raise InsufficientDecay("decay curve has non-negative slope")
    return RtEstimate(rt60=-60.0 / slope, method="schroeder", fit_residual=residual)


def _measure_slope_window(
    ir: np.ndarray,
    sample_rate: float,
    window_start: float = 0.1,
    window_end: float = 0.5,
    smoothing: float = 0.15,
) -> RtEstimate:
    energy = ir**2
    w = max(1, int(round(smoothing * sample_rate)))
    csum = np.concatenate(([0.0], np.cumsum(energy)))
    envelope = (csum[w:] - csum[:-w]) / w  # centered at (k + w/2) / fs
    tiny = max(envelope.max(), 1e-300) * 1e-30
    db = 10.0 * np.log10(np.maximum(envelope, tiny))
    offset = w / 2.0
    i0 = int(round(window_start * sample_rate - offset))
    i1 = int(round(window_end * sample_rate - offset))
    if i0 < 0 or i1 > db.shape[0] or i1 - i0 < 2:
        raise ValueError("impulse response too short for the 0.1-0.5 s fit window")
    if db[i0] - db[i0:].min() < 10.0:
        raise InsufficientDecay("envelope decays less than 10 dB past the window start")
    t = np.arange(i0, i1) / sample_rate
    slope, residual = _fit_line(t, db[i0:i1])
    if slope >= 0.0:
        raise InsufficientDecay("energy envelope has non-negative slope in the window")
    return RtEstimate(rt60=-60.0 / slope, method="slope", fit_residual=residual)


def export_unit_ir(
    preset: RoomPreset,
    path,
    stage: str = "late",
    unit: int = 0,
    channel: int = 0,
    seconds: float = 2.0,
    sample_rate: float = 48000.0,
):
    """Render one reverb unit's IR to a mono float32 audio file."""
    from .audio_io import write_wav_float32

    if stage == "early":
        params = preset.early_params(sample_rate)[unit]
    elif stage == "late":
        params = preset.late_params(sample_rate)[unit]
    else:
        raise ValueError("stage must be 'early' or 'late'")
    ir = ReverbUnit(params, sample_rate, preset.target_rt60).render_ir(
        int(round(seconds * sample_rate))
    )
    write_wav_float32(path, ir[channel][None, :], int(sample_rate))
