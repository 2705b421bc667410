"""Acceptance suite: one test per shipping criterion, each printing a
PASS/FAIL line with the measured value against its pinned tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines live.
"""

import hashlib
import itertools
import math
import time

import numpy as np
import pytest

from conftest import SAMPLE_RATE, xcorr_peak
from panstage.engine import Engine, EngineConfig
from panstage.geometry import (
    ListenerPose,
    Vec3,
    aliasing_frequency,
    canonical_layout,
    parse_layout_file,
    relative_azimuth,
)
from panstage.offline import render_events, render_offline
from panstage.panner import SpreadParam, pan
from panstage.protocol import parse_scenario_file
from panstage.reverb import early_unit_irs, church_preset, factory_preset, measure_rt
from panstage.scene import parse_scene_file
from panstage.server import format_status
from test_panner import oracle_pan


def _report(name: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _engine(studio, **cfg) -> Engine:
    return Engine(
        layout=canonical_layout(),
        scene=parse_scene_file(studio / "scene.txt"),
        config=EngineConfig(**cfg),
    )


def test_aliasing_figure():
    t0 = time.perf_counter()
    layout = parse_layout_file("configs/layout.txt")
    report = aliasing_frequency(layout, 340.0)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(report.min_spacing_d - 1.94) < 1e-9
        and 86.0 <= report.f_al <= 89.0
        and elapsed < 1.0
    )
    _report(
        "aliasing-figure",
        ok,
        f"d = {report.min_spacing_d:.3f} m, f_al = {report.f_al:.2f} Hz in [86, 89], {elapsed:.3f} s",
    )


def test_vbap_power_normalization():
    layout = canonical_layout()
    listeners = [
        ListenerPose(position=Vec3(x, y, 1.7), yaw=w)
        for x, y, w in (
            (0.0, 0.0, 0.0),
            (-2.4, 0.0, 0.0),
            (2.4, 0.7, 0.8),
            (-1.0, -1.0, -0.5),
            (3.5, 1.2, 2.0),
        )
    ]
    spreads = (SpreadParam(0.0), SpreadParam(50.0))
    t0 = time.perf_counter()
    worst_power = 0.0
    max_active0 = 0
    azimuths = np.linspace(-math.pi, math.pi, 3600, endpoint=False)
    for listener in listeners:
        for spread in spreads:
            for az in azimuths:
                gains = pan(float(az), listener, layout, spread)
                power = sum(g * g for g in gains.gains)
                worst_power = max(worst_power, abs(power - 1.0))
                if spread.value == 0.0:
                    max_active0 = max(max_active0, len(gains.active_buses()))
    elapsed = time.perf_counter() - t0

    center = listeners[0]
    a1 = relative_azimuth(center, layout.speakers[2].position)  # bus 1
    a2 = relative_azimuth(center, layout.speakers[3].position)  # bus 2
    bis = pan((a1 + a2) / 2, center, layout).gains
    bis_err = max(abs(bis[1] - 1 / math.sqrt(2)), abs(bis[2] - 1 / math.sqrt(2)))

    ok = worst_power < 1e-9 and max_active0 <= 2 and bis_err < 1e-9 and elapsed < 10.0
    _report(
        "vbap-power-normalization",
        ok,
        f"|sum g^2 - 1| <= {worst_power:.2e}, spread-0 active <= {max_active0}, "
        f"bisector err {bis_err:.2e}, 36000 pans in {elapsed:.2f} s",
    )


def test_listener_correction():
    layout = canonical_layout()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        listener = ListenerPose(
            position=Vec3(
                float(rng.uniform(-4.0, 4.0)),
                float(rng.uniform(-1.3, 1.3)),
                float(rng.uniform(1.2, 2.0)),
            ),
            yaw=float(rng.uniform(-math.pi, math.pi)),
        )
        az = float(rng.uniform(-math.pi, math.pi))
        gains = np.array(pan(az, listener, layout).gains)
        expect = oracle_pan(az, listener, layout, 0.0)
        worst = max(worst, float(np.abs(gains - expect).max()))
    ok = worst < 1e-9
    _report("listener-correction", ok, f"max |pan - oracle| = {worst:.2e} over 100 configs")


def test_tempo_pitch_law(studio):
    scenario = studio / "pitch_scenario.txt"
    scenario.write_text("0.0 LOOP tone440 ON\n1.5 TEMPO +\n")
    events = parse_scenario_file(scenario)
    engine = _engine(
        studio, early_level_db=float("-inf"), late_level_db=float("-inf")
    )
    out = render_events(engine, events, 4.0)
    mono = out.sum(axis=0)

    def peak(signal):
        w = signal * np.hanning(signal.shape[0])
        spectrum = np.abs(np.fft.rfft(w))
        return int(np.argmax(spectrum)) * SAMPLE_RATE / signal.shape[0]

    before = peak(mono[int(0.3 * SAMPLE_RATE) : int(1.4 * SAMPLE_RATE)])
    after = peak(mono[int(2.0 * SAMPLE_RATE) :])
    target = 440.0 * 2 ** (1 / 12)  # 466.1638 Hz

    for _ in range(11):
        engine.clock.step(+1)
    octave_exact = engine.clock.rate == 2.0

    ok = (
        abs(before - 440.0) / 440.0 < 0.005
        and abs(after - target) / target < 0.005
        and octave_exact
    )
    _report(
        "tempo-pitch-law",
        ok,
        f"peak {before:.2f} -> {after:.2f} Hz (target {target:.2f} +/- 0.5%), "
        f"12-step rate exactly {engine.clock.rate}",
    )


def test_room_rt60(late_irs):
    results = {}
    for name, target in (("factory", 1.2), ("church", 7.0)):
        schroeder = measure_rt(late_irs[name][0], SAMPLE_RATE, "schroeder")
        slope = measure_rt(late_irs[name][0], SAMPLE_RATE, "slope")
        results[name] = (schroeder.rt60, slope.rt60, target)
    ok = all(
        abs(s - target) / target < 0.15 and abs(w - s) / s < 0.20
        for s, w, target in results.values()
    )
    detail = ", ".join(
        f"{name}: schroeder {s:.2f} s / slope {w:.2f} s (target {t} +/- 15%)"
        for name, (s, w, t) in results.items()
    )
    _report("room-rt60", ok, detail)


def test_late_field_isotropy():
    worst = 0.0
    details = []
    for preset in (factory_preset(), church_preset()):
        from panstage.reverb import LateField

        field = LateField(preset, SAMPLE_RATE)
        rng = np.random.default_rng(99)
        total = 5 * SAMPLE_RATE
        energy = np.zeros(8)
        done = 0
        while done < total:
            cs = min(8192, total - done)
            out = field.process(rng.standard_normal(cs))
            energy += np.sum(out * out, axis=1)
            done += cs
        rms_db = 10 * np.log10(energy / total)
        spread = float(rms_db.max() - rms_db.min())
        worst = max(worst, spread)
        details.append(f"{preset.name} {spread:.3f} dB")
    ok = worst < 0.5
    _report("late-field-isotropy", ok, f"per-bus RMS spread {', '.join(details)} (< 0.5 dB)")


def test_early_decorrelation():
    worst = 0.0
    for preset in (factory_preset(), church_preset()):
        irs = early_unit_irs(preset, SAMPLE_RATE)
        pairs = [
            (u1, c1, u2, c2)
            for (u1, c1), (u2, c2) in itertools.combinations(
                [(u, c) for u in range(4) for c in range(2)], 2
            )
            if u1 != u2
        ]
        for u1, c1, u2, c2 in pairs:
            worst = max(worst, xcorr_peak(irs[u1, c1], irs[u2, c2]))
    ok = worst < 0.9
    _report("early-decorrelation", ok, f"max cross-unit xcorr {worst:.3f} (< 0.9)")


def test_room_switching(studio):
    engine = _engine(studio)
    moves = [
        (0.0, -1.0),
        (0.5, -0.2),
        (0.7, -0.05),  # jitter inside the hysteresis band
        (0.8, 0.06),
        (0.9, -0.04),
        (1.0, 0.08),
        (1.2, 0.5),  # decisive crossing
        (1.5, 1.0),
    ]
    sources_before = {
        sid: s.position for sid, s in engine.scene.sources.items() if sid != "crane"
    }
    rooms = []
    next_move = 0
    n_blocks = int(2.0 * SAMPLE_RATE) // 256
    for b in range(n_blocks):
        start = b * 256
        while next_move < len(moves) and moves[next_move][0] * SAMPLE_RATE <= start:
            x = moves[next_move][1]
            engine.submit_text(f"POS LISTENER {x} 0.0 1.7 0.0")
            next_move += 1
        engine.process_block()
        rooms.append(engine.snapshot.room)
    factory_to_church = sum(
        1 for a, b in zip(rooms, rooms[1:]) if a == "factory" and b == "church"
    )
    unchanged = all(
        engine.scene.sources[sid].position == pos for sid, pos in sources_before.items()
    )
    status_line = format_status(engine.snapshot)
    ok = factory_to_church == 1 and unchanged and "ROOM CHURCH" in status_line
    _report(
        "room-switching",
        ok,
        f"factory->church flips = {factory_to_church} (expected 1), sources "
        f"unchanged = {unchanged}, final: {status_line.split(' METERS')[0]}",
    )


def test_shake_hysteresis(studio):
    engine = _engine(studio)
    for v in (0.9, 1.3, 1.5, 0.5, 1.2):
        engine.submit_text(f"SHAKE maracas {v}")
    engine.process_block()
    triggers = engine.snapshot.counters["shake_triggers"]
    ok = triggers == 2
    _report("shake-hysteresis", ok, f"trace (0.9 1.3 1.5 0.5 1.2) -> {triggers} triggers (expected 2)")


def test_determinism(tmp_path, studio):
    scenario = tmp_path / "det.txt"
    scenario.write_text(
        "0.0 POS LISTENER -1.0 0.0 1.7 0.0\n"
        "0.0 LOOP tone440 ON\n"
        "0.4 TRIG hit\n"
        "0.8 TEMPO +\n"
        "1.2 POS LISTENER 1.0 0.2 1.7 0.3\n"
        "1.5 SHAKE maracas 1.6\n"
    )
    hashes = []
    for name in ("one.wav", "two.wav"):
        render_offline(scenario, 2.0, tmp_path / name, scene_path=studio / "scene.txt")
        hashes.append(hashlib.sha256((tmp_path / name).read_bytes()).hexdigest())
    ok = hashes[0] == hashes[1]
    _report("determinism", ok, f"sha256 {hashes[0][:16]}... == {hashes[1][:16]}...")


def test_mix_linearity(studio):
    def render(messages):
        engine = _engine(studio)
        for m in messages:
            engine.submit_text(m)
        return np.concatenate(
            [engine.process_block() for _ in range(2 * SAMPLE_RATE // 256)], axis=1
        )

    both = render(["TRIG hit", "TRIG hit_b"])
    alone_a = render(["TRIG hit"])
    alone_b = render(["TRIG hit_b"])
    diff_rms = np.linalg.norm(both - (alone_a + alone_b))
    rel = diff_rms / max(np.linalg.norm(both), 1e-30)
    ok = rel < 1e-6
    _report("mix-linearity", ok, f"relative RMS difference {rel:.2e} (< 1e-6)")
