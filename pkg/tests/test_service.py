"""The HTTP bridge, the UDP server and the CLI surface."""

import socket
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from conftest import SAMPLE_RATE
from panstage.cli import main as cli_main
from panstage.engine import Engine, EngineConfig
from panstage.geometry import canonical_layout
from panstage.scene import parse_scene_file
from panstage.server import EngineServer, format_status
from panstage.service import create_app


@pytest.fixture()
def engine(studio):
    return Engine(layout=canonical_layout(), scene=parse_scene_file(studio / "scene.txt"))


@pytest.fixture()
def client(engine):
    return TestClient(create_app(engine))


class TestBridge:
    def test_healthz(self, client):
        assert client.get("/healthz").json()["status"] == "ok"

    def test_control_roundtrip(self, client, engine):
        r = client.post("/control", json={"message": "TEMPO +"})
        assert r.status_code == 200
        assert r.json() == {"ok": True, "parsed": "TEMPO +"}
        engine.process_block()
        status = client.get("/status").json()
        assert status["bpm"] == pytest.approx(120 * 2 ** (1 / 12))
        assert status["tempo_step"] == 1
        assert status["status_line"].startswith(f"BPM {120 * 2 ** (1 / 12):.2f} ROOM")

    def test_control_rejects_bad_message(self, client):
        r = client.post("/control", json={"message": "TEMPO stop"})
        assert r.status_code == 400
        detail = r.json()["detail"]
        assert detail["offset"] == 6

    def test_status_fields(self, client, engine):
        client.post("/control", json={"message": "LOOP tone440 ON"})
        engine.process_block()
        status = client.get("/status").json()
        assert status["active_loops"] == ["tone440"]
        assert len(status["meters_db"]) == 8
        assert status["room"] in ("factory", "church")

    def test_analyze_default_layout(self, client):
        r = client.post("/analyze", json={})
        body = r.json()
        assert body["min_spacing_d"] == pytest.approx(1.94)
        assert 86.0 <= body["f_al"] <= 89.0

    def test_analyze_custom_layout(self, client):
        text = (
            "bus_count 2\nmin_spacing 0.5\n"
            "speaker 0 0 -0.5 1.0 2.0\nspeaker 1 1 0.5 1.0 2.0\n"
        )
        r = client.post("/analyze", json={"layout_text": text, "speed_of_sound": 340.0})
        assert r.json()["f_al"] == pytest.approx(170.0)

    def test_analyze_bad_layout(self, client):
        r = client.post("/analyze", json={"layout_text": "speaker broken"})
        assert r.status_code == 400


class TestStatusLine:
    def test_format(self, engine):
        engine.process_block()
        line = format_status(engine.snapshot)
        assert line.startswith("BPM 120.00 ROOM CHURCH LOOPS 0 STEP 0")
        assert "METERS" in line
        assert len(line.split("METERS ")[1].split()) == 8


class TestUdpServer:
    def test_status_and_control_over_udp(self, studio):
        engine = Engine(
            layout=canonical_layout(), scene=parse_scene_file(studio / "scene.txt")
        )
        server = EngineServer(engine, port=0, host="127.0.0.1")
        server.start()
        try:
            port = server.bound_port
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.settimeout(2.0)

            sock.sendto(b"STATUS", ("127.0.0.1", port))
            reply, _ = sock.recvfrom(4096)
            assert reply.startswith(b"BPM 120.00 ROOM CHURCH")

            sock.sendto(b"TEMPO +", ("127.0.0.1", port))
            deadline = time.time() + 3.0
            seen = b""
            while time.time() < deadline:
                sock.sendto(b"STATUS", ("127.0.0.1", port))
                seen, _ = sock.recvfrom(4096)
                if seen.startswith(b"BPM 127.14"):
                    break
                time.sleep(0.05)
            assert seen.startswith(b"BPM 127.14"), seen

            # malformed datagrams are ignored, engine keeps serving
            sock.sendto(b"EXPLODE now", ("127.0.0.1", port))
            sock.sendto(b"STATUS", ("127.0.0.1", port))
            reply, _ = sock.recvfrom(4096)
            assert reply.startswith(b"BPM 127.14")
            sock.close()
        finally:
            server.stop()


class TestSinks:
    def test_device_falls_back_with_warning(self, tmp_path, caplog):
        import logging

        from panstage.server import FileSink, NullSink, make_sink

        with caplog.at_level(logging.WARNING, logger="panstage.server"):
            sink = make_sink("device", tmp_path / "fallback.wav", SAMPLE_RATE, 8)
        assert isinstance(sink, FileSink)
        assert any("falling back" in r.message for r in caplog.records)
        sink.close()
        with caplog.at_level(logging.WARNING, logger="panstage.server"):
            assert isinstance(make_sink("device", None, SAMPLE_RATE, 8), NullSink)

    def test_wav_sink_streams(self, tmp_path):
        from panstage.audio_io import read_wav
        from panstage.server import make_sink

        sink = make_sink("wav", tmp_path / "live.wav", SAMPLE_RATE, 8)
        block = np.zeros((8, 256))
        block[3, 10] = 0.5
        sink.write_block(block)
        sink.write_block(np.zeros((8, 256)))
        sink.close()
        data, rate = read_wav(tmp_path / "live.wav")
        assert rate == SAMPLE_RATE
        assert data.shape == (512, 8)
        assert data[10, 3] == pytest.approx(0.5)


class TestLayoutParserExtras:
    def test_subwoofer_directive(self, tmp_path):
        from panstage.geometry import parse_layout_file

        f = tmp_path / "layout.txt"
        f.write_text(
            "bus_count 3\nmin_spacing 0.5\n"
            "speaker 0 0 -1.0 1.0 2.0\n"
            "speaker 1 1 1.0 1.0 2.0\n"
            "speaker 2 2 0.0 -1.0 0.4\n"
            "subwoofer 2\n"
        )
        layout = parse_layout_file(f)
        assert layout.subwoofer_buses == (2,)
        assert len(layout.panning_speakers()) == 2


class TestCli:
    def test_analyze_command(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["analyze", "--layout", "configs/layout.txt"])
        assert result.exit_code == 0
        assert "d = 1.940 m" in result.output
        assert "f_al = 87.63 Hz" in result.output

    def test_measure_rt_command(self, tmp_path):
        from panstage.audio_io import write_wav_float32

        t = np.arange(int(1.5 * SAMPLE_RATE)) / SAMPLE_RATE
        ir = np.exp(-6.91 * t)
        path = tmp_path / "ir.wav"
        write_wav_float32(path, ir[None, :], SAMPLE_RATE)
        runner = CliRunner()
        for method, expect in (("schroeder", "1.0"), ("slope", "1.0")):
            result = runner.invoke(cli_main, ["measure-rt", "--ir", str(path), "--method", method])
            assert result.exit_code == 0
            assert f"rt60 = {expect}" in result.output

    def test_render_command(self, tmp_path):
        scenario = tmp_path / "s.txt"
        scenario.write_text("")
        out = tmp_path / "o.wav"
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["render", "--scenario", str(scenario), "--out", str(out), "--duration", "0.5"],
        )
        assert result.exit_code == 0
        assert out.exists()

    def test_make_demo(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["make-demo", "--dir", str(tmp_path / "demo")])
        assert result.exit_code == 0
        assert (tmp_path / "demo" / "scene.txt").exists()
        assert (tmp_path / "demo" / "loop_a.wav").exists()

    def test_export_ir_then_measure(self, tmp_path):
        runner = CliRunner()
        ir_path = tmp_path / "factory_ir.wav"
        result = runner.invoke(
            cli_main,
            ["export-ir", "--preset", "factory", "--out", str(ir_path), "--seconds", "1.8"],
        )
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli_main, ["measure-rt", "--ir", str(ir_path)])
        assert result.exit_code == 0
        assert "rt60 = 1.2" in result.output
