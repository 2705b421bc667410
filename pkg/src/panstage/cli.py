"""Thin command-line client over the engine library and the live service.

Offline commands (render, analyze, measure-rt) call straight into the
package; serve runs the UDP protocol plus the HTTP bridge; send/status are
little datagram clients for poking a running server.
"""

from __future__ import annotations

import logging
import os
import socket
import sys
import threading
import time

import click

from .engine import DEFAULT_BLOCK_SIZE, DEFAULT_SAMPLE_RATE, EngineConfig, build_engine
from .errors import PanstageError
from .geometry import aliasing_frequency, canonical_layout, parse_layout_file
from .offline import render_offline
from .reverb import measure_rt


def _setup_logging():
    level = os.environ.get("PANSTAGE_LOG", "info").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@click.group()
def main():
    """Spatial performance engine: offline renderer and live control server."""
    _setup_logging()


@main.command()
@click.option("--scenario", required=True, type=click.Path(exists=True), help="Scenario event file.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output 8-channel WAV.")
@click.option("--duration", required=True, type=float, help="Render length in seconds.")
@click.option("--layout", type=click.Path(exists=True), default=None, help="Layout config (default: built-in ring).")
@click.option("--scene", type=click.Path(exists=True), default=None, help="Scene config.")
@click.option("--presets", type=click.Path(exists=True), default=None, help="Preset file.")
@click.option("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE, show_default=True)
@click.option("--block-size", type=int, default=DEFAULT_BLOCK_SIZE, show_default=True)
def render(scenario, out_path, duration, layout, scene, presets, sample_rate, block_size):
    """Deterministically render a scenario to a multichannel file."""
    try:
        stats = render_offline(
            scenario,
            duration,
            out_path,
            layout_path=layout,
            scene_path=scene,
            preset_path=presets,
            config=EngineConfig(sample_rate=sample_rate, block_size=block_size),
        )
    except PanstageError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(
        f"rendered {stats.frames} frames ({stats.blocks} blocks) to {out_path}; "
        f"events applied: {stats.events_applied}"
    )


@main.command()
@click.option("--port", default=9000, show_default=True, help="UDP control port.")
@click.option("--http-port", default=8080, show_default=True, help="HTTP bridge port.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--layout", type=click.Path(exists=True), default=None)
@click.option("--scene", type=click.Path(exists=True), default=None)
@click.option("--presets", type=click.Path(exists=True), default=None)
@click.option("--sink", type=click.Choice(["null", "wav", "device"]), default="null", show_default=True)
@click.option("--sink-path", type=click.Path(), default=None, help="Output file for the wav sink.")
def serve(port, http_port, host, layout, scene, presets, sink, sink_path):
    """Serve the datagram protocol and the HTTP bridge until interrupted."""
    import uvicorn

    from .server import EngineServer, make_sink
    from .service import create_app

    try:
        engine = build_engine(layout_path=layout, scene_path=scene, preset_path=presets)
        out_sink = make_sink(sink, sink_path, engine.sample_rate, engine.layout.bus_count)
    except PanstageError as exc:
        raise click.ClickException(str(exc)) from exc

    server = EngineServer(engine, port=port, host=host, sink=out_sink)
    app = create_app(engine)
    http = uvicorn.Server(
        uvicorn.Config(app, host=host, port=http_port, log_level="warning")
    )
    http_thread = threading.Thread(target=http.run, daemon=True)

    try:
        server.start()
    except OSError as exc:
        raise click.ClickException(f"cannot bind udp/{port}: {exc}") from exc
    http_thread.start()
    click.echo(f"control: udp://{host}:{server.bound_port}  bridge: http://{host}:{http_port}")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        click.echo("stopping")
    finally:
        http.should_exit = True
        server.stop()
        http_thread.join(timeout=3.0)


@main.command()
@click.option("--layout", type=click.Path(exists=True), default=None, help="Layout config (default: built-in ring).")
@click.option("--c", "speed", default=340.0, show_default=True, help="Speed of sound, m/s.")
def analyze(layout, speed):
    """Print the ring's minimum spacing and spatial-aliasing frequency."""
    try:
        lay = parse_layout_file(layout) if layout else canonical_layout()
        report = aliasing_frequency(lay, speed)
    except PanstageError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"speakers {len(lay.speakers)} buses {lay.bus_count}")
    click.echo(f"min distinct-bus adjacent spacing d = {report.min_spacing_d:.3f} m")
    click.echo(f"speed of sound c = {report.speed_of_sound_c:.1f} m/s")
    click.echo(f"spatial aliasing frequency f_al = {report.f_al:.2f} Hz")


@main.command("measure-rt")
@click.option("--ir", required=True, type=click.Path(exists=True), help="Mono impulse-response WAV.")
@click.option("--method", type=click.Choice(["schroeder", "slope"]), default="schroeder", show_default=True)
def measure_rt_cmd(ir, method):
    """Estimate RT60 from an impulse-response file."""
    from .audio_io import read_wav_mono

    try:
        samples, rate = read_wav_mono(ir)
        estimate = measure_rt(samples, rate, method)
    except PanstageError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(
        f"rt60 = {estimate.rt60:.3f} s ({estimate.method}, "
        f"fit residual {estimate.fit_residual:.2f} dB)"
    )


@main.command("export-ir")
@click.option("--preset", "preset_name", type=click.Choice(["factory", "church"]), required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stage", type=click.Choice(["early", "late"]), default="late", show_default=True)
@click.option("--unit", default=0, show_default=True, help="Unit index 0-3.")
@click.option("--channel", default=0, show_default=True, help="0 = left, 1 = right.")
@click.option("--seconds", default=2.0, show_default=True)
@click.option("--presets", "preset_path", type=click.Path(exists=True), default=None)
def export_ir(preset_name, out_path, stage, unit, channel, seconds, preset_path):
    """Render one reverb unit's impulse response to a mono WAV."""
    from .reverb import default_presets, export_unit_ir, parse_preset_file

    try:
        presets = parse_preset_file(preset_path) if preset_path else default_presets()
        export_unit_ir(
            presets[preset_name],
            out_path,
            stage=stage,
            unit=unit,
            channel=channel,
            seconds=seconds,
        )
    except (PanstageError, KeyError, IndexError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("message", nargs=-1, required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=9000, show_default=True)
def send(message, host, port):
    """Send one protocol datagram to a running server."""
    line = " ".join(message)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.sendto(line.encode("ascii"), (host, port))
    finally:
        sock.close()
    click.echo(f"sent: {line}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=9000, show_default=True)
@click.option("--timeout", default=2.0, show_default=True)
def status(host, port, timeout):
    """Query a running server's STATUS line."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.settimeout(timeout)
    try:
        sock.sendto(b"STATUS", (host, port))
        reply, _ = sock.recvfrom(4096)
    except socket.timeout:
        click.echo("no reply", err=True)
        sys.exit(1)
    finally:
        sock.close()
    click.echo(reply.decode("ascii"))


@main.command("make-demo")
@click.option("--dir", "directory", required=True, type=click.Path(), help="Target directory.")
def make_demo(directory):
    """Write demo clips, scene, manifest and an example scenario."""
    from .demo import write_demo

    out = write_demo(directory)
    click.echo(f"demo assets in {out}")
    click.echo(f"try: panstage serve --scene {out}/scene.txt")
    click.echo(f"or:  panstage render --scenario {out}/scenario.txt --scene {out}/scene.txt "
               f"--out take.wav --duration 8")


if __name__ == "__main__":
    main()
