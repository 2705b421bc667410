"""HTTP bridge: a FastAPI app wrapping the engine for browser clients.

Browsers cannot send UDP datagrams, so the control surface talks to this
bridge instead; the payloads are still the wire-protocol text lines, and
every accepted message goes through the same parser and queue as a
datagram would.  The app also exposes the layout analyzer as a service
endpoint.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import __version__
from .engine import Engine
from .errors import InvalidLayout, ParseError
from .geometry import aliasing_frequency, canonical_layout
from .protocol import StatusQuery, format_message
from .server import format_status


class ControlRequest(BaseModel):
    message: str = Field(description="One wire-protocol line, e.g. 'TEMPO +'")


class ControlResponse(BaseModel):
    ok: bool
    parsed: str | None = None


class StatusResponse(BaseModel):
    bpm: float
    room: str
    tempo_step: int
    active_loops: list[str]
    meters_db: list[float]
    crossfade_progress: float
    counters: dict[str, int]
    status_line: str


class AnalyzeRequest(BaseModel):
    layout_text: str | None = Field(
        default=None, description="Layout config text; omit for the canonical ring"
    )
    speed_of_sound: float = 340.0


class AnalyzeResponse(BaseModel):
    min_spacing_d: float
    speed_of_sound_c: float
    f_al: float


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="panstage bridge", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.get("/status", response_model=StatusResponse)
    def status():
        snap = engine.snapshot
        return StatusResponse(
            bpm=snap.bpm,
            room=snap.room,
            tempo_step=snap.tempo_step,
            active_loops=list(snap.active_loops),
            meters_db=list(snap.meters_db),
            crossfade_progress=snap.crossfade_progress,
            counters=snap.counters,
            status_line=format_status(snap),
        )

    @app.post("/control", response_model=ControlResponse)
    def control(req: ControlRequest):
        try:
            msg = engine.submit_text(req.message)
        except ParseError as exc:
            raise HTTPException(
                status_code=400, detail={"error": str(exc), "offset": exc.offset}
            ) from exc
        if isinstance(msg, StatusQuery):
            return ControlResponse(ok=True, parsed="STATUS")
        return ControlResponse(ok=True, parsed=format_message(msg))

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest):
        if req.layout_text is None:
            layout = canonical_layout()
        else:
            import tempfile
            from pathlib import Path

            from .errors import ConfigError
            from .geometry import parse_layout_file

            with tempfile.TemporaryDirectory() as tmp:
                path = Path(tmp) / "layout.txt"
                path.write_text(req.layout_text)
                try:
                    layout = parse_layout_file(path)
                except (ConfigError, InvalidLayout) as exc:
                    raise HTTPException(status_code=400, detail=str(exc)) from exc
        try:
            report = aliasing_frequency(layout, req.speed_of_sound)
        except (InvalidLayout, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return AnalyzeResponse(
            min_spacing_d=report.min_spacing_d,
            speed_of_sound_c=report.speed_of_sound_c,
            f_al=report.f_al,
        )

    return app
