"""HTTP/JSON front door over the workspace, sampler, and metadata tables."""

from __future__ import annotations

import base64
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel, Field

from .controls import DensityModel, control_spec
from .midi_io import MidiParseError, UnsupportedMeterError
from .predictor import NGramPredictor, TokenPredictor, UniformPredictor
from .sampler import (
    BudgetExceededError,
    RetriesExhaustedError,
    SampleParams,
    Sampler,
    TrackOverride,
)
from .score import DRUM, Piece
from .tokenizer import MultiTrackTokenizer
from .workspace import PieceNotFoundError, Workspace


class InfillRequest(BaseModel):
    mask: list[tuple[int, int]]
    temperature: float = 1.0
    l_poly: Optional[int] = None
    seed: int = 0
    max_tokens: int = 4096
    reject_duplicates: bool = True
    reject_silence: bool = False


class OverridePayload(BaseModel):
    program: Optional[int] = None
    density: Optional[int] = None
    poly_range: Optional[tuple[int, int]] = None
    dur_range: Optional[tuple[int, int]] = None

    def to_override(self) -> TrackOverride:
        return TrackOverride(
            program=self.program,
            density=self.density,
            poly_range=self.poly_range,
            dur_range=self.dur_range,
        )


class GenerateRequest(BaseModel):
    n_new: int = 1
    overrides: list[OverridePayload] = Field(default_factory=list)
    temperature: float = 1.0
    l_poly: Optional[int] = None
    seed: int = 0
    max_tokens: int = 4096


def _piece_summary(piece_id: str, piece: Piece, density: Optional[DensityModel]) -> dict:
    tracks = []
    for track in piece.tracks:
        bars = []
        for b, bar in enumerate(track.bars):
            bars.append(
                {
                    "index": b,
                    "length": bar.length,
                    "numerator": bar.numerator,
                    "denominator": bar.denominator,
                    "note_count": len(bar.notes),
                    "notes": [
                        {
                            "onset": n.onset,
                            "pitch": n.pitch,
                            "duration": n.duration,
                            "velocity": n.velocity,
                        }
                        for n in bar.notes
                    ],
                }
            )
        entry: dict[str, Any] = {
            "program": None if track.is_drum else track.program,
            "is_drum": track.is_drum,
            "bars": bars,
        }
        if density is not None:
            try:
                spec = control_spec(track, density)
                entry["controls"] = {
                    "density": spec.density,
                    "poly_range": list(spec.poly_range),
                    "dur_range": list(spec.dur_range),
                }
            except ValueError:
                entry["controls"] = None
        tracks.append(entry)
    return {"id": piece_id, "bars": piece.bar_count, "tracks": tracks}


def create_app(
    workspace_root: str | Path,
    predictor: Optional[TokenPredictor] = None,
    tokenizer: Optional[MultiTrackTokenizer] = None,
    density: Optional[DensityModel] = None,
    expressive: bool = False,
) -> FastAPI:
    """Build the service; one predictor is held for the process lifetime."""
    tokenizer = tokenizer or MultiTrackTokenizer(expressive=expressive)
    predictor = predictor or UniformPredictor(tokenizer.vocab)
    if tokenizer.with_controls and density is None:
        raise ValueError("tokenizer emits controls but no DensityModel was given")
    workspace = Workspace(Path(workspace_root))
    app = FastAPI(title="tracktok", version="0.1.0")
    app.state.workspace = workspace
    app.state.tokenizer = tokenizer
    app.state.predictor = predictor
    app.state.density = density
    sampler = Sampler(tokenizer, predictor, density)

    def load_piece(piece_id: str) -> Piece:
        try:
            return workspace.get(piece_id, expressive=tokenizer.expressive)
        except PieceNotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown piece {piece_id}")

    @app.post("/v1/pieces")
    async def upload_piece(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/"):
            form = await request.form()
            upload = form.get("file")
            if upload is None:
                raise HTTPException(status_code=400, detail="missing 'file' field")
            data = await upload.read()
        else:
            doc = await request.json()
            if "midi_base64" not in doc:
                raise HTTPException(status_code=400, detail="missing midi_base64")
            try:
                data = base64.b64decode(doc["midi_base64"])
            except Exception:
                raise HTTPException(status_code=400, detail="invalid base64 payload")
        try:
            piece_id, piece = workspace.put_midi(data, expressive=tokenizer.expressive)
        except (MidiParseError, UnsupportedMeterError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _piece_summary(piece_id, piece, density)

    @app.get("/v1/pieces/{piece_id}")
    def get_piece(piece_id: str):
        return _piece_summary(piece_id, load_piece(piece_id), density)

    @app.post("/v1/pieces/{piece_id}/infill")
    def infill(piece_id: str, req: InfillRequest):
        piece = load_piece(piece_id)
        if not req.mask:
            raise HTTPException(status_code=422, detail="mask must be non-empty")
        for t, b in req.mask:
            if not (0 <= t < len(piece.tracks) and 0 <= b < piece.bar_count):
                raise HTTPException(
                    status_code=422, detail=f"mask cell ({t}, {b}) outside piece"
                )
        params = SampleParams(
            temperature=req.temperature,
            l_poly=req.l_poly,
            seed=req.seed,
            max_tokens=req.max_tokens,
            reject_duplicates=req.reject_duplicates,
            reject_silence=req.reject_silence,
        )
        try:
            result = sampler.infill_bars(piece, req.mask, params)
        except RetriesExhaustedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except BudgetExceededError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        new_id, _ = workspace.put_piece(result, expressive=tokenizer.expressive)
        return {
            "id": new_id,
            "changed": sorted(set(map(tuple, req.mask))),
            "tokens_used": None,
        }

    @app.post("/v1/pieces/{piece_id}/tracks:generate")
    def generate(piece_id: str, req: GenerateRequest):
        piece = load_piece(piece_id)
        params = SampleParams(
            temperature=req.temperature,
            l_poly=req.l_poly,
            seed=req.seed,
            max_tokens=req.max_tokens,
        )
        overrides = [o.to_override() for o in req.overrides]
        try:
            result = sampler.generate_tracks(piece, req.n_new, params, overrides)
        except BudgetExceededError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        new_id, _ = workspace.put_piece(result, expressive=tokenizer.expressive)
        return {
            "id": new_id,
            "new_track_indices": list(range(len(piece.tracks), len(result.tracks))),
        }

    @app.get("/v1/pieces/{piece_id}/midi")
    def download(piece_id: str, expressive: bool = False):
        from .midi_io import write_midi

        piece = load_piece(piece_id)
        data = write_midi(piece, expressive=expressive)
        return Response(content=data, media_type="audio/midi")

    @app.get("/v1/meta/vocab")
    def vocab_table():
        return tokenizer.vocab.export()

    @app.get("/v1/meta/density-table")
    def density_table():
        if density is None:
            raise HTTPException(status_code=404, detail="no density table loaded")
        import json

        return json.loads(density.table.to_json())

    return app


def build_default_app(config: dict) -> FastAPI:
    """Assemble an app from a resolved configuration mapping."""
    from .controls import ControlTable

    tokenizer = MultiTrackTokenizer(
        expressive=bool(config["expressive"]),
        with_controls=bool(config["with_controls"]),
    )
    density = None
    if config.get("density_table"):
        density = DensityModel.from_table(
            ControlTable.from_json(Path(config["density_table"]).read_text())
        )
    if config["predictor"] == "ngram":
        if not config.get("model_path"):
            raise ValueError("predictor 'ngram' needs model_path")
        predictor = NGramPredictor.load(config["model_path"], tokenizer.vocab)
    else:
        predictor = UniformPredictor(tokenizer.vocab)
    return create_app(
        config["workspace_root"],
        predictor=predictor,
        tokenizer=tokenizer,
        density=density,
    )
