"""Append-only content-addressed piece store backing the service and CLI."""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Optional

from .midi_io import parse_midi, write_midi
from .score import Piece


class PieceNotFoundError(KeyError):
    pass


class Workspace:
    """Pieces keyed by the hash of their normalized MIDI bytes.

    Edits never mutate an entry; every change lands under a new id, which
    makes undo and A/B comparison a matter of remembering ids.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        (self.root / "pieces").mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Piece] = {}
        self._write_lock = threading.Lock()

    def _path(self, piece_id: str) -> Path:
        return self.root / "pieces" / f"{piece_id}.mid"

    def put_midi(self, data: bytes, expressive: bool = False) -> tuple[str, Piece]:
        """Parse, normalize, and store; returns (id, parsed piece)."""
        piece = parse_midi(data, expressive=expressive)
        return self.put_piece(piece, expressive=expressive)

    def put_piece(self, piece: Piece, expressive: bool = False) -> tuple[str, Piece]:
        normalized = write_midi(piece, expressive=expressive)
        piece_id = hashlib.sha256(normalized).hexdigest()[:24]
        with self._write_lock:
            path = self._path(piece_id)
            if not path.exists():
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(normalized)
                tmp.rename(path)
            self._cache[piece_id] = piece
        return piece_id, piece

    def get(self, piece_id: str, expressive: bool = False) -> Piece:
        if piece_id in self._cache:
            return self._cache[piece_id]
        path = self._path(piece_id)
        if not path.exists():
            raise PieceNotFoundError(piece_id)
        piece = parse_midi(path.read_bytes(), expressive=expressive)
        self._cache[piece_id] = piece
        return piece

    def get_midi(self, piece_id: str) -> bytes:
        path = self._path(piece_id)
        if not path.exists():
            raise PieceNotFoundError(piece_id)
        return path.read_bytes()

    def ids(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "pieces").glob("*.mid"))
