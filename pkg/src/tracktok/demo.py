"""Deterministic synthetic mini-corpus for tests, demos, and harness runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .midi_io import write_midi
from .score import DRUM, Bar, Note, Piece, Track


def random_bar(
    rng: np.random.Generator,
    length: int = 48,
    max_notes: int = 10,
    expressive: bool = False,
    drum: bool = False,
) -> Bar:
    n_notes = int(rng.integers(0, max_notes + 1))
    # Same-pitch overlaps are ambiguous in MIDI note pairing, so keep each
    # pitch monophonic and clip durations to the bar.
    sounding: list[tuple[int, int, int]] = []  # (pitch, onset, end)
    notes = []
    for _ in range(n_notes):
        onset = int(rng.integers(0, length))
        if drum:
            pitch = int(rng.choice([35, 36, 38, 42, 46, 49]))
        else:
            pitch = int(rng.integers(36, 96))
        duration = min(
            int(rng.choice([3, 6, 12, 24]) if not drum else 3), length - onset
        )
        if any(p == pitch and onset < e and o < onset + duration
               for p, o, e in sounding):
            continue
        sounding.append((pitch, onset, onset + duration))
        notes.append(
            Note(
                onset=onset,
                pitch=pitch,
                duration=duration,
                velocity=int(rng.integers(40, 120)) if expressive else 100,
                # negative micro at the very start of a piece would clamp to
                # tick zero, so keep onset-0 notes on or after the gridline
                micro=int(rng.integers(0 if onset == 0 else -80, 80))
                if expressive
                else 0,
            )
        )
    return Bar(notes=tuple(notes))


def random_piece(
    seed: int,
    n_tracks: int = 4,
    n_bars: int = 8,
    expressive: bool = False,
    with_drums: bool = True,
) -> Piece:
    rng = np.random.default_rng(seed)
    tracks = []
    for t in range(n_tracks):
        drum = with_drums and t == n_tracks - 1
        program = DRUM if drum else int(rng.integers(0, 128))
        max_notes = int(rng.integers(2, 12))
        bars = tuple(
            random_bar(rng, max_notes=max_notes, expressive=expressive, drum=drum)
            for _ in range(n_bars)
        )
        tracks.append(Track(program=program, bars=bars))
    return Piece(tracks=tuple(tracks), ticks_per_quarter=480)


def demo_corpus(
    n_pieces: int = 30, seed: int = 0, expressive: bool = False
) -> list[Piece]:
    """A reproducible list of small multi-track pieces."""
    rng = np.random.default_rng(seed)
    pieces = []
    for i in range(n_pieces):
        n_tracks = int(rng.integers(4, 7))
        n_bars = int(rng.choice([8, 12, 16]))
        pieces.append(
            random_piece(
                seed=seed * 100003 + i,
                n_tracks=n_tracks,
                n_bars=n_bars,
                expressive=expressive,
            )
        )
    return pieces


def write_demo_corpus(directory: Path, n_pieces: int = 30, seed: int = 0) -> list[Path]:
    """Materialize the demo corpus as MIDI files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, piece in enumerate(demo_corpus(n_pieces, seed)):
        path = directory / f"demo_{i:03d}.mid"
        path.write_bytes(write_midi(piece))
        paths.append(path)
    return paths
