"""Quantized in-memory score model.

Time is measured in steps of one sixteenth-note triplet (48 steps per whole
note).  All types are immutable after construction; operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

STEPS_PER_WHOLE = 48
STEPS_PER_QUARTER = STEPS_PER_WHOLE // 4
MAX_BAR_STEPS = 96  # a double whole note
MAX_DURATION = 96
MICRO_UNITS_PER_STEP = 160  # microtiming resolution: 1/160 of a step

#: Distinguished program value for drum tracks (never transposed, exported on
#: MIDI channel 10).
DRUM = -1


class RangeError(ValueError):
    """An index or value fell outside its documented range."""


@dataclass(frozen=True, order=True)
class Note:
    """A single note, positioned relative to the start of its bar."""

    onset: int
    pitch: int
    duration: int
    velocity: int = 100
    micro: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.pitch <= 127:
            raise RangeError(f"pitch {self.pitch} outside 0..127")
        if self.onset < 0:
            raise RangeError(f"onset {self.onset} negative")
        if not 1 <= self.duration <= MAX_DURATION:
            raise RangeError(f"duration {self.duration} outside 1..{MAX_DURATION}")
        if not 1 <= self.velocity <= 127:
            raise RangeError(f"velocity {self.velocity} outside 1..127")
        if not -80 <= self.micro <= 79:
            raise RangeError(f"micro {self.micro} outside -80..79")


def bar_steps(numerator: int, denominator: int) -> int:
    """Length in steps of a bar with the given time signature."""
    length, rem = divmod(numerator * STEPS_PER_WHOLE, denominator)
    if rem:
        raise RangeError(f"{numerator}/{denominator} does not fit the step grid")
    return length


@dataclass(frozen=True)
class Bar:
    """One measure: a time signature plus notes sorted by (onset, pitch)."""

    numerator: int = 4
    denominator: int = 4
    notes: tuple[Note, ...] = ()

    def __post_init__(self) -> None:
        length = bar_steps(self.numerator, self.denominator)
        if length > MAX_BAR_STEPS:
            raise RangeError(
                f"bar {self.numerator}/{self.denominator} spans {length} steps "
                f"(max {MAX_BAR_STEPS})"
            )
        ordered = tuple(sorted(self.notes, key=lambda n: (n.onset, n.pitch)))
        object.__setattr__(self, "notes", ordered)
        seen: set[tuple[int, int]] = set()
        for note in ordered:
            if note.onset >= length:
                raise RangeError(f"onset {note.onset} outside bar of {length} steps")
            key = (note.onset, note.pitch)
            if key in seen:
                raise RangeError(f"duplicate note at onset {note.onset} pitch {note.pitch}")
            seen.add(key)

    @property
    def length(self) -> int:
        return bar_steps(self.numerator, self.denominator)


@dataclass(frozen=True)
class Track:
    """All material played by one instrument (program, or DRUM)."""

    program: int
    bars: tuple[Bar, ...] = ()
    controls: Optional["ControlSpec"] = None

    def __post_init__(self) -> None:
        if self.program != DRUM and not 0 <= self.program <= 127:
            raise RangeError(f"program {self.program} outside 0..127 (or DRUM)")
        object.__setattr__(self, "bars", tuple(self.bars))

    @property
    def is_drum(self) -> bool:
        return self.program == DRUM

    def bar_offsets(self) -> list[int]:
        """Global start step of each bar."""
        offsets, pos = [], 0
        for bar in self.bars:
            offsets.append(pos)
            pos += bar.length
        return offsets

    @property
    def total_steps(self) -> int:
        return sum(bar.length for bar in self.bars)

    def global_notes(self) -> Iterator[tuple[int, Note]]:
        """Yield (global onset step, note) over all bars."""
        pos = 0
        for bar in self.bars:
            for note in bar.notes:
                yield pos + note.onset, note
            pos += bar.length

    @property
    def note_count(self) -> int:
        return sum(len(bar.notes) for bar in self.bars)


@dataclass(frozen=True)
class ControlSpec:
    """Per-track attribute-control values."""

    density: int
    poly_range: tuple[int, int]
    dur_range: tuple[int, int]

    def __post_init__(self) -> None:
        if not 0 <= self.density <= 9:
            raise RangeError(f"density level {self.density} outside 0..9")
        lo, hi = self.poly_range
        if not (1 <= lo <= hi <= 16):
            raise RangeError(f"polyphony range {self.poly_range} invalid")
        lo, hi = self.dur_range
        if not (0 <= lo <= hi <= 4):
            raise RangeError(f"duration range {self.dur_range} invalid")


@dataclass(frozen=True)
class Piece:
    """A bar-aligned collection of tracks."""

    tracks: tuple[Track, ...]
    ticks_per_quarter: int = 480
    style: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracks", tuple(self.tracks))
        if not self.tracks:
            raise RangeError("piece must contain at least one track")
        if self.ticks_per_quarter <= 0:
            raise RangeError("ticks_per_quarter must be positive")
        first = self.tracks[0]
        for track in self.tracks[1:]:
            if len(track.bars) != len(first.bars):
                raise RangeError("tracks differ in bar count")
            for a, b in zip(track.bars, first.bars):
                if (a.numerator, a.denominator) != (b.numerator, b.denominator):
                    raise RangeError("tracks differ in per-bar time signatures")

    @property
    def bar_count(self) -> int:
        return len(self.tracks[0].bars)


def transpose(piece: Piece, semitones: int) -> Piece:
    """Shift every non-drum pitch by ``semitones``; drums untouched.

    Notes pushed outside 0..127 are dropped.
    """
    if not -6 <= semitones <= 5:
        raise RangeError(f"transpose amount {semitones} outside -6..5")
    if semitones == 0:
        return piece
    tracks = []
    for track in piece.tracks:
        if track.is_drum:
            tracks.append(track)
            continue
        bars = []
        for bar in track.bars:
            kept = tuple(
                replace(n, pitch=n.pitch + semitones)
                for n in bar.notes
                if 0 <= n.pitch + semitones <= 127
            )
            bars.append(replace(bar, notes=kept))
        tracks.append(replace(track, bars=tuple(bars)))
    return replace(piece, tracks=tuple(tracks))


def slice_segment(
    piece: Piece,
    start_bar: int,
    n_bars: int,
    track_indices: Sequence[int],
) -> Piece:
    """Restrict a piece to ``n_bars`` bars and the given tracks.

    Track order follows ``track_indices``.
    """
    if not track_indices:
        raise RangeError("track_indices must be non-empty")
    if start_bar < 0 or n_bars < 1 or start_bar + n_bars > piece.bar_count:
        raise RangeError(
            f"bar range [{start_bar}, {start_bar + n_bars}) outside piece of "
            f"{piece.bar_count} bars"
        )
    for idx in track_indices:
        if not 0 <= idx < len(piece.tracks):
            raise RangeError(f"track index {idx} outside 0..{len(piece.tracks) - 1}")
    tracks = tuple(
        replace(
            piece.tracks[idx],
            bars=piece.tracks[idx].bars[start_bar : start_bar + n_bars],
        )
        for idx in track_indices
    )
    return replace(piece, tracks=tracks)


def polyphony_at(track: Track, global_step: int) -> int:
    """Number of notes sounding at ``global_step`` (half-open intervals)."""
    count = 0
    for onset, note in track.global_notes():
        if onset <= global_step < onset + note.duration:
            count += 1
    return count
