"""Attribute-control extraction: note density, duration and polyphony ranges.

Density levels are relative to the instrument: the onsets-per-bar
distribution of each program is split into ten regions at its 10th..90th
nearest-rank percentiles.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .score import DRUM, ControlSpec, Piece, Track

POLY_CAP = 16
#: Duration-level bin edges in steps: [1/32,1/16) [1/16,1/8) [1/8,1/4)
#: [1/4,1/2) [1/2,1/1), with clamping below and above.
_DURATION_EDGES = (3, 6, 12, 24)


class NoContentError(ValueError):
    """Raised when a control needs notes and the track has none."""


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """The ceil(pct/100 * N)-th order statistic of ``values``."""
    if not values:
        raise ValueError("empty distribution")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100 * len(ordered)))
    return ordered[rank - 1]


def duration_level(duration: int) -> int:
    """Map a duration in steps to one of five bins."""
    if not 1 <= duration <= 96:
        raise ValueError(f"duration {duration} outside 1..96")
    return bisect.bisect_right(_DURATION_EDGES, duration)


def duration_range(track: Track) -> tuple[int, int]:
    """15th/85th nearest-rank percentiles of per-note duration levels."""
    levels = [duration_level(n.duration) for _, n in track.global_notes()]
    if not levels:
        raise NoContentError("track has no notes")
    return int(nearest_rank(levels, 15)), int(nearest_rank(levels, 85))


def polyphony_profile(track: Track) -> list[int]:
    """Per-step sounding-note counts over the track extent (spillover kept)."""
    ends = [onset + n.duration for onset, n in track.global_notes()]
    extent = max(ends, default=0)
    counts = [0] * extent
    for onset, note in track.global_notes():
        for step in range(onset, onset + note.duration):
            counts[step] += 1
    return counts


def polyphony_range(track: Track) -> tuple[int, int]:
    """15th/85th percentiles of nonzero per-step polyphony, capped at 16."""
    sounding = [c for c in polyphony_profile(track) if c > 0]
    if not sounding:
        raise NoContentError("track has no notes")
    lo = min(POLY_CAP, int(nearest_rank(sounding, 15)))
    hi = min(POLY_CAP, int(nearest_rank(sounding, 85)))
    return lo, hi


@dataclass(frozen=True)
class ControlTable:
    """Per-program density boundaries (10th..90th percentiles) plus fallback."""

    boundaries: dict[int, tuple[float, ...]]
    fallback: tuple[float, ...]

    def for_program(self, program: int) -> tuple[float, ...]:
        return self.boundaries.get(program, self.fallback)

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "programs": {
                str(p): list(b) for p, b in sorted(self.boundaries.items())
            },
            "fallback": list(self.fallback),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ControlTable":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported control table version {doc.get('version')}")
        return cls(
            boundaries={int(p): tuple(b) for p, b in doc["programs"].items()},
            fallback=tuple(doc["fallback"]),
        )


class DensityModel:
    """Corpus-fitted density table; fit/transform style estimator.

    After :meth:`fit`, ``table_`` holds the per-program boundaries and
    :meth:`level` maps a track to its 0..9 density level.
    """

    def __init__(self, percentiles: tuple[int, ...] = tuple(range(10, 100, 10))):
        self.percentiles = percentiles

    def get_params(self, deep: bool = True) -> dict:
        return {"percentiles": self.percentiles}

    def fit(self, corpus: Iterable[Piece]) -> "DensityModel":
        per_program: dict[int, list[int]] = {}
        pooled: list[int] = []
        for piece in corpus:
            for track in piece.tracks:
                counts = [len(bar.notes) for bar in track.bars]
                per_program.setdefault(track.program, []).extend(counts)
                pooled.extend(counts)
        if not pooled:
            raise ValueError("corpus contains no bars")
        boundaries = {
            program: tuple(nearest_rank(counts, p) for p in self.percentiles)
            for program, counts in per_program.items()
            if counts
        }
        fallback = tuple(nearest_rank(pooled, p) for p in self.percentiles)
        self.table_ = ControlTable(boundaries=boundaries, fallback=fallback)
        return self

    @property
    def table(self) -> ControlTable:
        if not hasattr(self, "table_"):
            raise AttributeError("DensityModel is not fitted; call fit() first")
        return self.table_

    def level_of_mean(self, mean_onsets: float, program: int) -> int:
        bounds = self.table.for_program(program)
        return bisect.bisect_right(list(bounds), mean_onsets)

    def level(self, track: Track) -> int:
        """Density level of a track: region of its mean onsets per bar."""
        if not track.bars:
            raise NoContentError("track has no bars")
        mean = track.note_count / len(track.bars)
        return self.level_of_mean(mean, track.program)

    @classmethod
    def from_table(cls, table: ControlTable) -> "DensityModel":
        model = cls()
        model.table_ = table
        return model


def control_spec(track: Track, density: DensityModel) -> ControlSpec:
    """Full ControlSpec for a track; empty tracks get neutral ranges."""
    level = density.level(track)
    if track.note_count == 0:
        return ControlSpec(density=level, poly_range=(1, 1), dur_range=(0, 0))
    return ControlSpec(
        density=level,
        poly_range=polyphony_range(track),
        dur_range=duration_range(track),
    )


def with_controls(piece: Piece, density: DensityModel) -> Piece:
    """Return a copy of the piece with ControlSpec attached to every track."""
    from dataclasses import replace

    tracks = tuple(
        replace(track, controls=control_spec(track, density)) for track in piece.tracks
    )
    return replace(piece, tracks=tracks)
