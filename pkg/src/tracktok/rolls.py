"""Piano rolls, similarity metrics, and the compressed-roll corpus search."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .score import Piece, Track

PITCH_LO, PITCH_HI = 21, 109  # kept columns for the compressed roll
POOL = 6  # OR-pooled step group (one eighth note)


def piano_roll(track: Track, start_bar: int = 0, n_bars: Optional[int] = None) -> np.ndarray:
    """T x 128 boolean matrix: cell (t, p) is true while pitch p sounds.

    Notes sustaining into the selected bars from earlier bars are included;
    sounding intervals are clipped to the selected span.
    """
    offsets = track.bar_offsets()
    if n_bars is None:
        n_bars = len(track.bars) - start_bar
    if start_bar < 0 or n_bars < 0 or start_bar + n_bars > len(track.bars):
        raise ValueError("bar range outside track")
    lo = offsets[start_bar] if track.bars else 0
    hi = lo + sum(bar.length for bar in track.bars[start_bar : start_bar + n_bars])
    roll = np.zeros((hi - lo, 128), dtype=bool)
    for onset, note in track.global_notes():
        a = max(onset, lo)
        b = min(onset + note.duration, hi)
        if a < b:
            roll[a - lo : b - lo, note.pitch] = True
    return roll


def bar_rolls(track: Track) -> list[np.ndarray]:
    """One roll per bar (48 x 128 for 4/4 bars)."""
    return [piano_roll(track, b, 1) for b in range(len(track.bars))]


def hamming(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of differing cells; 0 means identical, 1 maximally different."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(a != b))


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """|intersection| / |union| of true cells; empty vs empty is 1."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def compress_bar_roll(roll: np.ndarray) -> np.ndarray:
    """Reduce a 48x128 bar roll to 8x88: crop pitches to [21, 109) and
    OR-pool consecutive groups of 6 steps."""
    if roll.shape != (48, 128):
        raise ValueError(f"expected shape (48, 128), got {roll.shape}")
    cropped = roll[:, PITCH_LO:PITCH_HI]
    return cropped.reshape(48 // POOL, POOL, PITCH_HI - PITCH_LO).any(axis=1)


@dataclass(frozen=True)
class BarRef:
    """Provenance of an indexed bar."""

    source: str
    track: int
    bar: int


class CorpusIndex:
    """Searchable collection of single-bar piano rolls (4/4 bars only)."""

    MAGIC = b"TTIX"
    VERSION = 1

    def __init__(self):
        self.refs: list[BarRef] = []
        self._full: list[np.ndarray] = []
        self._compressed: list[np.ndarray] = []
        self._compressed_stack: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.refs)

    def add_piece(self, piece: Piece, source: str) -> None:
        for t, track in enumerate(piece.tracks):
            for b, bar in enumerate(track.bars):
                if bar.length != 48:
                    continue  # compression is defined for 48-step bars only
                roll = piano_roll(track, b, 1)
                self.add_bar(roll, BarRef(source=source, track=t, bar=b))

    def add_bar(self, roll: np.ndarray, ref: BarRef) -> None:
        if roll.shape != (48, 128):
            raise ValueError(f"expected shape (48, 128), got {roll.shape}")
        self.refs.append(ref)
        self._full.append(roll.astype(bool))
        self._compressed.append(compress_bar_roll(roll))
        self._compressed_stack = None

    def _stack(self) -> np.ndarray:
        if self._compressed_stack is None:
            self._compressed_stack = np.stack(self._compressed) if self._compressed else np.zeros((0, 8, 88), bool)
        return self._compressed_stack

    def full_roll(self, i: int) -> np.ndarray:
        return self._full[i]

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack(">HI", self.VERSION, len(self.refs)))
            refs = json.dumps(
                [{"source": r.source, "track": r.track, "bar": r.bar} for r in self.refs]
            ).encode()
            fh.write(struct.pack(">I", len(refs)))
            fh.write(refs)
            if self._full:
                payload = io.BytesIO()
                np.save(payload, np.packbits(np.stack(self._full), axis=None))
                fh.write(payload.getvalue())

    @classmethod
    def load(cls, path) -> "CorpusIndex":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != cls.MAGIC:
                raise ValueError("not a corpus index file")
            version, count = struct.unpack(">HI", fh.read(6))
            if version != cls.VERSION:
                raise ValueError(f"unsupported index version {version}")
            ref_len = struct.unpack(">I", fh.read(4))[0]
            refs = json.loads(fh.read(ref_len).decode())
            index = cls()
            if count:
                bits = np.load(io.BytesIO(fh.read()))
                rolls = np.unpackbits(bits)[: count * 48 * 128].reshape(count, 48, 128).astype(bool)
                for ref, roll in zip(refs, rolls):
                    index.add_bar(roll, BarRef(**ref))
        return index


@dataclass(frozen=True)
class BarMatch:
    distance: float  # full-roll Hamming; inf when no candidate passed the prefilter
    ref: Optional[BarRef]


@dataclass(frozen=True)
class SearchResult:
    per_bar: tuple[BarMatch, ...]

    @property
    def worst(self) -> float:
        """Max over per-bar minimum distances (scalar for histograms)."""
        return max((m.distance for m in self.per_bar), default=float("inf"))

    def matched(self, threshold: float) -> bool:
        """True iff every bar has a neighbor at or below ``threshold``."""
        return all(m.distance <= threshold for m in self.per_bar)


def nearest_in_corpus(
    excerpt: Sequence[np.ndarray],
    index: CorpusIndex,
    prefilter: Optional[float] = 0.25,
) -> SearchResult:
    """Per-bar nearest neighbors of a multi-bar excerpt.

    Candidates whose compressed-roll Hamming distance exceeds ``prefilter``
    are skipped; pass ``None`` to compare every bar at full resolution.
    """
    if not len(index):
        raise ValueError("empty corpus index")
    stack = index._stack().reshape(len(index), -1)
    full_stack = np.stack(index._full).reshape(len(index), -1)
    matches = []
    for roll in excerpt:
        comp = compress_bar_roll(roll).reshape(-1)
        cdist = np.mean(stack != comp, axis=1)
        if prefilter is None:
            candidates = np.arange(len(index))
        else:
            candidates = np.nonzero(cdist <= prefilter)[0]
        if len(candidates) == 0:
            matches.append(BarMatch(distance=float("inf"), ref=None))
            continue
        dists = np.mean(full_stack[candidates] != roll.reshape(-1), axis=1)
        best = int(np.argmin(dists))
        matches.append(
            BarMatch(distance=float(dists[best]), ref=index.refs[int(candidates[best])])
        )
    return SearchResult(per_bar=tuple(matches))
