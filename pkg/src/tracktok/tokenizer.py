"""Encode and decode pieces as multi-track / bar-fill token sequences.

A sequence nests bars inside tracks inside a piece.  In bar-fill mode the
masked bars are replaced by FILL_IN placeholders and their bodies appear
after the final TRACK_END as FILL_START .. FILL_END blocks, in track-major
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .score import Bar, ControlSpec, Note, Piece, Track, bar_steps
from .vocab import TokenVocab

MULTITRACK = "multitrack"
BARFILL = "barfill"


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    """Grammar violation at a specific token index."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (token index {index})")
        self.index = index


@dataclass(frozen=True)
class TokenSeq:
    """An encoded sequence plus the side metadata tokens do not carry.

    ``signatures`` holds the per-bar time signature of the encoded segment;
    it is needed to reverse the encoding since the token stream itself is
    signature-free.
    """

    vocab: TokenVocab
    ids: tuple[int, ...]
    mode: str = MULTITRACK
    expressive: bool = False
    with_controls: bool = False
    signatures: tuple[tuple[int, int], ...] = ()
    ticks_per_quarter: int = 480
    style: Optional[str] = None

    def __len__(self) -> int:
        return len(self.ids)

    def names(self) -> list[str]:
        return [self.vocab.name_of(t) for t in self.ids]


@dataclass(frozen=True)
class DecodeResult:
    piece: Piece
    mask: frozenset[tuple[int, int]] = frozenset()


def ordered_mask(mask: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Mask entries in the order their fill blocks appear: track-major."""
    return sorted(set(mask))


class MultiTrackTokenizer:
    """Reversible piece <-> token-sequence mapping.

    Parameters mirror the two representation variants: ``expressive`` adds
    VELOCITY and microtiming DELTA tokens, ``with_controls`` inserts the
    five attribute-control tokens after each INSTRUMENT token.
    """

    def __init__(
        self,
        expressive: bool = False,
        with_controls: bool = False,
        style_labels: tuple[str, ...] = (),
    ):
        self.expressive = expressive
        self.with_controls = with_controls
        self.style_labels = tuple(style_labels)
        self.vocab = TokenVocab(style_labels=self.style_labels)

    def get_params(self, deep: bool = True) -> dict:
        return {
            "expressive": self.expressive,
            "with_controls": self.with_controls,
            "style_labels": self.style_labels,
        }

    def set_params(self, **params) -> "MultiTrackTokenizer":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key}")
            setattr(self, key, value)
        self.vocab = TokenVocab(style_labels=tuple(self.style_labels))
        return self

    # ------------------------------------------------------------------
    # Encoding

    def encode(self, piece: Piece) -> TokenSeq:
        """Multi-track encoding: START then one track section per track."""
        v = self.vocab
        ids = [v.START]
        for track in piece.tracks:
            ids.extend(self._track_tokens(track, piece.style, mask_bars=()))
        return self._seq(ids, MULTITRACK, piece)

    def encode_infill(self, piece: Piece, mask: Iterable[tuple[int, int]]) -> TokenSeq:
        """Bar-fill encoding with the given (track, bar) cells masked."""
        cells = ordered_mask(mask)
        if not cells:
            raise EncodeError("bar-fill mask must be non-empty")
        for t, b in cells:
            if not (0 <= t < len(piece.tracks) and 0 <= b < piece.bar_count):
                raise EncodeError(f"mask cell ({t}, {b}) outside piece")
        v = self.vocab
        ids = [v.START_FILL]
        for t, track in enumerate(piece.tracks):
            masked_bars = tuple(b for tt, b in cells if tt == t)
            ids.extend(self._track_tokens(track, piece.style, mask_bars=masked_bars))
        for t, b in cells:
            ids.append(v.FILL_START)
            ids.extend(self._bar_body(piece.tracks[t].bars[b]))
            ids.append(v.FILL_END)
        return self._seq(ids, BARFILL, piece)

    def _seq(self, ids: list[int], mode: str, piece: Piece) -> TokenSeq:
        signatures = tuple(
            (bar.numerator, bar.denominator) for bar in piece.tracks[0].bars
        )
        return TokenSeq(
            vocab=self.vocab,
            ids=tuple(ids),
            mode=mode,
            expressive=self.expressive,
            with_controls=self.with_controls,
            signatures=signatures,
            ticks_per_quarter=piece.ticks_per_quarter,
            style=piece.style,
        )

    def _track_tokens(
        self, track: Track, style: Optional[str], mask_bars: tuple[int, ...]
    ) -> list[int]:
        v = self.vocab
        ids = [v.TRACK_START, v.instrument_id(track.program)]
        if self.style_labels and style is not None:
            if style not in self.style_labels:
                raise EncodeError(f"style {style!r} not in configured label set")
            ids.append(v.style.start + self.style_labels.index(style))
        if self.with_controls:
            spec = track.controls
            if spec is None:
                raise EncodeError("with_controls set but track has no ControlSpec")
            ids.extend(
                [
                    v.density.id_for(spec.density),
                    v.min_poly.id_for(spec.poly_range[0]),
                    v.max_poly.id_for(spec.poly_range[1]),
                    v.min_dur.id_for(spec.dur_range[0]),
                    v.max_dur.id_for(spec.dur_range[1]),
                ]
            )
        for b, bar in enumerate(track.bars):
            ids.append(v.BAR_START)
            if b in mask_bars:
                ids.append(v.FILL_IN)
            else:
                ids.extend(self._bar_body(bar))
            ids.append(v.BAR_END)
        ids.append(v.TRACK_END)
        return ids

    def _bar_body(self, bar: Bar) -> list[int]:
        v = self.vocab
        ids: list[int] = []
        last_onset = None
        for note in bar.notes:  # already sorted by (onset, pitch)
            if note.onset != last_onset:
                ids.append(v.time_position.id_for(note.onset))
                last_onset = note.onset
            if self.expressive and note.micro:
                if note.micro < 0:
                    ids.append(v.delta_neg.start)
                    ids.append(v.delta.id_for(-note.micro))
                else:
                    ids.append(v.delta.id_for(note.micro))
            ids.append(v.note_on.id_for(note.pitch))
            if self.expressive:
                ids.append(v.velocity.id_for(note.velocity))
            ids.append(v.duration.id_for(note.duration))
        return ids

    # ------------------------------------------------------------------
    # Decoding

    def decode(self, seq: TokenSeq) -> DecodeResult:
        """Reverse the encoding; fills are merged back at their placeholders."""
        return _Decoder(self, seq).run()


@dataclass
class _TrackDraft:
    program: int
    controls: Optional[ControlSpec] = None
    bars: list[Optional[list[Note]]] = field(default_factory=list)  # None = FILL_IN


class _Decoder:
    def __init__(self, tokenizer: MultiTrackTokenizer, seq: TokenSeq):
        self.tok = tokenizer
        self.v = tokenizer.vocab
        self.seq = seq
        self.ids = seq.ids
        self.pos = 0

    def error(self, message: str) -> DecodeError:
        index = min(self.pos, len(self.ids) - 1)
        return DecodeError(message, index)

    def peek(self) -> Optional[int]:
        return self.ids[self.pos] if self.pos < len(self.ids) else None

    def take(self) -> int:
        if self.pos >= len(self.ids):
            raise DecodeError("unexpected end of sequence", len(self.ids))
        t = self.ids[self.pos]
        self.pos += 1
        return t

    def expect(self, token_id: int, what: str) -> None:
        t = self.take()
        if t != token_id:
            self.pos -= 1
            raise self.error(f"expected {what}, got {self.v.name_of(t)}")

    def bar_length(self, bar_index: int) -> int:
        sigs = self.seq.signatures
        if bar_index < len(sigs):
            return bar_steps(*sigs[bar_index])
        return 48  # default 4/4 when the metadata does not cover this bar

    def run(self) -> DecodeResult:
        barfill = self.seq.mode == BARFILL
        self.expect(self.v.START_FILL if barfill else self.v.START, "sequence start")
        drafts: list[_TrackDraft] = []
        while self.peek() == self.v.TRACK_START:
            drafts.append(self.parse_track())
        placeholders = [
            (t, b)
            for t, draft in enumerate(drafts)
            for b, body in enumerate(draft.bars)
            if body is None
        ]
        fills = 0
        while self.peek() == self.v.FILL_START:
            if fills >= len(placeholders):
                raise self.error("more fill blocks than FILL_IN placeholders")
            self.take()
            t, b = placeholders[fills]
            notes = self.parse_bar_body(self.bar_length(b), self.v.FILL_END)
            self.expect(self.v.FILL_END, "FILL_END")
            drafts[t].bars[b] = notes
            fills += 1
        if self.pos != len(self.ids):
            raise self.error("trailing tokens after sequence end")
        if fills != len(placeholders):
            raise DecodeError(
                f"{len(placeholders)} FILL_IN placeholders but {fills} fill blocks",
                len(self.ids) - 1,
            )
        if not drafts:
            raise DecodeError("sequence contains no tracks", 0)

        tracks = []
        for draft in drafts:
            bars = tuple(
                Bar(
                    numerator=self.seq.signatures[b][0] if b < len(self.seq.signatures) else 4,
                    denominator=self.seq.signatures[b][1] if b < len(self.seq.signatures) else 4,
                    notes=tuple(body or ()),
                )
                for b, body in enumerate(draft.bars)
            )
            tracks.append(Track(program=draft.program, bars=bars, controls=draft.controls))
        piece = Piece(
            tracks=tuple(tracks),
            ticks_per_quarter=self.seq.ticks_per_quarter,
            style=self.seq.style,
        )
        return DecodeResult(piece=piece, mask=frozenset(placeholders))

    def parse_track(self) -> _TrackDraft:
        v = self.v
        self.expect(v.TRACK_START, "TRACK_START")
        t = self.take()
        if t not in v.instrument and t not in v.instrument_drum:
            self.pos -= 1
            raise self.error(f"expected INSTRUMENT, got {v.name_of(t)}")
        draft = _TrackDraft(program=v.instrument_program(t))
        if self.tok.style_labels and self.peek() is not None and self.peek() in v.style:
            self.take()  # style recorded at piece level via seq metadata
        if self.tok.with_controls:
            draft.controls = self.parse_controls()
        while self.peek() == v.BAR_START:
            self.take()
            if self.peek() == v.FILL_IN:
                self.take()
                draft.bars.append(None)
            else:
                draft.bars.append(
                    self.parse_bar_body(self.bar_length(len(draft.bars)), v.BAR_END)
                )
            self.expect(v.BAR_END, "BAR_END")
        self.expect(v.TRACK_END, "TRACK_END")
        return draft

    def parse_controls(self) -> ControlSpec:
        v = self.v
        values = []
        for family, name in [
            (v.density, "DENSITY"),
            (v.min_poly, "MIN_POLY"),
            (v.max_poly, "MAX_POLY"),
            (v.min_dur, "MIN_DUR"),
            (v.max_dur, "MAX_DUR"),
        ]:
            t = self.take()
            if t not in family:
                self.pos -= 1
                raise self.error(f"expected {name}, got {v.name_of(t)}")
            values.append(family.value_of(t))
        density, p_lo, p_hi, d_lo, d_hi = values
        if p_lo > p_hi or d_lo > d_hi:
            raise self.error("control range lower bound exceeds upper bound")
        return ControlSpec(density=density, poly_range=(p_lo, p_hi), dur_range=(d_lo, d_hi))

    def parse_bar_body(self, length: int, end_token: int) -> list[Note]:
        v = self.v
        notes: list[Note] = []
        onset = -1
        seen: set[tuple[int, int]] = set()
        while True:
            t = self.peek()
            if t is None:
                raise DecodeError("unexpected end of sequence inside a bar", len(self.ids))
            if t == end_token:
                return notes
            if t in v.time_position:
                value = v.time_position.value_of(t)
                if value < onset:
                    raise self.error("TIME_POSITION decreased within a bar")
                if value >= length:
                    raise self.error(f"TIME_POSITION {value} outside bar of {length} steps")
                onset = value
                self.take()
                continue
            if onset < 0:
                raise self.error(f"expected TIME_POSITION, got {v.name_of(t)}")
            notes.append(self.parse_note(onset, seen))

    def parse_note(self, onset: int, seen: set[tuple[int, int]]) -> Note:
        v = self.v
        micro = 0
        t = self.take()
        if self.tok.expressive and t in v.delta_neg:
            t = self.take()
            if t not in v.delta:
                self.pos -= 1
                raise self.error(f"expected DELTA after DELTA_NEG, got {v.name_of(t)}")
            micro = -v.delta.value_of(t)
            t = self.take()
        elif self.tok.expressive and t in v.delta:
            micro = v.delta.value_of(t)
            if micro > 79:
                self.pos -= 1
                raise self.error("positive DELTA exceeds 79")
            t = self.take()
        if t not in v.note_on:
            self.pos -= 1
            raise self.error(f"expected NOTE_ON, got {v.name_of(t)}")
        pitch = v.note_on.value_of(t)
        if (onset, pitch) in seen:
            self.pos -= 1
            raise self.error(f"duplicate note at onset {onset} pitch {pitch}")
        seen.add((onset, pitch))
        velocity = 100
        if self.tok.expressive:
            t = self.take()
            if t not in v.velocity:
                self.pos -= 1
                raise self.error(f"expected VELOCITY, got {v.name_of(t)}")
            velocity = v.velocity.value_of(t)
            if velocity == 0:
                self.pos -= 1
                raise self.error("VELOCITY must be at least 1")
        t = self.take()
        if t not in v.duration:
            self.pos -= 1
            raise self.error(f"expected DURATION, got {v.name_of(t)}")
        duration = v.duration.value_of(t)
        return Note(onset=onset, pitch=pitch, duration=duration, velocity=velocity, micro=micro)
