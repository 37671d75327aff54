"""Standard MIDI File (type 0/1) reading and writing.

Onsets are quantized to the sixteenth-note-triplet grid; in expressive mode
the residual is kept as a microtiming offset in 1/160-step units and note
velocities are preserved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .score import (
    DRUM,
    MAX_BAR_STEPS,
    MAX_DURATION,
    MICRO_UNITS_PER_STEP,
    STEPS_PER_QUARTER,
    Bar,
    Note,
    Piece,
    Track,
    bar_steps,
)

DEFAULT_VELOCITY = 100
DRUM_CHANNEL = 9


class MidiParseError(ValueError):
    """Malformed SMF data; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedMeterError(ValueError):
    """A bar longer than a double whole note was encountered."""

    def __init__(self, numerator: int, denominator: int, bar_index: int):
        super().__init__(
            f"bar {bar_index} in {numerator}/{denominator} exceeds "
            f"{MAX_BAR_STEPS} steps"
        )
        self.bar_index = bar_index


@dataclass(frozen=True)
class QuantizedOnset:
    """Grid step plus signed microtiming residual in 1/160-step units."""

    step: int
    micro: int


def _step_ticks(tpq: int) -> Fraction:
    return Fraction(tpq, STEPS_PER_QUARTER)


def quantize_onset(ticks: int, tpq: int) -> QuantizedOnset:
    """Snap an absolute tick to the grid; ties round to the later step.

    The residual is expressed in 1/160-step units, so ``micro`` lies in
    [-80, 79] and the reconstruction error is at most half a unit.
    """
    if ticks < 0:
        raise ValueError("ticks must be non-negative")
    st = _step_ticks(tpq)
    # floor(x + 1/2) rounds half-up, i.e. ties to the later step
    step = (Fraction(ticks) / st + Fraction(1, 2)).__floor__()
    residual = (Fraction(ticks) - step * st) * MICRO_UNITS_PER_STEP / st
    micro = (residual + Fraction(1, 2)).__floor__()
    micro = max(-80, min(79, micro))
    return QuantizedOnset(step=int(step), micro=int(micro))


def _quantize_duration(ticks: int, tpq: int) -> int:
    st = _step_ticks(tpq)
    steps = int((Fraction(ticks) / st + Fraction(1, 2)).__floor__())
    return max(1, min(MAX_DURATION, steps))


# ---------------------------------------------------------------------------
# Parsing


class _Reader:
    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.pos = 0
        self.base = base  # offset of this buffer within the whole file

    @property
    def offset(self) -> int:
        return self.base + self.pos

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MidiParseError("unexpected end of data", self.offset)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.read(1)[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8()
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiParseError("variable-length quantity too long", self.offset)


@dataclass
class _RawNote:
    track_chunk: int
    channel: int
    program: int
    pitch: int
    velocity: int
    on_tick: int
    off_tick: int


def _parse_chunks(data: bytes):
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6:
        raise MidiParseError("short MThd chunk", 4)
    fmt, ntrks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division not supported", 12)
    if division == 0:
        raise MidiParseError("zero ticks per quarter", 12)
    pos = 8 + header_len
    chunks = []
    while pos < len(data) and len(chunks) < ntrks:
        if pos + 8 > len(data):
            raise MidiParseError("truncated chunk header", pos)
        tag = data[pos : pos + 4]
        length = struct.unpack(">I", data[pos + 4 : pos + 8])[0]
        body_start = pos + 8
        if body_start + length > len(data):
            raise MidiParseError("chunk length overruns file", pos + 4)
        if tag == b"MTrk":
            chunks.append(_Reader(data[body_start : body_start + length], body_start))
        pos = body_start + length
    if len(chunks) != ntrks:
        raise MidiParseError(f"expected {ntrks} track chunks, found {len(chunks)}", pos)
    return division, chunks


def _parse_track_chunk(reader: _Reader, chunk_index: int, notes: list[_RawNote],
                       time_sigs: list[tuple[int, int, int]],
                       programs_seen: set[tuple[int, int]]) -> None:
    tick = 0
    status = 0
    # FIFO pairing of note-ons awaiting their note-off, per (channel, pitch)
    open_notes: dict[tuple[int, int], list[_RawNote]] = {}
    channel_program = [0] * 16
    while not reader.eof():
        tick += reader.varlen()
        byte = reader.u8()
        if byte & 0x80:
            status = byte
        else:
            if status == 0:
                raise MidiParseError("running status without prior status", reader.offset - 1)
            reader.pos -= 1
        if status == 0xFF:
            meta_type = reader.u8()
            length = reader.varlen()
            body = reader.read(length)
            if meta_type == 0x58 and length >= 2:
                time_sigs.append((tick, body[0], 1 << body[1]))
            status = 0  # meta events cancel running status
            continue
        if status in (0xF0, 0xF7):
            length = reader.varlen()
            reader.read(length)
            status = 0
            continue
        kind = status & 0xF0
        channel = status & 0x0F
        if kind == 0x90:
            pitch, velocity = reader.u8(), reader.u8()
            if velocity == 0:
                _close_note(open_notes, channel, pitch, tick)
            else:
                raw = _RawNote(
                    track_chunk=chunk_index,
                    channel=channel,
                    program=DRUM if channel == DRUM_CHANNEL else channel_program[channel],
                    pitch=pitch,
                    velocity=velocity,
                    on_tick=tick,
                    off_tick=-1,
                )
                open_notes.setdefault((channel, pitch), []).append(raw)
                notes.append(raw)
        elif kind == 0x80:
            pitch, _ = reader.u8(), reader.u8()
            _close_note(open_notes, channel, pitch, tick)
        elif kind == 0xC0:
            program = reader.u8()
            channel_program[channel] = program
            programs_seen.add(
                (chunk_index, DRUM if channel == DRUM_CHANNEL else program)
            )
        elif kind == 0xD0:
            reader.u8()
        elif kind in (0xA0, 0xB0, 0xE0):
            reader.read(2)
        else:
            raise MidiParseError(f"unexpected status byte 0x{status:02x}", reader.offset - 1)
    # orphan note-ons end where the chunk ends
    for pending in open_notes.values():
        for raw in pending:
            if raw.off_tick < 0:
                raw.off_tick = tick


def _close_note(open_notes, channel: int, pitch: int, tick: int) -> None:
    pending = open_notes.get((channel, pitch))
    if pending:
        raw = pending.pop(0)
        raw.off_tick = max(tick, raw.on_tick)


def _bar_layout(time_sigs: list[tuple[int, int, int]], tpq: int, extent_steps: int):
    """Derive the per-bar time-signature list covering ``extent_steps``.

    Signature changes take effect at the first bar boundary at or after the
    event tick.
    """
    sigs = sorted(time_sigs)
    st = _step_ticks(tpq)
    bars: list[tuple[int, int]] = []
    pos_steps = 0
    current = (4, 4)
    idx = 0
    while pos_steps < extent_steps:
        pos_ticks = pos_steps * st
        while idx < len(sigs) and Fraction(sigs[idx][0]) <= pos_ticks:
            current = (sigs[idx][1], sigs[idx][2])
            idx += 1
        length = bar_steps(*current)
        if length > MAX_BAR_STEPS:
            raise UnsupportedMeterError(current[0], current[1], len(bars))
        bars.append(current)
        pos_steps += length
    return bars


def parse_midi(data: bytes, expressive: bool = False) -> Piece:
    """Parse an SMF byte stream into a quantized :class:`Piece`.

    One output track per (MIDI track chunk, program) pair; channel 10 maps to
    the DRUM program.  When ``expressive`` is off, velocities are normalized
    to 100 and microtiming is discarded.
    """
    tpq, chunks = _parse_chunks(data)
    raw_notes: list[_RawNote] = []
    time_sigs: list[tuple[int, int, int]] = []
    programs_seen: set[tuple[int, int]] = set()
    for i, chunk in enumerate(chunks):
        _parse_track_chunk(chunk, i, raw_notes, time_sigs, programs_seen)

    # quantize
    quantized: list[tuple[tuple[int, int], int, Note]] = []  # (group key, gstep, note)
    extent = 0
    for raw in raw_notes:
        q = quantize_onset(raw.on_tick, tpq)
        duration = _quantize_duration(raw.off_tick - raw.on_tick, tpq)
        note = Note(
            onset=q.step,  # rewritten to bar-relative below
            pitch=raw.pitch,
            duration=duration,
            velocity=raw.velocity if expressive else DEFAULT_VELOCITY,
            micro=q.micro if expressive else 0,
        )
        quantized.append(((raw.track_chunk, raw.program), q.step, note))
        extent = max(extent, q.step + 1)

    if quantized:
        sig_list = _bar_layout(time_sigs, tpq, extent)
    else:
        sig_list = []
    offsets = []
    pos = 0
    for sig in sig_list:
        offsets.append(pos)
        pos += bar_steps(*sig)

    groups: dict[tuple[int, int], list[tuple[int, Note]]] = {}
    for key, gstep, note in quantized:
        groups.setdefault(key, []).append((gstep, note))
    for key in programs_seen:
        drum_key = (key[0], key[1])
        groups.setdefault(drum_key, [])
    if not groups:
        raise MidiParseError("no tracks with notes or program changes", len(data))

    tracks = []
    for key in sorted(groups, key=lambda k: (k[0], k[1] if k[1] != DRUM else 128)):
        bar_notes: list[list[Note]] = [[] for _ in sig_list]
        for gstep, note in groups[key]:
            bar_idx = _bar_index(offsets, sig_list, gstep)
            local = gstep - offsets[bar_idx]
            merged = _merge_note(bar_notes[bar_idx], note, local)
            if merged is not None:
                bar_notes[bar_idx].append(merged)
        bars = tuple(
            Bar(numerator=sig[0], denominator=sig[1], notes=tuple(ns))
            for sig, ns in zip(sig_list, bar_notes)
        )
        tracks.append(Track(program=key[1], bars=bars))
    return Piece(tracks=tuple(tracks), ticks_per_quarter=tpq)


def _merge_note(existing: list[Note], note: Note, local_onset: int) -> Optional[Note]:
    from dataclasses import replace

    candidate = replace(note, onset=local_onset)
    for other in existing:
        if (other.onset, other.pitch) == (candidate.onset, candidate.pitch):
            return None  # duplicate (onset, pitch) after quantization: keep first
    return candidate


def _bar_index(offsets: list[int], sigs, gstep: int) -> int:
    import bisect

    idx = bisect.bisect_right(offsets, gstep) - 1
    return max(0, idx)


# ---------------------------------------------------------------------------
# Writing


def _varlen(value: int) -> bytes:
    out = bytearray([value & 0x7F])
    value >>= 7
    while value:
        out.insert(0, (value & 0x7F) | 0x80)
        value >>= 7
    return bytes(out)


def _track_chunk(events: list[tuple[int, bytes]]) -> bytes:
    events.sort(key=lambda e: e[0])
    body = bytearray()
    last = 0
    for tick, payload in events:
        body += _varlen(tick - last) + payload
        last = tick
    body += _varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(piece: Piece, expressive: bool = False) -> bytes:
    """Emit an SMF type-1 byte stream for a piece.

    Drum tracks go to channel 10; microtiming shifts note-on ticks when
    ``expressive`` is set.
    """
    tpq = piece.ticks_per_quarter
    st = _step_ticks(tpq)

    meta_events: list[tuple[int, bytes]] = []
    pos = 0
    last_sig = None
    if piece.tracks and piece.tracks[0].bars:
        for bar in piece.tracks[0].bars:
            sig = (bar.numerator, bar.denominator)
            if sig != last_sig:
                denom_pow = bar.denominator.bit_length() - 1
                meta_events.append(
                    (
                        int(pos * st),
                        bytes([0xFF, 0x58, 0x04, bar.numerator, denom_pow, 24, 8]),
                    )
                )
                last_sig = sig
            pos += bar.length
    # default tempo 120 bpm
    meta_events.append((0, b"\xff\x51\x03" + struct.pack(">I", 500000)[1:]))
    chunks = [_track_chunk(meta_events)]

    next_channel = 0
    for track in piece.tracks:
        if track.is_drum:
            channel = DRUM_CHANNEL
        else:
            channel = next_channel
            next_channel += 1
            if next_channel == DRUM_CHANNEL:
                next_channel += 1
            if next_channel > 15:
                next_channel = 0
        events: list[tuple[int, bytes]] = []
        program = 0 if track.is_drum else track.program
        events.append((0, bytes([0xC0 | channel, program])))
        for gstep, note in track.global_notes():
            on = gstep * st
            if expressive and note.micro:
                on += Fraction(note.micro, MICRO_UNITS_PER_STEP) * st
            on = max(Fraction(0), on)
            # The off tick rides on the same micro shift so the on/off span
            # still quantizes back to the original duration.
            on_tick = int((on + Fraction(1, 2)).__floor__())
            off_tick = int((on + note.duration * st + Fraction(1, 2)).__floor__())
            velocity = note.velocity if expressive else DEFAULT_VELOCITY
            events.append((on_tick, bytes([0x90 | channel, note.pitch, velocity])))
            events.append((off_tick, bytes([0x80 | channel, note.pitch, 0])))
        chunks.append(_track_chunk(events))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), tpq)
    return header + b"".join(chunks)
