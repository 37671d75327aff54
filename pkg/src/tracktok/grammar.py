"""Deterministic automaton over token sequences.

``GrammarState.valid_next`` yields the boolean mask of tokens that keep the
sequence decodable (and, when a hard polyphony cap is set, keep every step
of the decoded output at or below the cap).  ``step`` advances the state.
The state is a pure function of the consumed prefix plus its configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tokenizer import BARFILL, MULTITRACK, TokenSeq
from .vocab import TokenVocab


class GrammarError(ValueError):
    """A token was applied that the grammar does not admit."""


@dataclass
class _FillSlot:
    bar_index: int
    bar_length: int
    # notes from earlier bars of the same track sustaining into this bar,
    # as (start, end) steps relative to the bar start (start may be negative)
    carry: list[tuple[int, int]]


# phases
P_START = "start"
P_BETWEEN_TRACKS = "between-tracks"
P_INSTRUMENT = "instrument"
P_AFTER_INSTRUMENT = "after-instrument"
P_DENSITY = "density"
P_MIN_POLY = "min-poly"
P_MAX_POLY = "max-poly"
P_MIN_DUR = "min-dur"
P_MAX_DUR = "max-dur"
P_BAR_PENDING = "bar-pending"
P_IN_BAR = "in-bar"
P_AFTER_FILL_IN = "after-fill-in"
P_VELOCITY = "velocity"
P_DURATION = "duration"
P_DONE = "done"


class GrammarState:
    """Replayable decoding state for one sequence.

    ``bar_lengths`` fixes the per-bar step counts of the segment (equal for
    every track); tracks must emit exactly that many bars.
    """

    def __init__(
        self,
        vocab: TokenVocab,
        mode: str = MULTITRACK,
        expressive: bool = False,
        with_controls: bool = False,
        bar_lengths: tuple[int, ...] = (48,) * 8,
        l_poly: Optional[int] = None,
    ):
        if mode not in (MULTITRACK, BARFILL):
            raise ValueError(f"unknown mode {mode!r}")
        if not bar_lengths:
            raise ValueError("bar_lengths must be non-empty")
        self.vocab = vocab
        self.mode = mode
        self.expressive = expressive
        self.with_controls = with_controls
        self.bar_lengths = tuple(bar_lengths)
        self.l_poly = l_poly

        self.phase = P_START
        self.tracks_done = 0
        self.bars_done = 0
        self.fills_done = 0
        self.fill_slots: list[_FillSlot] = []
        self.in_fill_block = False
        # current-track ledger: (start, end) global steps within the track
        self.ledger: list[tuple[int, int]] = []
        self.bar_offset = 0  # global start step of the current bar
        self.onset = -1
        self.group_pitch = -1  # last pitch emitted at the current onset
        self.note_required = False
        self.micro_pending: Optional[object] = None  # None | "neg" | int
        self.pending_pitch = -1
        self.min_poly_value = 1
        self.min_dur_value = 0
        self.track_has_bars = False

    # -- classification helpers ----------------------------------------

    @classmethod
    def for_seq(cls, seq: TokenSeq, l_poly: Optional[int] = None) -> "GrammarState":
        """State configured to accept ``seq``'s representation."""
        from .score import bar_steps

        lengths = tuple(bar_steps(n, d) for n, d in seq.signatures) or (48,)
        return cls(
            vocab=seq.vocab,
            mode=seq.mode,
            expressive=seq.expressive,
            with_controls=seq.with_controls,
            bar_lengths=lengths,
            l_poly=l_poly,
        )

    @property
    def n_bars(self) -> int:
        return len(self.bar_lengths)

    @property
    def done(self) -> bool:
        return self.phase == P_DONE

    def pending_fills(self) -> int:
        return len(self.fill_slots) - self.fills_done

    def _bar_length(self) -> int:
        if self.in_fill_block:
            return self.fill_slots[self.fills_done].bar_length
        return self.bar_lengths[self.bars_done]

    def _sounding(self, step: int) -> int:
        """Notes of the current context sounding at a bar-relative step."""
        if self.in_fill_block:
            slot = self.fill_slots[self.fills_done]
            base = [(s, e) for s, e in slot.carry]
            own = self.ledger
            return sum(1 for s, e in base + own if s <= step < e)
        g = self.bar_offset + step
        return sum(1 for s, e in self.ledger if s <= g < e)

    def _capacity_at(self, step: int) -> bool:
        if self.l_poly is None:
            return True
        return self._sounding(step) < self.l_poly

    def _note_admissible(self, min_pitch_exclusive: int) -> bool:
        return min_pitch_exclusive < 127 and self._capacity_at(self.onset)

    # -- mask -----------------------------------------------------------

    def valid_next(self) -> np.ndarray:
        """Boolean mask over the vocabulary of admissible next tokens."""
        v = self.vocab
        mask = np.zeros(v.size, dtype=bool)
        phase = self.phase

        if phase == P_START:
            mask[v.START if self.mode == MULTITRACK else v.START_FILL] = True
        elif phase == P_BETWEEN_TRACKS:
            if self.fills_done == 0:
                mask[v.TRACK_START] = True
            if self.mode == BARFILL and self.tracks_done > 0 and self.pending_fills():
                mask[v.FILL_START] = True
        elif phase == P_INSTRUMENT:
            mask[v.instrument.start : v.instrument.start + v.instrument.count] = True
            mask[v.instrument_drum.start] = True
        elif phase == P_AFTER_INSTRUMENT:
            if v.style.count:
                mask[v.style.start : v.style.start + v.style.count] = True
            if self.with_controls:
                mask[v.density.start : v.density.start + v.density.count] = True
            else:
                mask[v.BAR_START] = True
        elif phase == P_DENSITY:
            mask[v.density.start : v.density.start + v.density.count] = True
        elif phase == P_MIN_POLY:
            mask[v.min_poly.start : v.min_poly.start + v.min_poly.count] = True
        elif phase == P_MAX_POLY:
            lo = v.max_poly.id_for(self.min_poly_value)
            mask[lo : v.max_poly.start + v.max_poly.count] = True
        elif phase == P_MIN_DUR:
            mask[v.min_dur.start : v.min_dur.start + v.min_dur.count] = True
        elif phase == P_MAX_DUR:
            lo = v.max_dur.id_for(self.min_dur_value)
            mask[lo : v.max_dur.start + v.max_dur.count] = True
        elif phase == P_BAR_PENDING:
            if self.bars_done < self.n_bars:
                mask[v.BAR_START] = True
            else:
                mask[v.TRACK_END] = True
        elif phase == P_AFTER_FILL_IN:
            mask[v.BAR_END] = True
        elif phase == P_VELOCITY:
            # velocity 0 is not a playable note
            mask[v.velocity.id_for(1) : v.velocity.start + v.velocity.count] = True
        elif phase == P_DURATION:
            mask[v.duration.start : v.duration.start + v.duration.count] = True
        elif phase == P_IN_BAR:
            self._in_bar_mask(mask)
        elif phase == P_DONE:
            pass
        else:  # pragma: no cover
            raise AssertionError(f"unhandled phase {phase}")
        return mask

    def _in_bar_mask(self, mask: np.ndarray) -> None:
        v = self.vocab
        bar_len = self._bar_length()

        if self.micro_pending == "neg":
            mask[v.delta.start : v.delta.start + v.delta.count] = True
            return
        if isinstance(self.micro_pending, int):
            self._mask_note_on(mask)
            return

        if not self.note_required:
            # bar may close: every started note is complete here
            end = v.FILL_END if self.in_fill_block else v.BAR_END
            mask[end] = True
            if (
                self.mode == BARFILL
                and not self.in_fill_block
                and self.onset < 0
            ):
                mask[v.FILL_IN] = True
            # later onsets with polyphony headroom
            for t in range(self.onset + 1, bar_len):
                if self._capacity_at(t):
                    mask[v.time_position.id_for(t)] = True
        if self.onset >= 0 and self._note_admissible(self.group_pitch):
            self._mask_note_on(mask)
            if self.expressive:
                mask[v.delta_neg.start] = True
                # positive microtiming stops at 79 (half-step tie rounds later)
                mask[v.delta.id_for(1) : v.delta.id_for(79) + 1] = True

    def _mask_note_on(self, mask: np.ndarray) -> None:
        v = self.vocab
        lo = self.group_pitch + 1
        if lo <= 127 and self._capacity_at(self.onset):
            mask[v.note_on.id_for(lo) : v.note_on.start + v.note_on.count] = True

    # -- transition ------------------------------------------------------

    def step(self, token: int, check: bool = True) -> "GrammarState":
        """Apply one token in place (returns self for chaining).

        ``check=False`` skips admissibility (used when replaying trusted
        encoder output whose pre-existing material may exceed ``l_poly``;
        the cap only constrains newly sampled tokens).
        """
        if check and not self.valid_next()[token]:
            raise GrammarError(
                f"token {self.vocab.name_of(token)} not admissible in phase "
                f"{self.phase}"
            )
        self._apply(token)
        return self

    def _apply(self, token: int) -> None:
        v = self.vocab
        if token == v.START or token == v.START_FILL:
            self.phase = P_BETWEEN_TRACKS
        elif token == v.TRACK_START:
            self.ledger = []
            self.bars_done = 0
            self.bar_offset = 0
            self.phase = P_INSTRUMENT
        elif token in v.instrument or token in v.instrument_drum:
            self.phase = P_AFTER_INSTRUMENT
        elif token in v.style:
            self.phase = P_DENSITY if self.with_controls else P_BAR_PENDING
        elif token in v.density:
            self.phase = P_MIN_POLY
        elif token in v.min_poly:
            self.min_poly_value = v.min_poly.value_of(token)
            self.phase = P_MAX_POLY
        elif token in v.max_poly:
            self.phase = P_MIN_DUR
        elif token in v.min_dur:
            self.min_dur_value = v.min_dur.value_of(token)
            self.phase = P_MAX_DUR
        elif token in v.max_dur:
            self.phase = P_BAR_PENDING
        elif token == v.BAR_START:
            self.onset = -1
            self.group_pitch = -1
            self.note_required = False
            self.micro_pending = None
            self.phase = P_IN_BAR
        elif token == v.FILL_IN:
            slot = _FillSlot(
                bar_index=self.bars_done,
                bar_length=self._bar_length(),
                carry=[
                    (s - self.bar_offset, e - self.bar_offset)
                    for s, e in self.ledger
                    if e > self.bar_offset
                ],
            )
            self.fill_slots.append(slot)
            self.phase = P_AFTER_FILL_IN
        elif token == v.BAR_END:
            self.bar_offset += self.bar_lengths[self.bars_done]
            self.bars_done += 1
            self.phase = P_BAR_PENDING
        elif token == v.TRACK_END:
            self.tracks_done += 1
            self.phase = P_BETWEEN_TRACKS
        elif token == v.FILL_START:
            self.in_fill_block = True
            self.ledger = []
            self.onset = -1
            self.group_pitch = -1
            self.note_required = False
            self.micro_pending = None
            self.phase = P_IN_BAR
        elif token == v.FILL_END:
            self.fills_done += 1
            self.in_fill_block = False
            self.ledger = []
            self.phase = P_DONE if not self.pending_fills() else P_BETWEEN_TRACKS
        elif token in v.time_position:
            self.onset = v.time_position.value_of(token)
            self.group_pitch = -1
            self.note_required = True
            self.micro_pending = None
            self.phase = P_IN_BAR
        elif token in v.delta_neg:
            self.micro_pending = "neg"
            self.phase = P_IN_BAR
        elif token in v.delta:
            value = v.delta.value_of(token)
            self.micro_pending = value if self.micro_pending != "neg" else -value
            self.phase = P_IN_BAR
        elif token in v.note_on:
            self.pending_pitch = v.note_on.value_of(token)
            self.phase = P_VELOCITY if self.expressive else P_DURATION
        elif token in v.velocity:
            self.phase = P_DURATION
        elif token in v.duration:
            duration = v.duration.value_of(token)
            start = self.onset if self.in_fill_block else self.bar_offset + self.onset
            self.ledger.append((start, start + duration))
            self.group_pitch = self.pending_pitch
            self.note_required = False
            self.micro_pending = None
            self.phase = P_IN_BAR
        else:  # pragma: no cover
            raise AssertionError(f"unhandled token {v.name_of(token)}")

    def replay(self, ids, check: bool = True) -> "GrammarState":
        """Step over a whole prefix, raising GrammarError on violations."""
        for token in ids:
            self.step(token, check=check)
        return self
