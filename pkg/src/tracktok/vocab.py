"""Token vocabulary: named families mapped to contiguous id ranges."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator

SPECIALS = (
    "START",
    "START_FILL",
    "TRACK_START",
    "TRACK_END",
    "BAR_START",
    "BAR_END",
    "FILL_IN",
    "FILL_START",
    "FILL_END",
)


@dataclass(frozen=True)
class Family:
    name: str
    start: int
    count: int
    value_offset: int = 0  # token value of the first id in the family

    def id_for(self, value: int) -> int:
        index = value - self.value_offset
        if not 0 <= index < self.count:
            raise ValueError(f"{self.name} value {value} outside range")
        return self.start + index

    def value_of(self, token_id: int) -> int:
        return token_id - self.start + self.value_offset

    def __contains__(self, token_id: int) -> bool:
        return self.start <= token_id < self.start + self.count


class TokenVocab:
    """Bijective token/id mapping for the multi-track tokenization.

    Family layout is fixed for a given configuration; ``style_labels``
    appends one STYLE token per label (none by default).
    """

    def __init__(self, style_labels: tuple[str, ...] = ()):
        self.style_labels = tuple(style_labels)
        cursor = 0
        self._specials: dict[str, int] = {}
        for name in SPECIALS:
            self._specials[name] = cursor
            cursor += 1

        def fam(name: str, count: int, value_offset: int = 0) -> Family:
            nonlocal cursor
            f = Family(name, cursor, count, value_offset)
            cursor += count
            return f

        self.instrument = fam("INSTRUMENT", 128)
        self.instrument_drum = fam("INSTRUMENT_DRUM", 1)
        self.note_on = fam("NOTE_ON", 128)
        self.time_position = fam("TIME_POSITION", 96)
        self.duration = fam("DURATION", 96, value_offset=1)
        self.density = fam("DENSITY", 10)
        self.min_poly = fam("MIN_POLY", 16, value_offset=1)
        self.max_poly = fam("MAX_POLY", 16, value_offset=1)
        self.min_dur = fam("MIN_DUR", 5)
        self.max_dur = fam("MAX_DUR", 5)
        self.velocity = fam("VELOCITY", 128)
        self.delta = fam("DELTA", 80, value_offset=1)
        self.delta_neg = fam("DELTA_NEG", 1)
        self.style = fam("STYLE", len(self.style_labels))
        self.size = cursor

        self._families = [
            self.instrument,
            self.instrument_drum,
            self.note_on,
            self.time_position,
            self.duration,
            self.density,
            self.min_poly,
            self.max_poly,
            self.min_dur,
            self.max_dur,
            self.velocity,
            self.delta,
            self.delta_neg,
            self.style,
        ]

    # -- specials ----------------------------------------------------------
    def special(self, name: str) -> int:
        return self._specials[name]

    @property
    def START(self) -> int:
        return self._specials["START"]

    @property
    def START_FILL(self) -> int:
        return self._specials["START_FILL"]

    @property
    def TRACK_START(self) -> int:
        return self._specials["TRACK_START"]

    @property
    def TRACK_END(self) -> int:
        return self._specials["TRACK_END"]

    @property
    def BAR_START(self) -> int:
        return self._specials["BAR_START"]

    @property
    def BAR_END(self) -> int:
        return self._specials["BAR_END"]

    @property
    def FILL_IN(self) -> int:
        return self._specials["FILL_IN"]

    @property
    def FILL_START(self) -> int:
        return self._specials["FILL_START"]

    @property
    def FILL_END(self) -> int:
        return self._specials["FILL_END"]

    # -- instruments -------------------------------------------------------
    def instrument_id(self, program: int) -> int:
        if program == -1:  # DRUM sentinel from the score model
            return self.instrument_drum.start
        return self.instrument.id_for(program)

    def instrument_program(self, token_id: int) -> int:
        if token_id in self.instrument_drum:
            return -1
        return self.instrument.value_of(token_id)

    # -- inspection --------------------------------------------------------
    def name_of(self, token_id: int) -> str:
        """Human-readable token name, e.g. ``NOTE_ON=60``."""
        for name, tid in self._specials.items():
            if tid == token_id:
                return name
        for family in self._families:
            if token_id in family:
                if family.count == 1:
                    return family.name
                if family is self.style:
                    return f"STYLE={self.style_labels[token_id - family.start]}"
                return f"{family.name}={family.value_of(token_id)}"
        raise ValueError(f"token id {token_id} outside vocabulary of {self.size}")

    def families(self) -> Iterator[Family]:
        yield from self._families

    # -- export ------------------------------------------------------------
    def export(self) -> dict:
        """JSON-ready id table for aligning external predictors."""
        entries = [
            {"family": name, "start": tid, "count": 1} for name, tid in self._specials.items()
        ]
        for family in self._families:
            entries.append(
                {
                    "family": family.name,
                    "start": family.start,
                    "count": family.count,
                    "value_offset": family.value_offset,
                }
            )
        doc = {
            "version": 1,
            "size": self.size,
            "style_labels": list(self.style_labels),
            "families": entries,
        }
        doc["hash"] = self.hash()
        return doc

    def hash(self) -> str:
        payload = json.dumps(
            {"version": 1, "size": self.size, "style_labels": list(self.style_labels)},
            sort_keys=True,
        ).encode()
        return hashlib.sha256(payload).hexdigest()
