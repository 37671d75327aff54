from __future__ import annotations

import numpy as np
import pytest

from tracktok import (
    DRUM,
    Bar,
    Note,
    Piece,
    RangeError,
    Track,
    slice_segment,
    transpose,
)
from tracktok.demo import random_piece
from tracktok.score import bar_steps, polyphony_at


def simple_piece():
    melody = Track(
        program=0,
        bars=(
            Bar(notes=(Note(0, 60, 4), Note(2, 64, 4), Note(4, 67, 2))),
            Bar(notes=(Note(0, 62, 12),)),
        ),
    )
    drums = Track(
        program=DRUM,
        bars=(Bar(notes=(Note(0, 36, 3), Note(12, 38, 3))), Bar()),
    )
    return Piece(tracks=(melody, drums))


class TestNote:
    def test_valid_fields(self):
        n = Note(onset=3, pitch=60, duration=12, velocity=90, micro=-40)
        assert (n.onset, n.pitch, n.duration, n.velocity, n.micro) == (3, 60, 12, 90, -40)

    def test_defaults(self):
        n = Note(0, 60, 1)
        assert n.velocity == 100 and n.micro == 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"pitch": 128},
            {"pitch": -1},
            {"duration": 0},
            {"duration": 97},
            {"velocity": 0},
            {"velocity": 128},
            {"micro": -81},
            {"micro": 80},
            {"onset": -1},
        ],
    )
    def test_out_of_range(self, kwargs):
        base = {"onset": 0, "pitch": 60, "duration": 1}
        base.update(kwargs)
        with pytest.raises(RangeError):
            Note(**base)


class TestBar:
    def test_bar_steps(self):
        assert bar_steps(4, 4) == 48
        assert bar_steps(3, 4) == 36
        assert bar_steps(6, 8) == 36
        assert bar_steps(7, 8) == 42
        assert bar_steps(2, 2) == 48

    def test_bar_steps_off_grid(self):
        with pytest.raises(RangeError):
            bar_steps(1, 7)

    def test_too_long_bar(self):
        with pytest.raises(RangeError):
            Bar(numerator=9, denominator=4)

    def test_notes_sorted(self):
        bar = Bar(notes=(Note(4, 60, 1), Note(0, 72, 1), Note(0, 60, 1)))
        assert [(n.onset, n.pitch) for n in bar.notes] == [(0, 60), (0, 72), (4, 60)]

    def test_duplicate_rejected(self):
        with pytest.raises(RangeError):
            Bar(notes=(Note(0, 60, 1), Note(0, 60, 4)))

    def test_onset_outside_bar(self):
        with pytest.raises(RangeError):
            Bar(numerator=3, denominator=4, notes=(Note(36, 60, 1),))

    def test_duration_may_cross_barline(self):
        bar = Bar(notes=(Note(47, 60, 96),))
        assert bar.notes[0].duration == 96


class TestPiece:
    def test_bar_alignment_enforced(self):
        with pytest.raises(RangeError):
            Piece(tracks=(Track(0, bars=(Bar(),)), Track(1, bars=(Bar(), Bar()))))
        with pytest.raises(RangeError):
            Piece(
                tracks=(
                    Track(0, bars=(Bar(numerator=3),)),
                    Track(1, bars=(Bar(numerator=4),)),
                )
            )

    def test_empty_piece_rejected(self):
        with pytest.raises(RangeError):
            Piece(tracks=())

    def test_track_accounting(self):
        p = simple_piece()
        assert p.bar_count == 2
        assert p.tracks[0].note_count == 4
        assert p.tracks[0].bar_offsets() == [0, 48]
        assert p.tracks[0].total_steps == 96
        assert list(p.tracks[0].global_notes())[-1] == (48, Note(0, 62, 12))


class TestTranspose:
    def test_identity(self):
        p = simple_piece()
        assert transpose(p, 0) == p

    def test_additive_shift(self):
        p = simple_piece()
        shifted = transpose(p, 5)
        assert shifted.tracks[0].bars[0].notes[0].pitch == 65

    def test_drums_untouched(self):
        p = simple_piece()
        assert transpose(p, -6).tracks[1] == p.tracks[1]

    def test_out_of_range_amount(self):
        with pytest.raises(RangeError):
            transpose(simple_piece(), 6)
        with pytest.raises(RangeError):
            transpose(simple_piece(), -7)

    def test_clamped_notes_dropped(self):
        high = Piece(tracks=(Track(0, bars=(Bar(notes=(Note(0, 125, 1),)),)),))
        assert transpose(high, 5).tracks[0].note_count == 0

    def test_round_trip_without_clamping(self):
        for k in range(-5, 6):
            p = random_piece(seed=11, n_tracks=3, n_bars=4)
            assert transpose(transpose(p, k), -k) == p


class TestSliceSegment:
    def test_full_slice_identity(self):
        p = simple_piece()
        assert slice_segment(p, 0, p.bar_count, range(len(p.tracks))) == p

    def test_counting(self):
        p = random_piece(seed=1, n_tracks=4, n_bars=8)
        s = slice_segment(p, 4, 4, (0, 2))
        assert len(s.tracks) == 2 and s.bar_count == 4
        assert s.tracks[0].bars == p.tracks[0].bars[4:8]
        assert s.tracks[1].bars == p.tracks[2].bars[4:8]

    def test_track_order_preserved(self):
        p = random_piece(seed=1, n_tracks=4, n_bars=8)
        s = slice_segment(p, 0, 8, (3, 1))
        assert s.tracks[0].program == p.tracks[3].program
        assert s.tracks[1].program == p.tracks[1].program

    def test_range_errors(self):
        p = simple_piece()
        with pytest.raises(RangeError):
            slice_segment(p, 1, 2, (0,))
        with pytest.raises(RangeError):
            slice_segment(p, 0, 1, (5,))
        with pytest.raises(RangeError):
            slice_segment(p, 0, 1, ())


class TestPolyphony:
    def test_empty_track(self):
        t = Track(0, bars=(Bar(),))
        assert all(polyphony_at(t, s) == 0 for s in range(48))

    def test_half_open_interval(self):
        t = Track(0, bars=(Bar(notes=(Note(0, 60, 4),)),))
        assert [polyphony_at(t, s) for s in range(5)] == [1, 1, 1, 1, 0]

    def test_against_interval_stabbing_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = random_piece(seed=int(rng.integers(1000)), n_tracks=1, n_bars=2,
                             with_drums=False)
            track = p.tracks[0]
            intervals = [(o, o + n.duration) for o, n in track.global_notes()]
            for step in range(track.total_steps):
                expected = sum(1 for a, b in intervals if a <= step < b)
                assert polyphony_at(track, step) == expected

    def test_durations_sum(self):
        p = random_piece(seed=3, n_tracks=1, n_bars=2, with_drums=False)
        track = p.tracks[0]
        extent = max((o + n.duration for o, n in track.global_notes()), default=0)
        total = sum(polyphony_at(track, s) for s in range(extent))
        assert total == sum(n.duration for _, n in track.global_notes())
