from __future__ import annotations

import math

import numpy as np
import pytest

from tracktok import (
    Bar,
    ControlTable,
    DensityModel,
    NoContentError,
    Note,
    Piece,
    Track,
    control_spec,
    duration_level,
    duration_range,
    polyphony_range,
    with_controls,
)
from tracktok.controls import nearest_rank, polyphony_profile
from tracktok.demo import random_piece
from tracktok.score import polyphony_at


def track_of_counts(program: int, counts: list[int]) -> Track:
    """One bar per requested onset count, notes spread over distinct onsets."""
    bars = []
    for c in counts:
        notes = tuple(Note(onset=i % 48, pitch=30 + i // 48, duration=1) for i in range(c))
        bars.append(Bar(notes=notes))
    return Track(program=program, bars=tuple(bars))


class TestNearestRank:
    def test_definition(self):
        values = list(range(1, 101))
        for pct in range(10, 100, 10):
            assert nearest_rank(values, pct) == pct

    def test_matches_ceil_formula_on_random_multisets(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            values = [float(x) for x in rng.integers(0, 20, size=n)]
            for pct in (15, 50, 85):
                rank = max(1, math.ceil(pct / 100 * n))
                assert nearest_rank(values, pct) == sorted(values)[rank - 1]

    def test_empty(self):
        with pytest.raises(ValueError):
            nearest_rank([], 50)


class TestDurationLevel:
    def test_bin_edges(self):
        # steps / 48 of a whole note: [1/32,1/16) [1/16,1/8) [1/8,1/4)
        # [1/4,1/2) [1/2,1/1) with clamping on both sides
        assert duration_level(3) == 1   # exactly one sixteenth
        assert duration_level(24) == 4  # exactly one half
        assert duration_level(96) == 4  # clamped above

    def test_exhaustive_map_against_fraction_oracle(self):
        from fractions import Fraction

        edges = [Fraction(1, 32), Fraction(1, 16), Fraction(1, 8),
                 Fraction(1, 4), Fraction(1, 2)]
        for duration in range(1, 97):
            d = Fraction(duration, 48)
            level = 0
            for i, edge in enumerate(edges):
                if d >= edge:
                    level = i
            # durations below 1/32 clamp to 0; at/above 1 clamp to 4
            level = min(level, 4)
            assert duration_level(duration) == level

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            duration_level(0)
        with pytest.raises(ValueError):
            duration_level(97)


class TestDurationRange:
    def test_uniform_levels(self):
        t = Track(0, bars=(Bar(notes=(Note(0, 60, 12), Note(4, 62, 12))),))
        assert duration_range(t) == (3, 3)

    def test_documented_multiset(self):
        # ten notes: eight at level 0, two at level 4
        notes = tuple(Note(onset=i, pitch=40 + i, duration=1) for i in range(8))
        notes += (Note(20, 60, 24), Note(21, 61, 24))
        t = Track(0, bars=(Bar(notes=notes),))
        assert duration_range(t) == (0, 4)

    def test_single_note(self):
        t = Track(0, bars=(Bar(notes=(Note(0, 60, 12),)),))
        assert duration_range(t) == (3, 3)

    def test_empty(self):
        with pytest.raises(NoContentError):
            duration_range(Track(0, bars=(Bar(),)))

    def test_lo_le_hi_random(self):
        for seed in range(30):
            t = random_piece(seed=seed, n_tracks=1, n_bars=2, with_drums=False).tracks[0]
            if t.note_count:
                lo, hi = duration_range(t)
                assert lo <= hi


class TestPolyphonyRange:
    def test_monophonic(self):
        t = Track(0, bars=(Bar(notes=(Note(0, 60, 4), Note(4, 62, 4))),))
        assert polyphony_range(t) == (1, 1)

    def test_sustained_chords(self):
        t = Track(0, bars=(Bar(notes=(Note(0, 60, 24), Note(0, 64, 24), Note(0, 67, 24))),))
        assert polyphony_range(t) == (3, 3)

    def test_profile_matches_polyphony_at(self):
        for seed in range(20):
            t = random_piece(seed=seed, n_tracks=1, n_bars=2, with_drums=False).tracks[0]
            profile = polyphony_profile(t)
            for step, count in enumerate(profile):
                assert count == polyphony_at(t, step)

    def test_against_percentile_oracle(self):
        for seed in range(30):
            t = random_piece(seed=seed, n_tracks=1, n_bars=2, with_drums=False).tracks[0]
            if not t.note_count:
                continue
            sounding = sorted(c for c in polyphony_profile(t) if c > 0)
            lo = sounding[max(1, math.ceil(0.15 * len(sounding))) - 1]
            hi = sounding[max(1, math.ceil(0.85 * len(sounding))) - 1]
            assert polyphony_range(t) == (min(lo, 16), min(hi, 16))

    def test_empty(self):
        with pytest.raises(NoContentError):
            polyphony_range(Track(0, bars=(Bar(),)))


class TestDensityModel:
    def test_uniform_counts_give_decile_boundaries(self):
        # instrument 0 bars with counts 1..100, one bar each
        track = track_of_counts(0, list(range(1, 101)))
        piece = Piece(tracks=(track,))
        model = DensityModel().fit([piece])
        assert model.table_.boundaries[0] == tuple(range(10, 100, 10))

    def test_constant_distribution(self):
        piece = Piece(tracks=(track_of_counts(3, [5] * 20),))
        model = DensityModel().fit([piece])
        assert model.table_.boundaries[3] == (5,) * 9
        # a mean of exactly 5 sits after every equal boundary: level 9
        assert model.level(track_of_counts(3, [5])) == 9
        # anything below the boundary is level 0
        assert model.level(track_of_counts(3, [4])) == 0

    def test_single_bar_corpus(self):
        piece = Piece(tracks=(track_of_counts(7, [4]),))
        model = DensityModel().fit([piece])
        assert model.table_.boundaries[7] == (4,) * 9

    def test_unseen_program_uses_fallback(self):
        piece = Piece(tracks=(track_of_counts(0, list(range(1, 101))),))
        model = DensityModel().fit([piece])
        assert model.table_.for_program(99) == model.table_.fallback

    def test_level_against_region_scan_oracle(self, density_model, corpus):
        for piece in corpus[:10]:
            for track in piece.tracks:
                mean = track.note_count / len(track.bars)
                bounds = density_model.table_.for_program(track.program)
                level = 0
                for b in bounds:
                    if mean >= b:
                        level += 1
                assert density_model.level(track) == level

    def test_level_invariant_under_bar_permutation(self, density_model):
        t = track_of_counts(0, [1, 5, 9, 2])
        reversed_t = track_of_counts(0, [2, 9, 5, 1])
        assert density_model.level(t) == density_model.level(reversed_t)

    def test_boundaries_non_decreasing(self, density_model):
        for bounds in list(density_model.table_.boundaries.values()) + [
            density_model.table_.fallback
        ]:
            assert list(bounds) == sorted(bounds)

    def test_table_json_round_trip(self, density_model):
        text = density_model.table.to_json()
        again = ControlTable.from_json(text)
        assert again == density_model.table_
        assert again.to_json() == text  # byte-stable

    def test_unfitted(self):
        with pytest.raises(AttributeError):
            DensityModel().table


class TestControlSpec:
    def test_empty_track_defaults(self, density_model):
        spec = control_spec(Track(0, bars=(Bar(),)), density_model)
        assert spec.poly_range == (1, 1) and spec.dur_range == (0, 0)

    def test_with_controls_attaches_every_track(self, density_model, corpus):
        p = with_controls(corpus[0], density_model)
        assert all(t.controls is not None for t in p.tracks)

    def test_oracle_1000_random_tracks(self, density_model):
        """Brute-force oracle over density/duration/polyphony on 1,000 tracks."""
        checked = 0
        seed = 0
        while checked < 1000:
            piece = random_piece(seed=50_000 + seed, n_tracks=4, n_bars=4)
            seed += 1
            for track in piece.tracks:
                spec = control_spec(track, density_model)
                mean = track.note_count / len(track.bars)
                bounds = density_model.table_.for_program(track.program)
                assert spec.density == sum(1 for b in bounds if mean >= b)
                if track.note_count:
                    levels = sorted(
                        duration_level(n.duration) for _, n in track.global_notes()
                    )
                    lo = levels[max(1, math.ceil(0.15 * len(levels))) - 1]
                    hi = levels[max(1, math.ceil(0.85 * len(levels))) - 1]
                    assert spec.dur_range == (lo, hi)
                    sounding = sorted(c for c in polyphony_profile(track) if c > 0)
                    plo = sounding[max(1, math.ceil(0.15 * len(sounding))) - 1]
                    phi = sounding[max(1, math.ceil(0.85 * len(sounding))) - 1]
                    assert spec.poly_range == (min(plo, 16), min(phi, 16))
                checked += 1
