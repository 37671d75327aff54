"""Originality and attribute-control measurement harnesses."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .controls import DensityModel, duration_level, polyphony_profile
from .predictor import TokenPredictor
from .rolls import CorpusIndex, SearchResult, jaccard, nearest_in_corpus, piano_roll
from .sampler import SampleParams, Sampler, TrackOverride
from .score import Piece, slice_segment

DEFAULT_BINS = tuple(round(0.1 * i, 1) for i in range(11))  # [0, 0.1, ..., 1.0]


def binomial_test(successes: int, trials: int, p0: float = 0.5) -> float:
    """Exact two-sided binomial p-value."""
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    return float(stats.binomtest(successes, trials, p0).pvalue)


def histogram_rows(values: Sequence[float], bins: Sequence[float] = DEFAULT_BINS) -> list[dict]:
    """Bin values into [a, b) ranges (last bin closed) with percentages."""
    edges = list(bins)
    counts = [0] * (len(edges) - 1)
    for v in values:
        for i in range(len(edges) - 1):
            last = i == len(edges) - 2
            if edges[i] <= v < edges[i + 1] or (last and v == edges[i + 1]):
                counts[i] += 1
                break
    total = max(1, len(values))
    return [
        {
            "bin_lo": edges[i],
            "bin_hi": edges[i + 1],
            "count": counts[i],
            "percent": 100.0 * counts[i] / total,
        }
        for i in range(len(edges) - 1)
    ]


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return out.getvalue()


# ---------------------------------------------------------------------------
# Originality


def _pick_segment(
    corpus: Sequence[Piece], rng: np.random.Generator, n_tracks: int, n_bars: int
) -> Piece:
    eligible = [
        p for p in corpus if len(p.tracks) >= n_tracks and p.bar_count >= n_bars
    ]
    if not eligible:
        raise ValueError(f"no corpus piece has {n_tracks} tracks and {n_bars} bars")
    piece = eligible[int(rng.integers(len(eligible)))]
    start = int(rng.integers(piece.bar_count - n_bars + 1))
    tracks = tuple(int(i) for i in rng.permutation(len(piece.tracks))[:n_tracks])
    return slice_segment(piece, start, n_bars, tracks)


@dataclass(frozen=True)
class InfillTrial:
    track: int
    first_bar: int
    n_bars: int
    jaccard: float


def infilling_originality_experiment(
    corpus: Sequence[Piece],
    sampler: Sampler,
    n_bars: int,
    trials: int,
    params: SampleParams = SampleParams(),
    bins: Sequence[float] = DEFAULT_BINS,
) -> tuple[list[InfillTrial], list[dict]]:
    """Blank n consecutive bars of one track of a 4-track 8-bar segment,
    infill, and record the original-vs-generated Jaccard index."""
    rng = np.random.default_rng(params.seed)
    results: list[InfillTrial] = []
    for i in range(trials):
        segment = _pick_segment(corpus, rng, n_tracks=4, n_bars=8)
        track = int(rng.integers(len(segment.tracks)))
        first = int(rng.integers(segment.bar_count - n_bars + 1))
        cells = [(track, first + j) for j in range(n_bars)]
        trial_params = SampleParams(
            **{**params.__dict__, "seed": int(rng.integers(2**31))}
        )
        generated = sampler.infill_bars(segment, cells, trial_params)
        old = np.concatenate(
            [piano_roll(segment.tracks[track], b, 1) for _, b in cells]
        )
        new = np.concatenate(
            [piano_roll(generated.tracks[track], b, 1) for _, b in cells]
        )
        results.append(
            InfillTrial(track=track, first_bar=first, n_bars=n_bars, jaccard=jaccard(old, new))
        )
    rows = histogram_rows([t.jaccard for t in results], bins)
    for row in rows:
        row["n_bars"] = n_bars
    return results, rows


def corpus_originality_experiment(
    corpus: Sequence[Piece],
    index: CorpusIndex,
    sampler: Sampler,
    n_bars: int,
    trials: int,
    params: SampleParams = SampleParams(),
    prefilter: Optional[float] = 0.25,
    bins: Sequence[float] = DEFAULT_BINS,
) -> tuple[list[SearchResult], list[dict]]:
    """Infill as above, then search the training index for near-identical
    material; reports per-trial worst-bar minimum Hamming distances."""
    rng = np.random.default_rng(params.seed)
    results: list[SearchResult] = []
    for _ in range(trials):
        segment = _pick_segment(corpus, rng, n_tracks=4, n_bars=8)
        track = int(rng.integers(len(segment.tracks)))
        first = int(rng.integers(segment.bar_count - n_bars + 1))
        cells = [(track, first + j) for j in range(n_bars)]
        trial_params = SampleParams(
            **{**params.__dict__, "seed": int(rng.integers(2**31))}
        )
        generated = sampler.infill_bars(segment, cells, trial_params)
        rolls = [piano_roll(generated.tracks[track], b, 1) for _, b in cells]
        results.append(nearest_in_corpus(rolls, index, prefilter=prefilter))
    finite = [r.worst for r in results if math.isfinite(r.worst)]
    rows = histogram_rows(finite, bins)
    for row in rows:
        row["n_bars"] = n_bars
    return results, rows


# ---------------------------------------------------------------------------
# Attribute controls

PredictorFactory = Callable[[TrackOverride, int], TokenPredictor]


def attribute_control_experiment(
    control: str,
    sampler: Sampler,
    trials: int,
    params: SampleParams = SampleParams(),
    predictor_for: Optional[PredictorFactory] = None,
) -> list[dict]:
    """Generate 8-bar tracks from scratch under a forced control and measure
    how well the output honors it.

    ``density`` rows carry the absolute requested-vs-measured level
    difference; ``duration``/``polyphony`` rows the percentage of generated
    values inside the requested range.
    """
    if control not in ("density", "duration", "polyphony"):
        raise ValueError(f"unknown control {control!r}")
    if sampler.density is None:
        raise ValueError("attribute experiments need a fitted DensityModel")
    rng = np.random.default_rng(params.seed)
    rows = []
    for i in range(trials):
        program = int(rng.integers(0, 128))
        if control == "density":
            requested = int(rng.integers(0, 10))
            override = TrackOverride(program=program, density=requested)
        elif control == "duration":
            lo = int(rng.integers(0, 5))
            hi = int(rng.integers(lo, 5))
            requested = (lo, hi)
            override = TrackOverride(program=program, dur_range=requested)
        else:
            lo = int(rng.integers(1, 9))
            hi = int(rng.integers(lo, 9))
            requested = (lo, hi)
            override = TrackOverride(program=program, poly_range=requested)

        worker = sampler
        if predictor_for is not None:
            worker = Sampler(
                sampler.tokenizer, predictor_for(override, program), sampler.density
            )
        trial_params = SampleParams(
            **{**params.__dict__, "seed": int(rng.integers(2**31)), "n_bars": 8}
        )
        piece = worker.generate_tracks(None, 1, trial_params, overrides=[override])
        track = piece.tracks[-1]

        if control == "density":
            measured = sampler.density.level(track)
            rows.append(
                {
                    "trial": i,
                    "program": program,
                    "requested": requested,
                    "measured": measured,
                    "abs_diff": abs(requested - measured),
                }
            )
        else:
            if control == "duration":
                values = [duration_level(n.duration) for _, n in track.global_notes()]
            else:
                values = [c for c in polyphony_profile(track) if c > 0]
            lo, hi = requested
            inside = sum(1 for v in values if lo <= v <= hi)
            pct = 100.0 * inside / len(values) if values else 0.0
            rows.append(
                {
                    "trial": i,
                    "program": program,
                    "range_lo": lo,
                    "range_hi": hi,
                    "n_values": len(values),
                    "percent_in_range": pct,
                }
            )
    return rows
