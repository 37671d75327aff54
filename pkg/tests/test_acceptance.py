"""Acceptance gate: one test (and one printed verdict line) per criterion.

Every check here is property-based or runs against an independent oracle;
nothing below depends on a trained neural model.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from scipy import stats

from tracktok import (
    Bar,
    CorpusIndex,
    DensityModel,
    MultiTrackTokenizer,
    Note,
    Piece,
    PipelineParams,
    SampleParams,
    Sampler,
    ScriptedPredictor,
    Track,
    UniformPredictor,
    compress_bar_roll,
    control_spec,
    duration_level,
    hamming,
    jaccard,
    make_training_examples,
    nearest_in_corpus,
    sample_training_example,
    slice_segment,
    with_controls,
)
from tracktok.cli import main as cli_main
from tracktok.controls import polyphony_profile
from tracktok.demo import demo_corpus, random_piece
from tracktok.experiments import attribute_control_experiment, binomial_test
from tracktok.midi_io import quantize_onset
from tracktok.rolls import bar_rolls


def report(name: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{verdict}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


# ---------------------------------------------------------------------------
# 1. Tokenization round-trip


def test_criterion_tokenization_round_trip():
    failures = 0
    rng = np.random.default_rng(0)

    # 100 quantized corpus pieces, both modes
    tok = MultiTrackTokenizer()
    for piece in demo_corpus(100, seed=7):
        if tok.decode(tok.encode(piece)).piece != piece:
            failures += 1
        t = int(rng.integers(len(piece.tracks)))
        b = int(rng.integers(piece.bar_count))
        if tok.decode(tok.encode_infill(piece, [(t, b)])).piece != piece:
            failures += 1

    # 1,000 randomized pieces across mode x expressive combinations
    tok_e = MultiTrackTokenizer(expressive=True)
    for i in range(250):
        for tokenizer, expressive in ((tok, False), (tok_e, True)):
            piece = random_piece(
                seed=20_000 + i,
                n_tracks=int(rng.integers(1, 5)),
                n_bars=int(rng.integers(1, 6)),
                expressive=expressive,
            )
            if tokenizer.decode(tokenizer.encode(piece)).piece != piece:
                failures += 1
            t = int(rng.integers(len(piece.tracks)))
            b = int(rng.integers(piece.bar_count))
            seq = tokenizer.encode_infill(piece, [(t, b)])
            if tokenizer.decode(seq).piece != piece:
                failures += 1
    report("tokenization round-trip", failures == 0, f"{failures} failures")


# ---------------------------------------------------------------------------
# 2. Microtiming fidelity


def test_criterion_microtiming_fidelity():
    worst = Fraction(0)
    in_range = True
    for tpq in (96, 384, 480, 960):
        step_ticks = Fraction(tpq, 12)
        for tick in range(0, 4 * tpq + 1):
            q = quantize_onset(tick, tpq)
            in_range &= -80 <= q.micro <= 79
            err = abs(Fraction(tick) / step_ticks - (q.step + Fraction(q.micro, 160)))
            worst = max(worst, err * 160)
    ok = in_range and worst <= Fraction(1, 2)
    report("microtiming fidelity", ok, f"worst error {float(worst):.4f} units")


# ---------------------------------------------------------------------------
# 3. Grammar safety


def test_criterion_grammar_safety():
    tok = MultiTrackTokenizer()
    sampler = Sampler(tok, UniformPredictor(tok.vocab))
    v = tok.vocab
    errors = 0
    generations = 0

    for seed in range(9_500):
        n_new = 1 + seed % 2
        try:
            piece = sampler.generate_tracks(
                None, n_new, SampleParams(seed=seed, n_bars=1, max_tokens=16384)
            )
            # the loop must stop at exactly the nth TRACK_END
            if len(piece.tracks) != n_new:
                errors += 1
            elif tok.encode(piece).ids.count(v.TRACK_END) != n_new:
                errors += 1
        except Exception:
            errors += 1
        generations += 1

    rng = np.random.default_rng(1)
    for seed in range(500):
        base = random_piece(seed=30_000 + seed, n_tracks=2, n_bars=2)
        k = 1 + seed % 2
        cells = set()
        while len(cells) < k:
            cells.add((int(rng.integers(2)), int(rng.integers(2))))
        try:
            out = sampler.infill_bars(
                base, list(cells), SampleParams(seed=seed, max_tokens=16384)
            )
            # exactly the kth FILL_END: all unmasked bars intact, shape kept
            ok = len(out.tracks) == 2 and out.bar_count == 2
            for t in range(2):
                for b in range(2):
                    if (t, b) not in cells and out.tracks[t].bars[b] != base.tracks[t].bars[b]:
                        ok = False
            if not ok:
                errors += 1
        except Exception:
            errors += 1
        generations += 1

    report("grammar safety", generations >= 10_000 and errors == 0,
           f"{generations} generations, {errors} errors")


# ---------------------------------------------------------------------------
# 4. Hard polyphony


def test_criterion_hard_polyphony():
    tok = MultiTrackTokenizer()
    sampler = Sampler(tok, UniformPredictor(tok.vocab))
    violations = 0
    runs = 0
    for i in range(100):
        l_poly = (1, 2, 4)[i % 3]
        piece = sampler.generate_tracks(
            None, 1, SampleParams(seed=i, n_bars=2, max_tokens=16384, l_poly=l_poly)
        )
        if max(polyphony_profile(piece.tracks[0]), default=0) > l_poly:
            violations += 1
        runs += 1
    report("hard polyphony", runs == 100 and violations == 0,
           f"{violations} violations in {runs} runs")


# ---------------------------------------------------------------------------
# 5. Controls oracles


def test_criterion_controls_oracles():
    corpus = demo_corpus(30, seed=0)
    density = DensityModel().fit(corpus)
    mismatches = 0
    checked = 0
    seed = 0
    while checked < 1000:
        piece = random_piece(seed=90_000 + seed, n_tracks=4, n_bars=4)
        seed += 1
        for track in piece.tracks:
            spec = control_spec(track, density)
            mean = track.note_count / len(track.bars)
            bounds = density.table_.for_program(track.program)
            if spec.density != sum(1 for b in bounds if mean >= b):
                mismatches += 1
            if track.note_count:
                levels = sorted(
                    duration_level(n.duration) for _, n in track.global_notes()
                )
                lo = levels[max(1, math.ceil(0.15 * len(levels))) - 1]
                hi = levels[max(1, math.ceil(0.85 * len(levels))) - 1]
                if spec.dur_range != (lo, hi):
                    mismatches += 1
                sounding = sorted(c for c in polyphony_profile(track) if c > 0)
                plo = sounding[max(1, math.ceil(0.15 * len(sounding))) - 1]
                phi = sounding[max(1, math.ceil(0.85 * len(sounding))) - 1]
                if spec.poly_range != (min(plo, 16), min(phi, 16)):
                    mismatches += 1
            checked += 1

    # encoder self-consistency on the full mini-corpus
    tok = MultiTrackTokenizer(with_controls=True)
    for piece in corpus:
        decoded = tok.decode(tok.encode(with_controls(piece, density))).piece
        for track in decoded.tracks:
            if track.controls != control_spec(track, density):
                mismatches += 1
    report("controls oracles", mismatches == 0,
           f"{checked} tracks, {mismatches} mismatches")


# ---------------------------------------------------------------------------
# 6. Metric identities


def test_criterion_metric_identities():
    rng = np.random.default_rng(2)
    ok = True
    for _ in range(1000):
        a, b, c = (rng.random((48, 128)) < rng.uniform(0.01, 0.2) for _ in range(3))
        ok &= hamming(a, a) == 0.0
        ok &= jaccard(a, a) == 1.0
        ok &= hamming(a, b) == hamming(b, a)
        ok &= jaccard(a, b) == jaccard(b, a)
        ok &= hamming(a, c) <= hamming(a, b) + hamming(b, c) + 1e-12
    ok &= compress_bar_roll(np.zeros((48, 128), bool)).shape == (8, 88)
    report("metric identities", ok, "1,000 triples")


# ---------------------------------------------------------------------------
# 7. Search oracle equivalence


def test_criterion_search_oracle():
    index = CorpusIndex()
    pieces = [random_piece(seed=40_000 + i, n_tracks=4, n_bars=8) for i in range(32)]
    for i, piece in enumerate(pieces):
        index.add_piece(piece, f"p{i}")
    assert len(index) >= 1000
    full = np.stack([index.full_roll(i) for i in range(len(index))]).reshape(len(index), -1)

    mismatches = 0
    retained = True
    for seed in (41_000, 41_001, 41_002):
        track = random_piece(seed=seed, n_tracks=1, n_bars=4).tracks[0]
        rolls = bar_rolls(track)
        fast = nearest_in_corpus(rolls, index, prefilter=0.25)
        slow = nearest_in_corpus(rolls, index, prefilter=None)
        for roll, f, s in zip(rolls, fast.per_bar, slow.per_bar):
            oracle = float(np.mean(full != roll.reshape(-1), axis=1).min())
            if abs(s.distance - oracle) > 1e-12:
                mismatches += 1
            if math.isfinite(f.distance) and abs(f.distance - s.distance) > 1e-12:
                mismatches += 1

    # every exact (distance 0) match survives the prefilter
    query = bar_rolls(pieces[5].tracks[2])[:4]
    result = nearest_in_corpus(query, index, prefilter=0.25)
    retained &= result.matched(0.0)

    start = time.monotonic()
    nearest_in_corpus(query, index, prefilter=0.25)
    elapsed = time.monotonic() - start
    ok = mismatches == 0 and retained and elapsed < 5.0
    report("search oracle equivalence", ok,
           f"{len(index)} bars, 4-bar query {elapsed * 1000:.1f} ms")


# ---------------------------------------------------------------------------
# 8. Experiment harnesses


def density_fixture() -> DensityModel:
    bars = tuple(
        Bar(notes=tuple(Note(onset=i % 48, pitch=30 + i // 48, duration=1)
                        for i in range(count)))
        for count in range(1, 21)
    )
    return DensityModel().fit([Piece(tracks=(Track(0, bars=bars),))])


def test_criterion_experiment_harnesses(tmp_path: Path):
    runner = CliRunner()
    start = time.monotonic()

    corpus_dir = tmp_path / "corpus"
    result = runner.invoke(cli_main, ["demo-corpus", str(corpus_dir), "--count", "40"])
    assert result.exit_code == 0, result.output

    examples = tmp_path / "examples.jsonl"
    result = runner.invoke(
        cli_main,
        ["make-examples", str(corpus_dir), "--count", "150", "--seed", "0",
         "-o", str(examples)],
    )
    assert result.exit_code == 0, result.output
    model = tmp_path / "model.ttng"
    result = runner.invoke(
        cli_main, ["train-ngram", str(examples), "--order", "3", "-o", str(model)]
    )
    assert result.exit_code == 0, result.output

    infill_csv = runner.invoke(
        cli_main,
        ["eval-infill", str(corpus_dir), "--n-bars", "1,2,4,8", "--trials", "50",
         "--max-tokens", "16384", "--model", str(model), "--seed", "0"],
    )
    assert infill_csv.exit_code == 0, infill_csv.output
    lines = [l for l in infill_csv.output.splitlines() if l]
    schema_ok = lines[0] == "bin_lo,bin_hi,count,percent,n_bars"
    schema_ok &= len(lines) == 1 + 4 * 10  # four bar counts x ten bins

    controls_csv = runner.invoke(
        cli_main,
        ["eval-controls", str(corpus_dir), "--control", "density",
         "--trials", "100", "--max-tokens", "16384", "--model", str(model),
         "--seed", "0"],
    )
    assert controls_csv.exit_code == 0, controls_csv.output
    clines = [l for l in controls_csv.output.splitlines() if l]
    schema_ok &= clines[0] == "trial,program,requested,measured,abs_diff"
    schema_ok &= len(clines) == 101
    elapsed = time.monotonic() - start

    # density stub closed loop: the requested level is always recovered
    tok = MultiTrackTokenizer()
    density = density_fixture()
    sampler = Sampler(tok, UniformPredictor(tok.vocab), density)

    def predictor_for(override, program):
        count = 2 * override.density + 1
        bar = Bar(notes=tuple(Note(onset=i % 48, pitch=30 + i // 48, duration=1)
                              for i in range(count)))
        piece = Piece(tracks=(Track(program=program, bars=(bar,) * 8),))
        return ScriptedPredictor(tok.vocab, list(tok.encode(piece).ids))

    rows = attribute_control_experiment(
        "density", sampler, trials=100,
        params=SampleParams(seed=0, max_tokens=16384),
        predictor_for=predictor_for,
    )
    exact = sum(1 for r in rows if r["abs_diff"] == 0)
    ok = schema_ok and elapsed < 600 and exact == 100
    report("experiment harnesses", ok,
           f"harnesses {elapsed:.1f}s, stub exact {exact}/100")


# ---------------------------------------------------------------------------
# 9. Binomial test


def test_criterion_binomial_test():
    ok = abs(binomial_test(0, 10) - 0.001953125) < 1e-9
    ok &= abs(binomial_test(5, 10) - 1.0) < 1e-9
    ok &= abs(binomial_test(10, 10) - 0.001953125) < 1e-9
    report("binomial closed forms", ok)


# ---------------------------------------------------------------------------
# 10. Pipeline statistics


def test_criterion_pipeline_statistics():
    tok = MultiTrackTokenizer()

    # byte reproducibility
    corpus = demo_corpus(20, seed=0)
    params = PipelineParams(seed=11)
    run_a = make_training_examples(corpus, tok, 60, params)
    run_b = make_training_examples(corpus, tok, 60, params)
    reproducible = [e.ids for e in run_a] == [e.ids for e in run_b]

    # chi-squared uniformity on a fixed-shape corpus: 2 tracks x 4 bars gives
    # k = 2 always, so the nonzero mask size is uniform over 1..6
    flat_corpus = [random_piece(seed=60_000 + i, n_tracks=2, n_bars=4)
                   for i in range(10)]
    rng = np.random.default_rng(12)
    draw_params = PipelineParams(n_bars_choices=(4,), seed=12)
    mask_sizes = []
    semitones = []
    drum_ok = True
    for i in range(10_000):
        seq, info = sample_training_example(flat_corpus, tok, rng, draw_params)
        mask_sizes.append(info.mask_size)
        semitones.append(info.semitones)
        if i < 500:  # decoded drum bars must match the untransposed source
            decoded = tok.decode(seq).piece
            source = slice_segment(
                flat_corpus[info.piece_index], info.start_bar, info.n_bars,
                info.track_indices,
            )
            for got, want in zip(decoded.tracks, source.tracks):
                if want.is_drum and got.bars != want.bars:
                    drum_ok = False

    nonzero = [s for s in mask_sizes if s > 0]
    mask_counts = [nonzero.count(s) for s in range(1, 7)]
    mask_p = float(stats.chisquare(mask_counts).pvalue)
    semi_counts = [semitones.count(s) for s in range(-6, 6)]
    semi_p = float(stats.chisquare(semi_counts).pvalue)

    ok = reproducible and mask_p > 0.01 and semi_p > 0.01 and drum_ok
    report("pipeline statistics", ok,
           f"mask chi2 p={mask_p:.3f}, transpose chi2 p={semi_p:.3f}")
