"""Grammar-masked autoregressive generation: new tracks and bar infilling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .controls import DensityModel, with_controls as attach_controls
from .grammar import GrammarState
from .predictor import TokenPredictor
from .rolls import jaccard, piano_roll
from .score import DRUM, Bar, Piece, Track, bar_steps
from .tokenizer import BARFILL, MULTITRACK, MultiTrackTokenizer, TokenSeq, ordered_mask


class BudgetExceededError(RuntimeError):
    """The token budget ran out before the stop condition; carries the
    partial token list."""

    def __init__(self, ids: list[int]):
        super().__init__(f"token budget exhausted after {len(ids)} tokens")
        self.ids = ids


class RetriesExhaustedError(RuntimeError):
    """Every regeneration attempt was rejected; carries the last candidate."""

    def __init__(self, attempts: int, last: Piece):
        super().__init__(f"gave up after {attempts} rejected attempts")
        self.last = last


@dataclass(frozen=True)
class SampleParams:
    temperature: float = 1.0
    max_tokens: int = 2048
    l_poly: Optional[int] = None
    seed: int = 0
    n_bars: int = 8  # segment length for unconditional generation
    reject_duplicates: bool = False
    reject_silence: bool = False
    duplicate_threshold: float = 0.99
    max_retries: int = 8

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class TrackOverride:
    """Forced attributes for one generated track; unset fields are sampled."""

    program: Optional[int] = None  # 0..127 or DRUM
    density: Optional[int] = None
    poly_range: Optional[tuple[int, int]] = None
    dur_range: Optional[tuple[int, int]] = None


class Sampler:
    """Drives a predictor through the grammar mask.

    A sampler instance is cheap; one generation call owns its state, so
    concurrent calls only share the immutable tokenizer/predictor/table.
    """

    def __init__(
        self,
        tokenizer: MultiTrackTokenizer,
        predictor: TokenPredictor,
        density: Optional[DensityModel] = None,
    ):
        self.tokenizer = tokenizer
        self.predictor = predictor
        self.density = density
        if tokenizer.with_controls and density is None:
            raise ValueError("tokenizer emits controls but no DensityModel was given")

    # ------------------------------------------------------------------

    def generate_tracks(
        self,
        piece: Optional[Piece],
        n_new: int,
        params: SampleParams = SampleParams(),
        overrides: Sequence[Optional[TrackOverride]] = (),
    ) -> Piece:
        """Append ``n_new`` generated tracks to ``piece`` (None = from scratch)."""
        if n_new < 1:
            raise ValueError("n_new must be >= 1")
        tok = self.tokenizer
        v = tok.vocab
        if piece is not None and tok.with_controls:
            piece = attach_controls(piece, self.density)
        if piece is not None:
            prompt_seq = tok.encode(piece)
            prompt = list(prompt_seq.ids)
            signatures = prompt_seq.signatures
        else:
            prompt = [v.START]
            signatures = ((4, 4),) * params.n_bars
        bar_lengths = tuple(bar_steps(n, d) for n, d in signatures)
        state = GrammarState(
            vocab=v,
            mode=MULTITRACK,
            expressive=tok.expressive,
            with_controls=tok.with_controls,
            bar_lengths=bar_lengths,
            l_poly=params.l_poly,
        )
        state.replay(prompt, check=False)
        n_existing = len(piece.tracks) if piece is not None else 0

        rng = np.random.default_rng(params.seed)
        ids = list(prompt)
        ends = 0
        while ends < n_new:
            if len(ids) >= params.max_tokens:
                raise BudgetExceededError(ids)
            ordinal = state.tracks_done - n_existing
            override = overrides[ordinal] if ordinal < len(overrides) else None
            forced = self._forced_token(state, override)
            if forced is not None:
                token = forced
            else:
                token = self._sample(state, ids, rng, params.temperature)
            state.step(token)
            ids.append(token)
            if token == v.TRACK_END:
                ends += 1

        seq = TokenSeq(
            vocab=v,
            ids=tuple(ids),
            mode=MULTITRACK,
            expressive=tok.expressive,
            with_controls=tok.with_controls,
            signatures=signatures,
            ticks_per_quarter=piece.ticks_per_quarter if piece is not None else 480,
            style=piece.style if piece is not None else None,
        )
        return tok.decode(seq).piece

    def _forced_token(
        self, state: GrammarState, override: Optional[TrackOverride]
    ) -> Optional[int]:
        if override is None:
            return None
        from . import grammar as g

        v = self.tokenizer.vocab
        if state.phase == g.P_INSTRUMENT and override.program is not None:
            return v.instrument_id(override.program)
        # with an empty style family the density slot is reached straight
        # from the instrument token, still in the after-instrument phase
        in_density = state.phase == g.P_DENSITY or (
            state.phase == g.P_AFTER_INSTRUMENT
            and state.with_controls
            and not v.style.count
        )
        if in_density and override.density is not None:
            return v.density.id_for(override.density)
        if state.phase == g.P_MIN_POLY and override.poly_range is not None:
            return v.min_poly.id_for(override.poly_range[0])
        if state.phase == g.P_MAX_POLY and override.poly_range is not None:
            return v.max_poly.id_for(override.poly_range[1])
        if state.phase == g.P_MIN_DUR and override.dur_range is not None:
            return v.min_dur.id_for(override.dur_range[0])
        if state.phase == g.P_MAX_DUR and override.dur_range is not None:
            return v.max_dur.id_for(override.dur_range[1])
        return None

    # ------------------------------------------------------------------

    def infill_bars(
        self,
        piece: Piece,
        mask: Iterable[tuple[int, int]],
        params: SampleParams = SampleParams(),
    ) -> Piece:
        """Regenerate the masked (track, bar) cells, leaving the rest intact."""
        cells = ordered_mask(mask)
        if not cells:
            raise ValueError("mask must be non-empty")
        tok = self.tokenizer
        if tok.with_controls:
            piece = attach_controls(piece, self.density)
        prompt_seq = tok.encode_infill(piece, cells)

        last: Optional[Piece] = None
        for attempt in range(params.max_retries + 1):
            seed = np.random.default_rng([params.seed, attempt])
            candidate = self._run_fill(prompt_seq, len(cells), params, seed)
            if self._accept(piece, candidate, cells, params):
                return candidate
            last = candidate
        raise RetriesExhaustedError(params.max_retries + 1, last)

    def _run_fill(
        self,
        prompt_seq: TokenSeq,
        n_fills: int,
        params: SampleParams,
        rng: np.random.Generator,
    ) -> Piece:
        tok = self.tokenizer
        v = tok.vocab
        # the full bar-fill encoding carries the original bodies at the end;
        # the generation prompt stops where the first fill block would start
        ids = list(prompt_seq.ids[: prompt_seq.ids.index(v.FILL_START)])
        state = GrammarState.for_seq(prompt_seq, l_poly=params.l_poly)
        state.replay(ids, check=False)
        # enter the fill section; grammar also admits more tracks here
        ids.append(v.FILL_START)
        state.step(v.FILL_START)
        fills = 0
        while fills < n_fills:
            if len(ids) >= params.max_tokens:
                raise BudgetExceededError(ids)
            token = self._sample(state, ids, rng, params.temperature)
            state.step(token)
            ids.append(token)
            if token == v.FILL_END:
                fills += 1
                if fills < n_fills:
                    ids.append(v.FILL_START)
                    state.step(v.FILL_START)
        seq = replace(prompt_seq, ids=tuple(ids))
        return tok.decode(seq).piece

    def _accept(
        self,
        original: Piece,
        candidate: Piece,
        cells: list[tuple[int, int]],
        params: SampleParams,
    ) -> bool:
        if not (params.reject_duplicates or params.reject_silence):
            return True
        notes = 0
        sims = []
        for t, b in cells:
            old = piano_roll(original.tracks[t], b, 1)
            new = piano_roll(candidate.tracks[t], b, 1)
            notes += len(candidate.tracks[t].bars[b].notes)
            sims.append(jaccard(old, new))
        if params.reject_silence and notes == 0:
            return False
        if params.reject_duplicates and min(sims, default=0.0) >= params.duplicate_threshold:
            # min over bars: every masked bar nearly identical counts as a dup
            if all(s >= params.duplicate_threshold for s in sims):
                return False
        return True

    # ------------------------------------------------------------------

    def _sample(
        self,
        state: GrammarState,
        prefix: list[int],
        rng: np.random.Generator,
        temperature: float,
    ) -> int:
        mask = state.valid_next()
        if not mask.any():
            raise RuntimeError(f"no admissible token in phase {state.phase}")
        probs = np.asarray(self.predictor.next_distribution(prefix), dtype=float)
        if probs.shape != mask.shape:
            raise ValueError("predictor distribution size does not match vocabulary")
        if temperature != 1.0:
            with np.errstate(divide="ignore"):
                logits = np.log(probs)
            probs = np.exp(logits / temperature - np.max(logits / temperature))
        probs = np.where(mask, probs, 0.0)
        total = probs.sum()
        if total <= 0:
            # predictor assigned zero mass to every admissible token
            probs = mask.astype(float)
            total = probs.sum()
        probs = probs / total
        return int(rng.choice(len(probs), p=probs))
