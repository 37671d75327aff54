"""Next-token probability sources and the training-example pipeline.

The neural model behind the representation is out of scope here; the
``TokenPredictor`` protocol admits any externally trained model aligned to
the exported vocabulary table, and an additive-smoothing n-gram model serves
as a desk-scale baseline.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .score import Piece, slice_segment, transpose
from .tokenizer import BARFILL, MULTITRACK, MultiTrackTokenizer, TokenSeq
from .vocab import TokenVocab


class TokenPredictor(Protocol):
    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        """Probability vector over the vocabulary given a token prefix."""
        ...


class UniformPredictor:
    """Assigns equal probability to every token; used for grammar fuzzing."""

    def __init__(self, vocab: TokenVocab):
        self.vocab = vocab
        self._dist = np.full(vocab.size, 1.0 / vocab.size)

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        return self._dist


class ScriptedPredictor:
    """Deterministically replays a fixed target sequence.

    Puts all probability mass on ``target[len(prefix) - offset]``; falls back
    to uniform past the end of the script.  Useful as a stub in tests and
    duplicate-rejection checks.
    """

    def __init__(self, vocab: TokenVocab, target: Sequence[int], offset: int = 0):
        self.vocab = vocab
        self.target = list(target)
        self.offset = offset

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        index = len(prefix) - self.offset
        dist = np.zeros(self.vocab.size)
        if 0 <= index < len(self.target):
            dist[self.target[index]] = 1.0
        else:
            dist[:] = 1.0 / self.vocab.size
        return dist


class NGramPredictor:
    """Additive-smoothing n-gram model with backoff to shorter contexts.

    ``next_distribution`` gives ``(c(ctx, t) + alpha) / (c(ctx) + alpha*V)``
    for the longest context of length < order that has been seen; unseen
    contexts back off until the empty context.
    """

    MAGIC = b"TTNG"
    VERSION = 1

    def __init__(self, vocab: TokenVocab, order: int = 4, alpha: float = 0.01):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.vocab = vocab
        self.order = order
        self.alpha = alpha

    def get_params(self, deep: bool = True) -> dict:
        return {"vocab": self.vocab, "order": self.order, "alpha": self.alpha}

    def fit(self, sequences: Iterable[Sequence[int]]) -> "NGramPredictor":
        counts: list[dict[tuple[int, ...], dict[int, int]]] = [
            {} for _ in range(self.order)
        ]
        n_seqs = 0
        for seq in sequences:
            ids = seq.ids if isinstance(seq, TokenSeq) else tuple(seq)
            n_seqs += 1
            for i, token in enumerate(ids):
                for k in range(self.order):
                    if i < k:
                        break
                    ctx = tuple(ids[i - k : i])
                    bucket = counts[k].setdefault(ctx, {})
                    bucket[token] = bucket.get(token, 0) + 1
        if n_seqs == 0:
            raise ValueError("no training sequences")
        self.counts_ = counts
        return self

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        if not hasattr(self, "counts_"):
            raise AttributeError("NGramPredictor is not fitted; call fit() first")
        prefix = tuple(prefix)
        size = self.vocab.size
        for k in range(min(self.order - 1, len(prefix)), -1, -1):
            ctx = prefix[len(prefix) - k :]
            bucket = self.counts_[k].get(ctx)
            if bucket:
                dist = np.full(size, self.alpha)
                for token, c in bucket.items():
                    dist[token] += c
                return dist / dist.sum()
        return np.full(size, 1.0 / size)

    def perplexity(self, sequences: Iterable[Sequence[int]]) -> float:
        """exp of the mean negative log-probability per token."""
        total, n = 0.0, 0
        for seq in sequences:
            ids = seq.ids if isinstance(seq, TokenSeq) else tuple(seq)
            for i, token in enumerate(ids):
                p = self.next_distribution(ids[:i])[token]
                total -= math.log(max(p, 1e-300))
                n += 1
        if n == 0:
            raise ValueError("no evaluation tokens")
        return math.exp(total / n)

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        tables = [
            {",".join(map(str, ctx)): bucket for ctx, bucket in level.items()}
            for level in self.counts_
        ]
        payload = zlib.compress(json.dumps(tables).encode())
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack(">H", self.VERSION))
            fh.write(bytes.fromhex(self.vocab.hash()))
            fh.write(struct.pack(">Hd", self.order, self.alpha))
            fh.write(struct.pack(">Q", len(payload)))
            fh.write(payload)

    @classmethod
    def load(cls, path, vocab: TokenVocab) -> "NGramPredictor":
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise ValueError("not an n-gram model file")
            version = struct.unpack(">H", fh.read(2))[0]
            if version != cls.VERSION:
                raise ValueError(f"unsupported model version {version}")
            vocab_hash = fh.read(32).hex()
            if vocab_hash != vocab.hash():
                raise ValueError("model was trained against a different vocabulary")
            order, alpha = struct.unpack(">Hd", fh.read(10))
            length = struct.unpack(">Q", fh.read(8))[0]
            tables = json.loads(zlib.decompress(fh.read(length)).decode())
        model = cls(vocab, order=order, alpha=alpha)
        model.counts_ = [
            {
                tuple(int(x) for x in ctx.split(",") if x): {
                    int(t): c for t, c in bucket.items()
                }
                for ctx, bucket in level.items()
            }
            for level in tables
        ]
        return model


# ---------------------------------------------------------------------------
# Training-example pipeline


@dataclass(frozen=True)
class PipelineParams:
    """Segment/masking/augmentation defaults for training-example assembly."""

    n_bars_choices: tuple[int, ...] = (4, 8)
    k_tracks_max: int = 12
    infill_probability: float = 0.75
    mask_fraction: float = 0.75
    transpose_range: tuple[int, int] = (-6, 5)
    seed: int = 0


@dataclass(frozen=True)
class ExampleInfo:
    """Sampling metadata for one training example."""

    piece_index: int
    start_bar: int
    n_bars: int
    track_indices: tuple[int, ...]
    semitones: int
    mask_size: int
    mode: str


def _eligible(piece: Piece, n_bars: int) -> bool:
    return len(piece.tracks) >= 2 and piece.bar_count >= n_bars


def sample_training_example(
    corpus: Sequence[Piece],
    tokenizer: MultiTrackTokenizer,
    rng: np.random.Generator,
    params: PipelineParams,
    density: Optional["DensityModel"] = None,
) -> tuple[TokenSeq, ExampleInfo]:
    """Draw one randomized (segment, mask, transposition) training example."""
    n_bars = int(rng.choice(params.n_bars_choices))
    eligible = [i for i, p in enumerate(corpus) if _eligible(p, n_bars)]
    if not eligible:
        raise ValueError("no corpus piece has >= 2 tracks and enough bars")
    piece_index = int(eligible[rng.integers(len(eligible))])
    piece = corpus[piece_index]
    start_bar = int(rng.integers(piece.bar_count - n_bars + 1))
    n_tracks = len(piece.tracks)
    k = int(rng.integers(2, min(n_tracks, params.k_tracks_max) + 1))
    track_indices = tuple(int(i) for i in rng.permutation(n_tracks)[:k])
    segment = slice_segment(piece, start_bar, n_bars, track_indices)
    lo, hi = params.transpose_range
    semitones = int(rng.integers(lo, hi + 1))
    segment = transpose(segment, semitones)
    if tokenizer.with_controls:
        if density is None:
            raise ValueError("tokenizer emits controls but no DensityModel was given")
        from .controls import with_controls as attach_controls

        segment = attach_controls(segment, density)

    mask_size = 0
    if rng.random() < params.infill_probability:
        ceiling = math.floor(k * n_bars * params.mask_fraction)
        mask_size = int(rng.integers(0, ceiling + 1))
    if mask_size:
        cells = [(t, b) for t in range(k) for b in range(n_bars)]
        chosen = rng.choice(len(cells), size=mask_size, replace=False)
        mask = [cells[int(i)] for i in chosen]
        seq = tokenizer.encode_infill(segment, mask)
        mode = BARFILL
    else:
        seq = tokenizer.encode(segment)
        mode = MULTITRACK
    info = ExampleInfo(
        piece_index=piece_index,
        start_bar=start_bar,
        n_bars=n_bars,
        track_indices=track_indices,
        semitones=semitones,
        mask_size=mask_size,
        mode=mode,
    )
    return seq, info


def make_training_examples(
    corpus: Sequence[Piece],
    tokenizer: MultiTrackTokenizer,
    count: int,
    params: PipelineParams = PipelineParams(),
    density: Optional["DensityModel"] = None,
) -> list[TokenSeq]:
    """Assemble ``count`` randomized training sequences (deterministic per seed)."""
    rng = np.random.default_rng(params.seed)
    return [
        sample_training_example(corpus, tokenizer, rng, params, density)[0]
        for _ in range(count)
    ]


def split_corpus(
    names: Sequence[str], train: float = 0.8, valid: float = 0.1
) -> dict[str, str]:
    """Deterministic hash-based train/valid/test assignment per file name."""
    out = {}
    for name in names:
        h = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")
        u = h / 2**64
        out[name] = "train" if u < train else ("valid" if u < train + valid else "test")
    return out
