"""tracktok: multi-track MIDI tokenization and grammar-constrained generation.

The public surface is re-exported here; submodules stay importable for the
less common pieces (service wiring, experiment internals, demo corpus).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .controls import (
    ControlTable,
    DensityModel,
    NoContentError,
    control_spec,
    duration_level,
    duration_range,
    polyphony_range,
    with_controls,
)
from .grammar import GrammarError, GrammarState
from .midi_io import (
    MidiParseError,
    UnsupportedMeterError,
    parse_midi,
    write_midi,
)
from .predictor import (
    NGramPredictor,
    PipelineParams,
    ScriptedPredictor,
    TokenPredictor,
    UniformPredictor,
    make_training_examples,
    sample_training_example,
    split_corpus,
)
from .rolls import (
    CorpusIndex,
    SearchResult,
    bar_rolls,
    compress_bar_roll,
    hamming,
    jaccard,
    nearest_in_corpus,
    piano_roll,
)
from .sampler import (
    BudgetExceededError,
    RetriesExhaustedError,
    SampleParams,
    Sampler,
    TrackOverride,
)
from .score import (
    DRUM,
    Bar,
    ControlSpec,
    Note,
    Piece,
    RangeError,
    Track,
    slice_segment,
    transpose,
)
from .tokenizer import (
    BARFILL,
    MULTITRACK,
    DecodeError,
    DecodeResult,
    EncodeError,
    MultiTrackTokenizer,
    TokenSeq,
)
from .vocab import TokenVocab

__all__ = [
    "__version__",
    "BARFILL",
    "Bar",
    "BudgetExceededError",
    "ControlSpec",
    "ControlTable",
    "CorpusIndex",
    "DRUM",
    "DecodeError",
    "DecodeResult",
    "DensityModel",
    "EncodeError",
    "GrammarError",
    "GrammarState",
    "MULTITRACK",
    "MidiParseError",
    "MultiTrackTokenizer",
    "NGramPredictor",
    "NoContentError",
    "Note",
    "Piece",
    "PipelineParams",
    "RangeError",
    "RetriesExhaustedError",
    "SampleParams",
    "Sampler",
    "ScriptedPredictor",
    "SearchResult",
    "TokenPredictor",
    "TokenSeq",
    "TokenVocab",
    "Track",
    "TrackOverride",
    "UniformPredictor",
    "UnsupportedMeterError",
    "bar_rolls",
    "compress_bar_roll",
    "control_spec",
    "duration_level",
    "duration_range",
    "hamming",
    "jaccard",
    "make_training_examples",
    "nearest_in_corpus",
    "parse_midi",
    "piano_roll",
    "polyphony_range",
    "sample_training_example",
    "slice_segment",
    "split_corpus",
    "transpose",
    "with_controls",
    "write_midi",
]
