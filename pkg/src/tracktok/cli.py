"""Command-line front door: tokenization, training, generation, evaluation."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .config import ConfigError, load_config
from .controls import ControlTable, DensityModel
from .demo import write_demo_corpus
from .experiments import (
    attribute_control_experiment,
    corpus_originality_experiment,
    infilling_originality_experiment,
    rows_to_csv,
)
from .midi_io import MidiParseError, UnsupportedMeterError, parse_midi, write_midi
from .predictor import (
    NGramPredictor,
    PipelineParams,
    TokenPredictor,
    UniformPredictor,
    make_training_examples,
)
from .rolls import CorpusIndex
from .sampler import (
    BudgetExceededError,
    RetriesExhaustedError,
    SampleParams,
    Sampler,
    TrackOverride,
)
from .score import DRUM, Piece
from .tokenizer import BARFILL, DecodeError, MultiTrackTokenizer, TokenSeq


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _load_corpus(directory: Path, expressive: bool = False) -> list[Piece]:
    paths = sorted(Path(directory).glob("*.mid")) + sorted(Path(directory).glob("*.midi"))
    if not paths:
        raise _fail(f"no MIDI files in {directory}")
    pieces = []
    for path in paths:
        try:
            pieces.append(parse_midi(path.read_bytes(), expressive=expressive))
        except (MidiParseError, UnsupportedMeterError) as exc:
            click.echo(f"skipping {path.name}: {exc}", err=True)
    if not pieces:
        raise _fail(f"no parseable MIDI files in {directory}")
    return pieces


def _tokenizer_from(config: dict, with_controls: Optional[bool] = None) -> MultiTrackTokenizer:
    return MultiTrackTokenizer(
        expressive=bool(config["expressive"]),
        with_controls=config["with_controls"] if with_controls is None else with_controls,
    )


def _density_from(config: dict, table_path: Optional[str]) -> Optional[DensityModel]:
    path = table_path or config.get("density_table")
    if not path:
        return None
    return DensityModel.from_table(ControlTable.from_json(Path(path).read_text()))


def _predictor_from(
    config: dict, model_path: Optional[str], tokenizer: MultiTrackTokenizer
) -> TokenPredictor:
    path = model_path or config.get("model_path")
    if path:
        return NGramPredictor.load(path, tokenizer.vocab)
    return UniformPredictor(tokenizer.vocab)


def _emit(text: str, output: Optional[str]) -> None:
    if output and output != "-":
        Path(output).write_text(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                             help="Flat JSON config file.")
seed_option = click.option("--seed", type=int, default=None, help="RNG seed.")


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Multi-track MIDI tokenization, constrained generation, and evaluation."""


# ---------------------------------------------------------------------------
# Tokenization


@main.command()
@click.argument("midi_file", type=click.Path(exists=True))
@click.option("--expressive", is_flag=True)
@click.option("--density-table", type=click.Path(exists=True), default=None,
              help="Enable control tokens using this table.")
@click.option("--output", "-o", default="-")
@config_option
@seed_option
def tokenize(midi_file, expressive, density_table, output, config_path, seed):
    """Encode a MIDI file as a token-sequence JSON document."""
    config = load_config(config_path, {"expressive": expressive or None})
    tokenizer = MultiTrackTokenizer(
        expressive=bool(config["expressive"]) or expressive,
        with_controls=density_table is not None,
    )
    piece = parse_midi(Path(midi_file).read_bytes(), expressive=tokenizer.expressive)
    if density_table:
        from .controls import with_controls

        piece = with_controls(piece, _density_from(config, density_table))
    seq = tokenizer.encode(piece)
    doc = {
        "mode": seq.mode,
        "expressive": seq.expressive,
        "with_controls": seq.with_controls,
        "ids": list(seq.ids),
        "names": seq.names(),
        "signatures": [list(s) for s in seq.signatures],
        "ticks_per_quarter": seq.ticks_per_quarter,
        "vocab_hash": tokenizer.vocab.hash(),
    }
    _emit(json.dumps(doc, indent=2), output)


@main.command()
@click.argument("token_file", type=click.Path(exists=True, allow_dash=True))
@click.option("--output", "-o", required=True, type=click.Path())
@config_option
@seed_option
def detokenize(token_file, output, config_path, seed):
    """Decode a token-sequence JSON document back into a MIDI file."""
    text = sys.stdin.read() if token_file == "-" else Path(token_file).read_text()
    doc = json.loads(text)
    tokenizer = MultiTrackTokenizer(
        expressive=doc.get("expressive", False),
        with_controls=doc.get("with_controls", False),
    )
    seq = TokenSeq(
        vocab=tokenizer.vocab,
        ids=tuple(doc["ids"]),
        mode=doc.get("mode", "multitrack"),
        expressive=doc.get("expressive", False),
        with_controls=doc.get("with_controls", False),
        signatures=tuple(tuple(s) for s in doc.get("signatures", [])),
        ticks_per_quarter=doc.get("ticks_per_quarter", 480),
    )
    try:
        piece = tokenizer.decode(seq).piece
    except DecodeError as exc:
        raise _fail(f"invalid token sequence: {exc}")
    Path(output).write_bytes(write_midi(piece, expressive=tokenizer.expressive))
    click.echo(f"wrote {output}")


# ---------------------------------------------------------------------------
# Tables, examples, models


@main.command("build-tables")
@click.argument("corpus_dir", type=click.Path(exists=True))
@click.option("--output", "-o", default="-")
@config_option
@seed_option
def build_tables(corpus_dir, output, config_path, seed):
    """Fit the per-instrument density table on a corpus of MIDI files."""
    corpus = _load_corpus(Path(corpus_dir))
    model = DensityModel().fit(corpus)
    _emit(model.table.to_json(), output)


@main.command("make-examples")
@click.argument("corpus_dir", type=click.Path(exists=True))
@click.option("--count", type=int, default=1000)
@click.option("--n-bars", "n_bars", type=click.Choice(["4", "8", "both"]), default="both")
@click.option("--density-table", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", default="-")
@config_option
@seed_option
def make_examples(corpus_dir, count, n_bars, density_table, output, config_path, seed):
    """Sample randomized training sequences (JSONL of token-id lists)."""
    config = load_config(config_path, {"seed": seed})
    density = _density_from(config, density_table)
    tokenizer = _tokenizer_from(config, with_controls=density is not None)
    corpus = _load_corpus(Path(corpus_dir), expressive=tokenizer.expressive)
    choices = {"4": (4,), "8": (8,), "both": (4, 8)}[n_bars]
    params = PipelineParams(n_bars_choices=choices, seed=int(config["seed"]))
    try:
        examples = make_training_examples(corpus, tokenizer, count, params, density)
    except ValueError as exc:
        raise _fail(str(exc))
    lines = [
        json.dumps({"mode": e.mode, "ids": list(e.ids)}, separators=(",", ":"))
        for e in examples
    ]
    _emit("\n".join(lines) + "\n", output)


@main.command("train-ngram")
@click.argument("examples_file", type=click.Path(exists=True))
@click.option("--order", type=int, default=4)
@click.option("--alpha", type=float, default=0.01)
@click.option("--output", "-o", required=True, type=click.Path())
@config_option
@seed_option
def train_ngram(examples_file, order, alpha, output, config_path, seed):
    """Train the n-gram baseline on a make-examples JSONL file."""
    config = load_config(config_path)
    tokenizer = _tokenizer_from(config)
    sequences = []
    with open(examples_file) as fh:
        for line in fh:
            if line.strip():
                sequences.append(json.loads(line)["ids"])
    if not sequences:
        raise _fail(f"{examples_file} contains no examples")
    model = NGramPredictor(tokenizer.vocab, order=order, alpha=alpha).fit(sequences)
    model.save(output)
    click.echo(f"trained order-{order} model on {len(sequences)} sequences -> {output}")


# ---------------------------------------------------------------------------
# Generation


def _parse_override(program, density_level, poly_range, dur_range) -> Optional[TrackOverride]:
    if program is None and density_level is None and not poly_range and not dur_range:
        return None

    def parse_range(text):
        if not text:
            return None
        lo, hi = text.split(":")
        return int(lo), int(hi)

    prog = None
    if program is not None:
        prog = DRUM if program.lower() == "drum" else int(program)
    return TrackOverride(
        program=prog,
        density=density_level,
        poly_range=parse_range(poly_range),
        dur_range=parse_range(dur_range),
    )


@main.command()
@click.option("--input", "input_file", type=click.Path(exists=True), default=None,
              help="Conditioning MIDI file; omit to generate from scratch.")
@click.option("--n-new", type=int, default=1)
@click.option("--n-bars", type=int, default=8, help="Bars when generating from scratch.")
@click.option("--program", default=None, help="Force the instrument (0-127 or 'drum').")
@click.option("--density-level", type=int, default=None)
@click.option("--poly-range", default=None, help="lo:hi")
@click.option("--dur-range", default=None, help="lo:hi")
@click.option("--temperature", type=float, default=1.0)
@click.option("--l-poly", type=int, default=None)
@click.option("--max-tokens", type=int, default=4096)
@click.option("--model", type=click.Path(exists=True), default=None)
@click.option("--density-table", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", required=True, type=click.Path())
@config_option
@seed_option
def generate(input_file, n_new, n_bars, program, density_level, poly_range, dur_range,
             temperature, l_poly, max_tokens, model, density_table, output,
             config_path, seed):
    """Generate new tracks, optionally conditioned on an existing MIDI file."""
    config = load_config(config_path, {"seed": seed})
    needs_controls = any(x is not None for x in (density_level, poly_range, dur_range))
    density = _density_from(config, density_table)
    if needs_controls and density is None:
        raise _fail("control overrides need --density-table")
    tokenizer = _tokenizer_from(config, with_controls=needs_controls or bool(density))
    predictor = _predictor_from(config, model, tokenizer)
    sampler = Sampler(tokenizer, predictor, density)
    piece = None
    if input_file:
        piece = parse_midi(Path(input_file).read_bytes(), expressive=tokenizer.expressive)
    override = _parse_override(program, density_level, poly_range, dur_range)
    params = SampleParams(
        temperature=temperature,
        l_poly=l_poly,
        seed=int(config["seed"]),
        n_bars=n_bars,
        max_tokens=max_tokens,
    )
    try:
        result = sampler.generate_tracks(
            piece, n_new, params, overrides=[override] * n_new if override else []
        )
    except BudgetExceededError as exc:
        raise _fail(str(exc))
    Path(output).write_bytes(write_midi(result, expressive=tokenizer.expressive))
    click.echo(f"wrote {output}")


@main.command()
@click.option("--input", "input_file", type=click.Path(exists=True), required=True)
@click.option("--track", type=int, required=True)
@click.option("--bars", required=True, help="start:count bar span to regenerate.")
@click.option("--temperature", type=float, default=1.0)
@click.option("--l-poly", type=int, default=None)
@click.option("--max-tokens", type=int, default=4096)
@click.option("--reject-duplicates/--no-reject-duplicates", default=True)
@click.option("--reject-silence/--no-reject-silence", default=False)
@click.option("--model", type=click.Path(exists=True), default=None)
@click.option("--density-table", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", required=True, type=click.Path())
@config_option
@seed_option
def infill(input_file, track, bars, temperature, l_poly, max_tokens,
           reject_duplicates, reject_silence, model, density_table, output,
           config_path, seed):
    """Regenerate a span of bars on one track of a MIDI file."""
    config = load_config(config_path, {"seed": seed})
    density = _density_from(config, density_table)
    tokenizer = _tokenizer_from(config, with_controls=bool(density))
    predictor = _predictor_from(config, model, tokenizer)
    sampler = Sampler(tokenizer, predictor, density)
    piece = parse_midi(Path(input_file).read_bytes(), expressive=tokenizer.expressive)
    try:
        start, count = (int(x) for x in bars.split(":"))
    except ValueError:
        raise _fail("--bars must look like start:count")
    if not (0 <= track < len(piece.tracks)):
        raise _fail(f"track {track} outside 0..{len(piece.tracks) - 1}")
    if not (0 <= start and start + count <= piece.bar_count and count > 0):
        raise _fail(f"bar span {start}:{count} outside piece of {piece.bar_count} bars")
    mask = [(track, start + i) for i in range(count)]
    params = SampleParams(
        temperature=temperature,
        l_poly=l_poly,
        seed=int(config["seed"]),
        max_tokens=max_tokens,
        reject_duplicates=reject_duplicates,
        reject_silence=reject_silence,
    )
    try:
        result = sampler.infill_bars(piece, mask, params)
    except (RetriesExhaustedError, BudgetExceededError) as exc:
        raise _fail(str(exc))
    Path(output).write_bytes(write_midi(result, expressive=tokenizer.expressive))
    click.echo(f"wrote {output}")


# ---------------------------------------------------------------------------
# Evaluation harnesses


def _sampler_from(config, model, density_table) -> Sampler:
    density = _density_from(config, density_table)
    tokenizer = _tokenizer_from(config, with_controls=bool(density))
    predictor = _predictor_from(config, model, tokenizer)
    return Sampler(tokenizer, predictor, density)


@main.command("eval-infill")
@click.argument("corpus_dir", type=click.Path(exists=True))
@click.option("--n-bars", default="1,2,4,8", help="Comma-separated bar counts.")
@click.option("--trials", type=int, default=50)
@click.option("--max-tokens", type=int, default=8192)
@click.option("--model", type=click.Path(exists=True), default=None)
@click.option("--density-table", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", default="-")
@config_option
@seed_option
def eval_infill(corpus_dir, n_bars, trials, max_tokens, model, density_table,
                output, config_path, seed):
    """Infilling-originality histogram (Jaccard of original vs infill)."""
    config = load_config(config_path, {"seed": seed})
    sampler = _sampler_from(config, model, density_table)
    corpus = _load_corpus(Path(corpus_dir))
    all_rows = []
    for n in (int(x) for x in n_bars.split(",")):
        params = SampleParams(seed=int(config["seed"]), max_tokens=max_tokens)
        _, rows = infilling_originality_experiment(corpus, sampler, n, trials, params)
        all_rows.extend(rows)
    _emit(rows_to_csv(all_rows), output)


@main.command("eval-originality")
@click.argument("corpus_dir", type=click.Path(exists=True))
@click.option("--n-bars", type=int, default=4)
@click.option("--trials", type=int, default=20)
@click.option("--max-tokens", type=int, default=8192)
@click.option("--prefilter", type=float, default=0.25)
@click.option("--model", type=click.Path(exists=True), default=None)
@click.option("--density-table", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", default="-")
@config_option
@seed_option
def eval_originality(corpus_dir, n_bars, trials, max_tokens, prefilter, model,
                     density_table, output, config_path, seed):
    """Nearest-corpus Hamming histogram for infilled material."""
    config = load_config(config_path, {"seed": seed})
    sampler = _sampler_from(config, model, density_table)
    corpus = _load_corpus(Path(corpus_dir))
    index = CorpusIndex()
    for i, piece in enumerate(corpus):
        index.add_piece(piece, source=f"corpus[{i}]")
    params = SampleParams(seed=int(config["seed"]), max_tokens=max_tokens)
    _, rows = corpus_originality_experiment(
        corpus, index, sampler, n_bars, trials, params, prefilter=prefilter
    )
    _emit(rows_to_csv(rows), output)


@main.command("eval-controls")
@click.argument("corpus_dir", type=click.Path(exists=True))
@click.option("--control", type=click.Choice(["density", "duration", "polyphony"]),
              default="density")
@click.option("--trials", type=int, default=100)
@click.option("--max-tokens", type=int, default=4096)
@click.option("--model", type=click.Path(exists=True), default=None)
@click.option("--density-table", type=click.Path(exists=True), default=None)
@click.option("--output", "-o", default="-")
@config_option
@seed_option
def eval_controls(corpus_dir, control, trials, max_tokens, model, density_table,
                  output, config_path, seed):
    """Attribute-control effectiveness rows (one per trial)."""
    config = load_config(config_path, {"seed": seed})
    density = _density_from(config, density_table)
    if density is None:
        density = DensityModel().fit(_load_corpus(Path(corpus_dir)))
    tokenizer = _tokenizer_from(config, with_controls=True)
    predictor = _predictor_from(config, model, tokenizer)
    sampler = Sampler(tokenizer, predictor, density)
    params = SampleParams(seed=int(config["seed"]), max_tokens=max_tokens)
    rows = attribute_control_experiment(control, sampler, trials, params)
    _emit(rows_to_csv(rows), output)


# ---------------------------------------------------------------------------
# Service and utilities


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@config_option
@seed_option
def serve(host, port, config_path, seed):
    """Run the HTTP service."""
    import uvicorn

    from .service import build_default_app

    config = load_config(config_path, {"host": host, "port": port})
    app = build_default_app(config)
    uvicorn.run(app, host=config["host"], port=int(config["port"]))


@main.command("demo-corpus")
@click.argument("directory", type=click.Path())
@click.option("--count", type=int, default=30)
@seed_option
def demo_corpus_cmd(directory, count, seed):
    """Write the bundled synthetic mini-corpus as MIDI files."""
    paths = write_demo_corpus(Path(directory), n_pieces=count, seed=seed or 0)
    click.echo(f"wrote {len(paths)} files to {directory}")


@main.command("export-vocab")
@click.option("--expressive", is_flag=True)
@click.option("--output", "-o", default="-")
def export_vocab(expressive, output):
    """Emit the token-id table for aligning external predictors."""
    tokenizer = MultiTrackTokenizer(expressive=expressive)
    _emit(json.dumps(tokenizer.vocab.export(), indent=2), output)


if __name__ == "__main__":
    main()
