"""Command line: ``scoregen ingest | train | generate | inspect``.

Exit codes: 0 success, 2 usage/validation, 3 data, 4 shape/compatibility,
5 numeric failure.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, theory
from .corpus import (
    Vocabulary,
    build_dataset,
    dumps_tokens,
    extract_horizontal,
    extract_vertical,
    loads_tokens,
)
from .errors import DataError, ParseError, ScoregenError, ValidationError, WeightChecksumError
from .generator import (
    DEFAULT_KEY_FIFTHS,
    GenerationConstraints,
    assemble_score,
    run_generation,
    select_seed,
)
from .neural import ModelConfig, TrainConfig, load_weights, save_weights, train
from .neural.weights_io import MAGIC, loads_weights
from .scoreio import parse_score, read_score, write_midi, write_musicxml
from .seeding import STREAMS, rng_stream

log = logging.getLogger("scoregen")

TOKENS_FILE = "tokens.tsv"
VOCAB_FILE = "vocabulary.tsv"
MANIFEST_FILE = "manifest.json"


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path, command, parameters, inputs, seeds=None):
    manifest = {
        "command": command,
        "parameters": parameters,
        "inputs": {str(p): _digest(p) for p in inputs},
        "seeds": seeds or {},
        "tool_version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _split_names(values):
    names = []
    for v in values or []:
        names.extend(n.strip() for n in v.split(",") if n.strip())
    return names


def _layers(text):
    try:
        sizes = [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}")
    if not sizes:
        raise argparse.ArgumentTypeError("at least one layer width is required")
    return sizes


def _time(text):
    try:
        num, den = text.split("/")
        return int(num), int(den)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a time signature like 6/8, got {text!r}")


def _quarter_length(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a duration: {text!r}")


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def cmd_ingest(args):
    instruments = _split_names(args.instrument)
    if args.mode == "horizontal" and len(instruments) != 1:
        raise ValidationError("horizontal mode takes exactly one --instrument")
    tokens = []
    for path in args.scores:
        try:
            score = read_score(path)
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise DataError(f"{path}: {exc}") from exc
        for w in score.warnings:
            log.warning("%s: %s", path, w)
        if args.mode == "horizontal":
            tokens.extend(extract_horizontal(score, instruments[0]))
        else:
            tokens.extend(extract_vertical(score, instruments))
    vocab = Vocabulary.build(tokens)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / TOKENS_FILE).write_text(dumps_tokens(tokens), encoding="utf-8")
    (out / VOCAB_FILE).write_text(vocab.dumps(), encoding="utf-8")
    _write_manifest(out / MANIFEST_FILE, "ingest",
                    {"mode": args.mode, "instruments": instruments,
                     "tokens": len(tokens), "vocab_size": vocab.size},
                    args.scores)
    print(f"{len(tokens)} tokens, vocabulary of {vocab.size} -> {out}")
    return 0


def _load_corpus(dataset_dir):
    d = Path(dataset_dir)
    try:
        tokens = loads_tokens((d / TOKENS_FILE).read_text(encoding="utf-8"))
        vocab = Vocabulary.loads((d / VOCAB_FILE).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read dataset in {d}: {exc}") from exc
    meta = {}
    if (d / MANIFEST_FILE).exists():
        meta = json.loads((d / MANIFEST_FILE).read_text(encoding="utf-8")).get("parameters", {})
    return tokens, vocab, meta


def _sidecar(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def cmd_train(args):
    train_cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.learning_rate,
        gradient_clip_norm=args.clip_norm or None, optimizer=args.optimizer,
        rng_seed=args.seed)
    tokens, vocab, _ = _load_corpus(args.dataset_dir)
    dataset = build_dataset(tokens, args.sequence_length, vocab)
    model_cfg = ModelConfig(
        layer_sizes=tuple(args.layers), dropout_rate=args.dropout,
        sequence_length=args.sequence_length, vocab_size=vocab.size, rng_seed=args.seed)
    weights, history = train(dataset, model_cfg, train_cfg)
    save_weights(weights, args.out)
    loss_path = _sidecar(args.out, ".loss.csv")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "mean_loss"])
    for epoch, value in enumerate(history, 1):
        writer.writerow([epoch, repr(value)])
    loss_path.write_text(buf.getvalue(), encoding="utf-8")
    d = Path(args.dataset_dir)
    _write_manifest(
        _sidecar(args.out, ".manifest.json"), "train",
        {"model": model_cfg.to_dict(), "train": train_cfg.to_dict(),
         "windows": len(dataset)},
        [d / TOKENS_FILE, d / VOCAB_FILE],
        {name: [args.seed, sid] for name, sid in STREAMS.items() if name != "seed-selection"})
    print(f"trained {len(dataset)} windows for {args.epochs} epochs; "
          f"final loss {history[-1]:.6f} -> {args.out}")
    return 0


def cmd_generate(args):
    if not -7 <= args.key_fifths <= 7:
        raise ValidationError(f"--key-fifths must be in -7..7, got {args.key_fifths}")
    tokens, vocab, meta = _load_corpus(args.dataset_dir)
    weights = load_weights(args.weights, sequence_length=args.sequence_length,
                           vocab_size=vocab.size)
    L = weights.config.sequence_length
    dataset = build_dataset(tokens, L, vocab)
    if args.scale is not None:
        scale = frozenset(int(pc) % 12 for pc in args.scale.split(","))
    else:
        scale = theory.major_scale(args.key_fifths)
    constraints = GenerationConstraints(
        target_duration=args.target_duration, min_duration=args.min_duration,
        scale_pitch_classes=scale, enforce_scale=not args.no_scale_filter,
        octave_span_semitones=args.octave_span, merge_rests=not args.no_rest_merge)
    seed = select_seed(dataset, rng_stream(args.seed, "seed-selection"))
    trace = run_generation(weights, vocab, seed, constraints)
    layout = meta.get("instruments") or vocab.instruments or ["Violin"]
    if meta.get("mode") == "horizontal":
        layout = layout[:1]
    score = assemble_score(trace.tokens, vocab, key_fifths=args.key_fifths, time=args.time,
                           instrument_layout=layout, tempo_bpm=args.tempo)
    base = Path(args.out_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    xml_path = base.with_name(base.name + ".musicxml")
    mid_path = base.with_name(base.name + ".mid")
    xml_path.write_bytes(write_musicxml(score))
    mid_path.write_bytes(write_midi(score))
    d = Path(args.dataset_dir)
    _write_manifest(
        base.with_name(base.name + ".manifest.json"), "generate",
        {"target_duration": str(constraints.target_duration),
         "min_duration": str(constraints.min_duration),
         "scale_pitch_classes": sorted(constraints.scale_pitch_classes),
         "enforce_scale": constraints.enforce_scale,
         "octave_span": constraints.octave_span_semitones,
         "merge_rests": constraints.merge_rests,
         "key_fifths": args.key_fifths, "time": list(args.time), "tempo_bpm": args.tempo,
         "seed_pattern": list(seed.indices), "events": len(trace.events),
         "fallbacks": trace.fallback_count},
        [args.weights, d / TOKENS_FILE, d / VOCAB_FILE],
        {"seed-selection": [args.seed, STREAMS["seed-selection"]]})
    print(f"{len(trace.events)} events, {score.length} quarter-lengths "
          f"({trace.fallback_count} constraint fallbacks) -> {xml_path}, {mid_path}")
    return 0


def _inspect_score(score, out):
    out.append(f"score: {len(score.parts)} part(s), key_fifths {score.key_fifths}, "
               f"time {score.time_signature[0]}/{score.time_signature[1]}, "
               f"tempo {score.tempo_bpm}, length {score.length} quarter-lengths")
    scale = theory.major_scale(score.key_fifths)
    for part in score.parts:
        evs = part.events
        pitched = [e for e in evs if not e.is_rest]
        out.append(f"  part {part.name!r}: {len(evs)} events, {len(pitched)} pitched")
        if not evs:
            continue
        out.append(f"    min duration: {min(e.duration for e in evs)}")
        outside = sum(1 for e in pitched for p in e.pitches if p.pitch_class not in scale)
        out.append(f"    out-of-scale pitches: {outside}")
        leaps = [abs(b.pitches[0].midi - a.top_midi) for a, b in zip(evs, evs[1:])
                 if len(b.pitches) == 1 and not a.is_rest]
        out.append(f"    max leap to a single note: {max(leaps, default=0)} semitones")
        rests = sum(1 for a, b in zip(evs, evs[1:]) if a.is_rest and b.is_rest)
        out.append(f"    consecutive rest pairs: {rests}")
    for w in score.warnings:
        out.append(f"  warning: {w}")


def cmd_inspect(args):
    path = Path(args.path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    out = []
    if blob[:4] == MAGIC:
        try:
            weights = loads_weights(blob)
            crc = "ok"
        except WeightChecksumError as exc:
            out.append(f"weight file: CRC status FAILED ({exc})")
            print("\n".join(out))
            return 3
        cfg = weights.config
        out.append(f"weight file: CRC status {crc}")
        out.append(f"config: layers {list(cfg.layer_sizes)}, dropout {cfg.dropout_rate}, "
                   f"sequence length {cfg.sequence_length}, vocab {cfg.vocab_size}")
        for name, arr in weights.named_tensors():
            out.append(f"  {name}: {list(arr.shape)}")
    elif blob[:4] == b"PK\x03\x04" or blob.lstrip()[:1] == b"<":
        _inspect_score(parse_score(blob), out)
    else:
        try:
            text = blob.decode("utf-8")
        except UnicodeDecodeError:
            raise ValidationError(f"{path}: unrecognized file format")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines and all(ln.split("\t", 1)[0].isdigit() for ln in lines):
            vocab = Vocabulary.loads(text)
            out.append(f"vocabulary: N = {vocab.size}")
            for i, tok in enumerate(vocab.tokens[:5]):
                out.append(f"  {i}\t{tok}")
        elif lines and all(len(ln.split("\t")) in (2, 3) for ln in lines):
            tokens = loads_tokens(text)
            names = {t.instrument for t in tokens}
            out.append(f"token stream: {len(tokens)} tokens, {len(set(tokens))} distinct")
            if names != {None}:
                out.append("  instruments: " + ", ".join(sorted(n for n in names if n)))
        else:
            raise ValidationError(f"{path}: unrecognized file format")
    print("\n".join(out))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="scoregen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="tokenize scores into a dataset directory")
    p.add_argument("scores", nargs="+")
    p.add_argument("-i", "--instrument", "--instruments", action="append", required=True,
                   help="part name (repeatable or comma-separated)")
    p.add_argument("--mode", choices=["horizontal", "vertical"], default="horizontal")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the LSTM on an ingested dataset")
    p.add_argument("dataset_dir")
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--layers", type=_layers, default=[256, 256, 256])
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--sequence-length", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--clip-norm", type=float, default=5.0, help="0 disables clipping")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate a constrained score")
    p.add_argument("weights")
    p.add_argument("dataset_dir")
    p.add_argument("--out-base", required=True)
    p.add_argument("--target-duration", type=_quarter_length, default=Fraction(48))
    p.add_argument("--min-duration", type=_quarter_length, default=Fraction(1, 2))
    p.add_argument("--octave-span", type=int, default=12)
    p.add_argument("--scale", help="comma-separated pitch classes; default: the key's major scale")
    p.add_argument("--no-scale-filter", action="store_true")
    p.add_argument("--no-rest-merge", action="store_true")
    p.add_argument("--key-fifths", type=int, default=DEFAULT_KEY_FIFTHS)
    p.add_argument("--time", type=_time, default=(6, 8))
    p.add_argument("--tempo", type=int, default=None, help="beats per minute")
    p.add_argument("--sequence-length", type=int, default=None,
                   help="expected window length; checked against the weights")
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inspect", help="summarize a token, vocabulary, weight or score file")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ScoregenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
